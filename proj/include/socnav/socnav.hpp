// Copyright 2026 The socnav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Everything except the WebSocket transport, which pulls in Boost.Asio and
// lives in socnav/teleop_server.hpp.

#pragma once

#include "socnav/crowd_sim.hpp"
#include "socnav/demo_archive.hpp"
#include "socnav/feature_stack.hpp"
#include "socnav/geometry.hpp"
#include "socnav/grid_mdp.hpp"
#include "socnav/grid_window.hpp"
#include "socnav/nav_runtime.hpp"
#include "socnav/reward_net.hpp"
#include "socnav/teleop_bridge.hpp"
#include "socnav/tmedirl.hpp"
