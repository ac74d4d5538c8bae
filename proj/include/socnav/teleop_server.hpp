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

// WebSocket transport for TeleopSession.
//
// Two threads: the network thread runs the io_context (accept, read, write),
// the tick thread owns the session and advances it at a fixed period. They
// meet in an inbox guarded by a mutex that is held only to push or swap.
// Connects and disconnects travel through the same inbox, so the session sees
// them in arrival order relative to the client's messages.
// Consecutive commands coalesce in the inbox, so a flood of commands costs
// one slot and the tick applies the latest one. Outbound messages are posted
// to the network thread; the tick never waits on a socket.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "socnav/teleop_bridge.hpp"

namespace socnav {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::chrono::milliseconds tick_period{100};
  std::size_t inbox_capacity = 64;      // client messages waiting for the next tick; connection events always fit
  std::size_t outbound_capacity = 256;  // queued frames before state updates are dropped
};

class TeleopServer {
 public:
  TeleopServer(TeleopConfig config, ServerOptions options, std::optional<RewardModel> model = std::nullopt)
      : session_(std::move(config), std::move(model)), options_(std::move(options)), acceptor_(ioc_) {}

  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;
  ~TeleopServer() { stop(); }

  /// Binds and starts both threads; throws if the address cannot be bound.
  void start() {
    namespace net = boost::asio;
    const net::ip::tcp::endpoint endpoint(net::ip::make_address(options_.address), options_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    do_accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
    tick_thread_ = std::thread([this] { tick_loop(); });
  }

  unsigned short port() const { return port_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    {
      std::lock_guard lock(wake_mutex_);
    }
    wake_.notify_all();
    if (tick_thread_.joinable()) tick_thread_.join();
    // Closing the acceptor and socket cancels the pending operations, after
    // which run() returns on its own.
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      if (conn_) conn_->close();
    });
    if (io_thread_.joinable()) io_thread_.join();
  }

  /// Blocks until stop() is called from another thread.
  void wait() {
    std::unique_lock lock(wake_mutex_);
    wake_.wait(lock, [this] { return stopping_.load(); });
  }

  /// Episodes saved so far (copied under the session lock).
  std::vector<Demonstration> saved() const {
    std::lock_guard lock(session_mutex_);
    return session_.saved();
  }

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(boost::asio::ip::tcp::socket socket, TeleopServer& server)
        : ws_(std::move(socket)), server_(server) {}

    void start() {
      ws_.text(true);
      ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) {
        if (ec) return self->server_.on_closed(self);
        self->open_ = true;
        self->server_.on_opened(self);
        self->read();
      });
    }

    void send(std::string text, bool droppable) {
      // Nothing may be written before the handshake reply.
      if (closed_ || !open_) return;
      if (droppable && queue_.size() >= server_.options_.outbound_capacity) return;
      queue_.push_back(std::move(text));
      if (queue_.size() == 1) write();
    }

    void close() {
      if (closed_) return;
      closed_ = true;
      boost::beast::error_code ec;
      boost::beast::get_lowest_layer(ws_).close(ec);
    }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        if (ec) {
          self->closed_ = true;
          return self->server_.on_closed(self);
        }
        self->server_.on_message(boost::beast::buffers_to_string(self->buffer_.data()));
        self->buffer_.consume(self->buffer_.size());
        self->read();
      });
    }

    void write() {
      ws_.async_write(boost::asio::buffer(queue_.front()),
                      [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
                        if (ec) {
                          self->closed_ = true;
                          return self->server_.on_closed(self);
                        }
                        self->queue_.pop_front();
                        if (!self->queue_.empty()) self->write();
                      });
    }

    boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
    boost::beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    bool open_ = false;
    bool closed_ = false;
    TeleopServer& server_;
  };

  struct Inbound {
    enum class Kind { message, opened, closed };
    Kind kind = Kind::message;
    std::string text;
    bool is_command = false;
  };

  // --- network thread ---

  void do_accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, boost::asio::ip::tcp::socket socket) {
      if (ec) return;  // acceptor closed
      if (conn_) {
        // One UI client at a time.
        boost::system::error_code ignored;
        socket.close(ignored);
      } else {
        conn_ = std::make_shared<Connection>(std::move(socket), *this);
        conn_->start();
      }
      do_accept();
    });
  }

  void on_opened(const std::shared_ptr<Connection>&) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back({Inbound::Kind::opened, {}, false});
  }

  void on_closed(const std::shared_ptr<Connection>& c) {
    if (conn_ != c) return;
    conn_.reset();
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back({Inbound::Kind::closed, {}, false});
  }

  void on_message(std::string text) {
    bool is_command = false;
    try {
      is_command = TeleopMessage::parse(text).kind == MessageKind::command;
    } catch (const std::invalid_argument&) {
      // The session replies with the parse error on the next tick.
    }
    std::lock_guard lock(inbox_mutex_);
    if (is_command && !inbox_.empty() && inbox_.back().is_command) {
      inbox_.back().text = std::move(text);
      return;
    }
    if (inbox_.size() >= options_.inbox_capacity) {
      ++overflowed_;
      return;
    }
    inbox_.push_back({Inbound::Kind::message, std::move(text), is_command});
  }

  // --- tick thread ---

  void publish(const std::vector<TeleopMessage>& messages) {
    for (const auto& m : messages) {
      const bool droppable = m.kind == MessageKind::state_update;
      boost::asio::post(ioc_, [this, text = m.dump(), droppable]() mutable {
        if (conn_) conn_->send(std::move(text), droppable);
      });
    }
  }

  void tick_loop() {
    auto next = std::chrono::steady_clock::now();
    while (!stopping_) {
      std::deque<Inbound> batch;
      std::size_t overflowed = 0;
      {
        std::lock_guard lock(inbox_mutex_);
        batch.swap(inbox_);
        std::swap(overflowed, overflowed_);
      }
      {
        std::lock_guard lock(session_mutex_);
        for (const auto& in : batch) {
          switch (in.kind) {
            case Inbound::Kind::opened: session_.reset_connection(); break;
            case Inbound::Kind::closed: publish(session_.disconnect()); break;
            case Inbound::Kind::message: publish(session_.handle(in.text)); break;
          }
        }
        if (overflowed > 0) publish({session_.make_error(std::to_string(overflowed) + " messages dropped: inbox full")});
        publish(session_.tick());
      }
      next += options_.tick_period;
      std::unique_lock lock(wake_mutex_);
      wake_.wait_until(lock, next, [this] { return stopping_.load(); });
    }
  }

  TeleopSession session_;
  mutable std::mutex session_mutex_;
  ServerOptions options_;

  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::shared_ptr<Connection> conn_;  // network thread only
  unsigned short port_ = 0;

  std::mutex inbox_mutex_;
  std::deque<Inbound> inbox_;
  std::size_t overflowed_ = 0;

  std::atomic<bool> stopping_{false};
  std::mutex wake_mutex_;
  std::condition_variable wake_;
  std::thread io_thread_;
  std::thread tick_thread_;
};

}  // namespace socnav
