#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "mbotsim/live_session.hpp"
#include "mbotsim/wire.hpp"

namespace mbotsim {

/// WebSocket bridge: one text message per frame (JSON line). Sends hello on
/// connect, state frames at the session's broadcast rate, and error frames in
/// reply to bad input. Accepts teleop and control frames.
///
/// All client bookkeeping runs on a single io thread. Each client keeps at
/// most one pending state frame (newest wins); the number replaced is
/// reported as `dropped` in the next state frame it receives.
class BridgeServer {
 public:
  static constexpr std::size_t kMaxQueuedFrames = 256;

  BridgeServer(LiveSession& session, unsigned short port, const std::string& address = "0.0.0.0")
      : session_(session), acceptor_(ioc_) {
    namespace net = boost::asio;
    const net::ip::tcp::endpoint ep{net::ip::make_address(address), port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);  // throws system_error if the port is taken
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  ~BridgeServer() { stop(); }

  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Hooks the session callbacks and starts the io thread. Call before
  /// session.start().
  void start() {
    session_.on_state([this](const SimSnapshot& snap, bool paused) {
      auto shared = std::make_shared<const SimSnapshot>(snap);
      boost::asio::post(ioc_, [this, shared, paused] {
        for (auto& c : live_clients()) c->offer_state(shared, paused);
      });
    });
    session_.on_topic([this](const TopicMessage& msg) {
      auto shared = std::make_shared<const TopicMessage>(msg);
      boost::asio::post(ioc_, [this, shared] {
        for (auto& c : live_clients()) c->offer_topic(shared);
      });
    });
    do_accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    if (stopped_) return;
    stopped_ = true;
    ioc_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  class Client : public std::enable_shared_from_this<Client> {
   public:
    Client(boost::asio::ip::tcp::socket socket, BridgeServer& server) : ws_(std::move(socket)), server_(server) {}

    void run() {
      ws_.text(true);
      ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) {
        if (ec) return;
        self->open_ = true;
        self->queue_frame(make_hello_frame(0, self->server_.session_.config()));
        self->do_read();
      });
    }

    bool open() const { return open_; }

    void offer_state(std::shared_ptr<const SimSnapshot> snap, bool paused) {
      if (!open_) return;
      if (pending_state_) ++dropped_;
      pending_state_ = std::move(snap);
      pending_paused_ = paused;
      maybe_write();
    }

    void offer_topic(std::shared_ptr<const TopicMessage> msg) {
      if (!open_) return;
      queue_frame(make_topic_frame(0, *msg));
    }

   private:
    void queue_frame(WireFrame f) {
      if (outbox_.size() >= kMaxQueuedFrames) {
        outbox_.pop_front();
        ++dropped_;
      }
      outbox_.push_back(std::move(f));
      maybe_write();
    }

    void maybe_write() {
      if (writing_ || !open_) return;
      WireFrame next;
      if (!outbox_.empty()) {
        next = std::move(outbox_.front());
        outbox_.pop_front();
      } else if (pending_state_) {
        next = make_state_frame(0, *pending_state_, pending_paused_, dropped_);
        pending_state_.reset();
      } else {
        return;
      }
      next.seq = ++seq_out_;
      text_ = encode_frame(next) + "\n";
      writing_ = true;
      ws_.async_write(boost::asio::buffer(text_),
                      [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
                        self->writing_ = false;
                        if (ec) {
                          self->open_ = false;
                          return;
                        }
                        self->maybe_write();
                      });
    }

    void do_read() {
      ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        if (ec) {
          self->open_ = false;
          return;
        }
        const std::string text = boost::beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->handle(text);
        self->do_read();
      });
    }

    void handle(const std::string& text) {
      try {
        const WireFrame f = decode_frame(text);
        if (last_seq_in_ && f.seq <= *last_seq_in_) {
          queue_frame(make_error_frame(0, "seq_regression", "client seq must strictly increase"));
          return;
        }
        last_seq_in_ = f.seq;
        switch (f.type) {
          case FrameType::teleop:
            server_.session_.submit_teleop(parse_teleop(f));
            break;
          case FrameType::control:
            server_.session_.submit_control(parse_control(f));
            break;
          default:
            queue_frame(make_error_frame(0, "unexpected_type",
                                         "clients may send teleop or control frames, not " +
                                             std::string(to_string(f.type))));
        }
      } catch (const DecodeError& e) {
        std::optional<std::size_t> offset;
        if (e.code() == "malformed") offset = e.offset();
        queue_frame(make_error_frame(0, e.code(), e.what(), offset));
      }
    }

    boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
    BridgeServer& server_;
    boost::beast::flat_buffer buffer_;
    std::deque<WireFrame> outbox_;
    std::shared_ptr<const SimSnapshot> pending_state_;
    bool pending_paused_{false};
    std::string text_;
    bool writing_{false};
    bool open_{false};
    std::uint64_t seq_out_{0};
    std::optional<std::uint64_t> last_seq_in_;
    std::uint64_t dropped_{0};
  };

  std::vector<std::shared_ptr<Client>> live_clients() {
    std::erase_if(clients_, [](const std::weak_ptr<Client>& w) { return w.expired(); });
    std::vector<std::shared_ptr<Client>> out;
    for (auto& w : clients_) {
      if (auto c = w.lock(); c && c->open()) out.push_back(std::move(c));
    }
    return out;
  }

  void do_accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, boost::asio::ip::tcp::socket socket) {
      if (!ec) {
        auto client = std::make_shared<Client>(std::move(socket), *this);
        clients_.push_back(client);
        client->run();
      }
      if (acceptor_.is_open()) do_accept();
    });
  }

  LiveSession& session_;
  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::vector<std::weak_ptr<Client>> clients_;
  std::thread thread_;
  bool stopped_{false};
};

}  // namespace mbotsim
