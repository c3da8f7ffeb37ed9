#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "footfall/realtime/osc.hpp"
#include "footfall/realtime/telemetry.hpp"

namespace footfall {

// WebSocket endpoint for the tuning console. Every session gets the hello
// message, then all hub traffic; text it sends is passed to `on_message` and
// the reply goes back to that session only. Runs on one background thread.
class TelemetryServer {
 public:
  using HelloFn = std::function<std::string()>;
  using MessageFn = std::function<std::string(std::string_view)>;

  TelemetryServer(TelemetryHub& hub, HelloFn hello, MessageFn on_message)
      : hub_(hub), hello_(std::move(hello)), on_message_(std::move(on_message)), acceptor_(io_) {}

  ~TelemetryServer() { stop(); }

  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  // Port 0 picks a free port; see bound_port().
  void start(const HostPort& listen) {
    namespace ip = boost::asio::ip;
    const std::string host = listen.host.empty() ? "127.0.0.1" : listen.host;
    ip::tcp::resolver resolver(io_);
    const ip::tcp::endpoint ep = *resolver.resolve(host, std::to_string(listen.port)).begin();
    acceptor_.open(ep.protocol());
    acceptor_.set_option(ip::tcp::acceptor::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    {
      // Detach from the hub first so no publisher posts into a dead context.
      std::lock_guard lock(consumers_mutex_);
      for (auto& w : consumers_)
        if (auto c = w.lock()) c->set_notify({});
    }
    boost::asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
    });
    io_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::uint16_t bound_port() const { return port_; }
  std::size_t sessions_opened() const { return opened_.load(); }

 private:
  using tcp = boost::asio::ip::tcp;
  using Ws = boost::beast::websocket::stream<tcp::socket>;

  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(TelemetryServer& server, tcp::socket socket) : server_(server), ws_(std::move(socket)) {}

    ~Session() {
      if (consumer_) server_.hub_.unsubscribe(consumer_);
    }

    void run() {
      ws_.text(true);
      ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) {
        if (ec) return;
        self->on_open();
      });
    }

   private:
    void on_open() {
      ++server_.opened_;
      consumer_ = server_.hub_.subscribe(server_.hello_ ? std::optional(server_.hello_()) : std::nullopt);
      std::weak_ptr<Session> weak = shared_from_this();
      auto& io = server_.io_;
      {
        std::lock_guard lock(server_.consumers_mutex_);
        if (server_.stopped_) return;
        server_.consumers_.push_back(consumer_);
        consumer_->set_notify([weak, &io] {
          boost::asio::post(io, [weak] {
            if (auto s = weak.lock()) s->flush();
          });
        });
      }
      flush();
      read();
    }

    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
        if (ec) {
          self->closed_ = true;
          return;
        }
        const std::string text = boost::beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        if (self->server_.on_message_) self->consumer_->push(self->server_.on_message_(text), false);
        self->read();
      });
    }

    void flush() {
      if (writing_ || closed_) return;
      if (pending_.empty()) {
        std::vector<std::string> batch;
        consumer_->drain(batch);
        for (auto& m : batch) pending_.push_back(std::move(m));
      }
      if (pending_.empty()) return;
      writing_ = true;
      ws_.async_write(boost::asio::buffer(pending_.front()),
                      [self = shared_from_this()](boost::beast::error_code ec, std::size_t) {
                        self->writing_ = false;
                        if (ec) {
                          self->closed_ = true;
                          return;
                        }
                        self->pending_.pop_front();
                        self->flush();
                      });
    }

    TelemetryServer& server_;
    Ws ws_;
    boost::beast::flat_buffer buffer_;
    std::shared_ptr<TelemetryConsumer> consumer_;
    std::deque<std::string> pending_;
    bool writing_ = false;
    bool closed_ = false;
  };

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<Session>(*this, std::move(socket))->run();
      accept();
    });
  }

  TelemetryHub& hub_;
  HelloFn hello_;
  MessageFn on_message_;
  boost::asio::io_context io_;
  tcp::acceptor acceptor_;
  std::thread thread_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopped_{false};
  std::atomic<std::size_t> opened_{0};
  std::mutex consumers_mutex_;
  std::vector<std::weak_ptr<TelemetryConsumer>> consumers_;
};

}  // namespace footfall
