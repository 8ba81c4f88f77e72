#include "hfm/gateway/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <iostream>
#include <thread>

#include "hfm/asset_registry.hpp"
#include "hfm/gateway/rest_api.hpp"
#include "hfm/gateway/session_handler.hpp"
#include "hfm/log_store.hpp"

namespace hfm::gateway {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

constexpr std::string_view kStreamPath = "/api/v1/stream";
constexpr auto kHttpIdleTimeout = std::chrono::seconds(60);

namespace {

class StreamConnection : public std::enable_shared_from_this<StreamConnection> {
 public:
  StreamConnection(tcp::socket&& socket, Services& services, std::chrono::seconds heartbeat_timeout)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), handler_(services), timeout_(heartbeat_timeout) {}

  void run(http::request<http::string_body> request) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(request, beast::bind_front_handler(&StreamConnection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    arm_timer();
    read_next();
  }

  void arm_timer() {
    timer_.expires_after(timeout_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec == net::error::operation_aborted || self->finished_) return;
      self->deliver(self->handler_.on_heartbeat_timeout());
    });
  }

  void read_next() {
    ws_.async_read(buffer_, beast::bind_front_handler(&StreamConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (closing_) return;
    arm_timer();
    auto outcome = handler_.on_frame(text);
    const bool close = outcome.close;
    deliver(std::move(outcome));
    if (!close) read_next();
  }

  void deliver(SessionHandler::Outcome outcome) {
    for (auto& frame : outcome.frames) queue_.push_back(std::move(frame));
    if (outcome.close) closing_ = true;
    if (!writing_) write_next();
  }

  void write_next() {
    if (queue_.empty()) {
      writing_ = false;
      if (closing_ && !close_sent_) {
        close_sent_ = true;
        timer_.cancel();
        handler_.on_disconnect();
        ws_.async_close(websocket::close_code::normal,
                        [self = shared_from_this()](beast::error_code) { self->finish(); });
      }
      return;
    }
    writing_ = true;
    ws_.async_write(net::buffer(queue_.front()),
                    beast::bind_front_handler(&StreamConnection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    queue_.pop_front();
    write_next();
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    timer_.cancel();
    handler_.on_disconnect();
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  beast::flat_buffer buffer_;
  SessionHandler handler_;
  std::chrono::seconds timeout_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_sent_ = false;
  bool finished_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, Services& services, RestApi& api, std::chrono::seconds heartbeat_timeout)
      : stream_(std::move(socket)), services_(services), api_(api), heartbeat_timeout_(heartbeat_timeout) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::read_next, shared_from_this()));
  }

 private:
  void read_next() {
    request_ = {};
    stream_.expires_after(kHttpIdleTimeout);
    http::async_read(stream_, buffer_, request_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;

    const std::string_view target(request_.target().data(), request_.target().size());
    if (websocket::is_upgrade(request_)) {
      if (parse_target(target).path == kStreamPath) {
        std::make_shared<StreamConnection>(stream_.release_socket(), services_, heartbeat_timeout_)
            ->run(std::move(request_));
        return;
      }
    }

    const auto& auth_header = request_[http::field::authorization];
    const HttpReply reply = api_.handle(std::string_view(request_.method_string().data(), request_.method_string().size()),
                                        target, std::string_view(auth_header.data(), auth_header.size()),
                                        request_.body());
    auto response = std::make_shared<http::response<http::string_body>>(
        static_cast<http::status>(reply.status), request_.version());
    response->set(http::field::server, "hfm-gateway");
    response->set(http::field::content_type, "application/json");
    response->keep_alive(request_.keep_alive());
    response->body() = reply.body;
    response->prepare_payload();
    response_ = response;
    http::async_write(stream_, *response,
                      beast::bind_front_handler(&HttpConnection::on_write, shared_from_this(), response->keep_alive()));
  }

  void on_write(bool keep_alive, beast::error_code ec, std::size_t) {
    response_.reset();
    if (ec) return;
    if (!keep_alive) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    read_next();
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::shared_ptr<void> response_;
  Services& services_;
  RestApi& api_;
  std::chrono::seconds heartbeat_timeout_;
};

}  // namespace

struct Gateway::Impl {
  Impl(GatewayConfig cfg, Clock clock)
      : config(std::move(cfg)),
        store(config.data_dir, store::LogStore::Options{config.fsync}),
        registry(config.data_dir / "assets.jsonl"),
        services(auth::SigningKey::load(config.key_file), store, registry, std::move(clock), config.max_sessions),
        api(services, config.dev_passphrase, config.token_ttl_seconds),
        ioc(static_cast<int>(config.io_threads)),
        acceptor(net::make_strand(ioc)),
        signals(ioc, SIGINT, SIGTERM) {}

  void accept_next() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == net::error::operation_aborted) return;
      } else {
        socket.set_option(tcp::no_delay(true), ec);
        std::make_shared<HttpConnection>(std::move(socket), services, api,
                                         std::chrono::seconds(config.heartbeat_timeout_seconds))
            ->run();
      }
      accept_next();
    });
  }

  GatewayConfig config;
  store::LogStore store;
  assets::AssetRegistry registry;
  Services services;
  RestApi api;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::signal_set signals;
  std::vector<std::thread> threads;
  uint16_t port = 0;
};

Gateway::Gateway(GatewayConfig config, Clock clock) {
  if (auto problems = prepare_config(config); !problems.empty())
    throw std::invalid_argument("invalid gateway config: " + problems.front());
  impl_ = std::make_unique<Impl>(std::move(config), std::move(clock));
}

Gateway::~Gateway() { stop(); }

uint16_t Gateway::start() {
  const auto recovery = impl_->store.recover();
  if (recovery.temp_files_removed || recovery.entries_reindexed || recovery.torn_index_lines_dropped) {
    std::cerr << "store recovery: removed " << recovery.temp_files_removed << " temp files, reindexed "
              << recovery.entries_reindexed << " entries, dropped " << recovery.torn_index_lines_dropped
              << " torn index lines\n";
  }

  const auto hp = parse_host_port(impl_->config.listen_address);
  tcp::resolver resolver(impl_->ioc);
  const auto endpoint = resolver.resolve(hp->host, std::to_string(hp->port))->endpoint();
  auto& acceptor = impl_->acceptor;
  acceptor.open(endpoint.protocol());
  acceptor.set_option(net::socket_base::reuse_address(true));
  acceptor.bind(endpoint);
  acceptor.listen(net::socket_base::max_listen_connections);
  impl_->port = acceptor.local_endpoint().port();
  impl_->accept_next();

  impl_->signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) impl_->ioc.stop();
  });
  for (size_t i = 0; i < impl_->config.io_threads; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  return impl_->port;
}

void Gateway::run_until_signalled() {
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
}

void Gateway::stop() {
  if (!impl_) return;
  impl_->ioc.stop();
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
  impl_->threads.clear();
}

uint16_t Gateway::port() const { return impl_->port; }

Services& Gateway::services() { return impl_->services; }

}  // namespace hfm::gateway
