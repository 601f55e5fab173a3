#pragma once

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "talents/service/registry.hpp"

namespace talents::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class WsConn;

/// Clock and subscriber list of one session. The tick timer runs on the
/// hub's own strand; every snapshot is handed to each subscriber's strand.
class SessionHub : public std::enable_shared_from_this<SessionHub> {
 public:
  SessionHub(net::io_context& ioc, std::shared_ptr<Session> s, Registry& reg)
      : session(std::move(s)), timer_(net::make_strand(ioc)), reg_(reg) {}

  std::shared_ptr<Session> session;

  void subscribe(const std::shared_ptr<WsConn>& c) {
    std::lock_guard lock(mu_);
    subs_.insert(c);
  }
  void unsubscribe(const std::shared_ptr<WsConn>& c) {
    std::lock_guard lock(mu_);
    subs_.erase(c);
  }

  /// Starts the tick loop once; later calls are no-ops.
  void start() {
    std::lock_guard lock(mu_);
    if (started_) return;
    started_ = true;
    timer_.expires_after(std::chrono::milliseconds(session->options().tick_ms));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
  }

  void stop() { net::post(timer_.get_executor(), [self = shared_from_this()] { self->timer_.cancel(); }); }

 private:
  void on_tick(beast::error_code ec);
  void broadcast(const std::string& text);

  net::steady_timer timer_;
  Registry& reg_;
  std::mutex mu_;
  std::set<std::shared_ptr<WsConn>> subs_;
  bool started_ = false;
};

/// One WebSocket client bound to one session.
class WsConn : public std::enable_shared_from_this<WsConn> {
 public:
  WsConn(tcp::socket&& socket, std::shared_ptr<SessionHub> hub) : ws_(std::move(socket)), hub_(std::move(hub)) {}

  void accept(http::request<http::string_body> req) {
    ws_.text(true);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  /// Queues a text frame; safe from any thread.
  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), t = std::move(text)]() mutable {
      self->queue_.push_back(std::move(t));
      if (self->queue_.size() == 1) self->write();
    });
  }

 private:
  void read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      detach();
      return;
    }
    const std::string text = beast::buffers_to_string(buf_.data());
    buf_.consume(buf_.size());
    try {
      const ClientMessage m = parse_client_message(text);
      auto& s = *hub_->session;
      switch (m.kind) {
        case ClientKind::join:
          send(s.join().dump());
          joined_ = true;
          hub_->subscribe(shared_from_this());
          hub_->start();
          break;
        case ClientKind::resync: send(s.full_snapshot().dump()); break;
        case ClientKind::input:
          if (!joined_) throw Rejected("join before sending input");
          send(ack_message(s.submit_input(m.action)).dump());
          break;
        case ClientKind::leave:
          detach();
          ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
          return;
      }
    } catch (const Rejected& e) {
      send(error_message(e.what()).dump());
    }
    read();
  }

  void detach() {
    if (!joined_) return;
    joined_ = false;
    hub_->session->leave();
    hub_->unsubscribe(shared_from_this());
  }

  void write() {
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<SessionHub> hub_;
  beast::flat_buffer buf_;
  std::deque<std::string> queue_;
  bool joined_ = false;
};

inline void SessionHub::on_tick(beast::error_code ec) {
  if (ec) return;
  bool done = false;
  for (const auto& m : session->advance()) {
    broadcast(m.dump());
    done = done || m.at("type") == "finished";
  }
  if (done || session->status() == Status::finished) {
    try {
      reg_.persist(*session);
    } catch (const std::exception& e) {
      std::cerr << "persist " << session->id() << ": " << e.what() << '\n';
    }
    return;
  }
  timer_.expires_at(timer_.expiry() + std::chrono::milliseconds(session->options().tick_ms));
  timer_.async_wait([self = shared_from_this()](beast::error_code e) { self->on_tick(e); });
}

inline void SessionHub::broadcast(const std::string& text) {
  std::vector<std::shared_ptr<WsConn>> subs;
  {
    std::lock_guard lock(mu_);
    subs.assign(subs_.begin(), subs_.end());
  }
  for (const auto& c : subs) c->send(text);
}

inline std::string mime_type(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

class Server;

class HttpConn : public std::enable_shared_from_this<HttpConn> {
 public:
  HttpConn(tcp::socket&& s, Server& server) : stream_(std::move(s)), server_(server) {}
  void run() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->on_request();
    });
  }
  void on_request();
  void respond(http::status st, std::string body, const std::string& type = "application/json") {
    auto res = std::make_shared<http::response<http::string_body>>(st, req_.version());
    res->set(http::field::server, "talents");
    res->set(http::field::content_type, type);
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  Server& server_;
};

/// HTTP management endpoints, static web client files and the WebSocket
/// game channel on one port.
class Server {
 public:
  Server(ServiceConfig cfg, AgentFactory factory)
      : cfg_(std::move(cfg)), registry_(std::move(factory), cfg_.data_dir), acceptor_(ioc_) {}

  /// Binds and starts accepting; returns the bound port (port 0 picks one).
  unsigned short listen() {
    const tcp::endpoint ep(net::ip::make_address(cfg_.bind), static_cast<unsigned short>(cfg_.port));
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(net::socket_base::max_listen_connections);
    accept();
    return acceptor_.local_endpoint().port();
  }

  /// Runs the event loop on cfg.threads threads until stop().
  void run() {
    std::vector<std::thread> extra;
    for (int i = 1; i < cfg_.threads; ++i) extra.emplace_back([this] { ioc_.run(); });
    ioc_.run();
    for (auto& t : extra) t.join();
  }

  void stop() { ioc_.stop(); }

  Registry& registry() { return registry_; }
  const ServiceConfig& config() const { return cfg_; }

  std::shared_ptr<SessionHub> hub(const std::string& id) {
    auto s = registry_.get(id);
    std::lock_guard lock(mu_);
    auto& h = hubs_[id];
    if (!h) h = std::make_shared<SessionHub>(ioc_, s, registry_);
    return h;
  }

  /// POST /api/sessions body: {layout, agent, tick_ms, seed, rate_cap, expose_belief}.
  json create(const json& body) {
    SessionOptions o;
    o.tick_ms = cfg_.tick_ms;
    o.rate_cap = cfg_.rate_cap;
    o.grace_ms = cfg_.grace_ms;
    o.expose_belief = cfg_.expose_belief;
    try {
      o.layout = body.value("layout", o.layout);
      o.agent = body.value("agent", o.agent);
      o.tick_ms = body.value("tick_ms", o.tick_ms);
      o.round_ms = body.value("round_ms", o.round_ms);
      o.seed = body.value("seed", o.seed);
      o.rate_cap = body.value("rate_cap", o.rate_cap);
      o.expose_belief = body.value("expose_belief", o.expose_belief);
    } catch (const json::exception& e) {
      throw Rejected(std::string("bad session request: ") + e.what());
    }
    auto s = registry_.create(o);
    hub(s->id());
    return s->info();
  }

  void upgrade(tcp::socket&& socket, http::request<http::string_body> req, const std::string& id) {
    auto conn = std::make_shared<WsConn>(std::move(socket), hub(id));
    conn->accept(std::move(req));
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket s) {
      if (!ec) std::make_shared<HttpConn>(std::move(s), *this)->run();
      if (acceptor_.is_open()) accept();
    });
  }

  ServiceConfig cfg_;
  net::io_context ioc_;
  Registry registry_;
  tcp::acceptor acceptor_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<SessionHub>> hubs_;
};

inline void HttpConn::on_request() {
  const std::string target(req_.target());
  const std::string path = target.substr(0, target.find('?'));
  auto error = [&](http::status st, const std::string& why) { respond(st, json{{"error", why}}.dump()); };
  try {
    if (path.starts_with("/ws/")) {
      if (!websocket::is_upgrade(req_)) return error(http::status::bad_request, "websocket upgrade required");
      const std::string id = path.substr(4);
      try {
        server_.registry().get(id);
      } catch (const Rejected& e) {
        return error(http::status::not_found, e.what());
      }
      server_.upgrade(stream_.release_socket(), std::move(req_), id);
      return;
    }
    if (path == "/api/health") return respond(http::status::ok, json{{"ok", true}, {"protocol", kProtocolVersion}}.dump());
    if (path == "/api/sessions") {
      if (req_.method() == http::verb::post) {
        json body = json::object();
        if (!req_.body().empty()) {
          try {
            body = json::parse(req_.body());
          } catch (const json::exception&) {
            return error(http::status::bad_request, "body is not valid JSON");
          }
        }
        return respond(http::status::created, server_.create(body).dump());
      }
      if (req_.method() == http::verb::get) return respond(http::status::ok, server_.registry().list().dump());
      return error(http::status::method_not_allowed, "use GET or POST");
    }
    if (path.starts_with("/api/sessions/")) {
      std::string rest = path.substr(14);
      const bool want_replay = rest.ends_with("/replay");
      if (want_replay) rest.resize(rest.size() - 7);
      if (!want_replay) {
        try {
          return respond(http::status::ok, server_.registry().get(rest)->info().dump());
        } catch (const Rejected& e) {
          return error(http::status::not_found, e.what());
        }
      }
      try {
        const auto s = server_.registry().get(rest);
        if (s->status() != Status::finished) return error(http::status::conflict, "session " + rest + " has not finished");
      } catch (const Rejected&) {
        // Not in memory: may still be on disk.
      }
      try {
        return respond(http::status::ok, server_.registry().replay(rest).dump());
      } catch (const Rejected& e) {
        return error(http::status::not_found, e.what());
      }
    }
    if (path.starts_with("/api/")) return error(http::status::not_found, "no such endpoint");
    // Static web client.
    if (path.find("..") != std::string::npos) return error(http::status::bad_request, "bad path");
    auto file = std::filesystem::path(server_.config().static_dir) / (path == "/" ? "index.html" : path.substr(1));
    std::ifstream f(file, std::ios::binary);
    if (!f) return error(http::status::not_found, "not found");
    std::ostringstream os;
    os << f.rdbuf();
    return respond(http::status::ok, os.str(), mime_type(file.string()));
  } catch (const Rejected& e) {
    return error(http::status::bad_request, e.what());
  } catch (const std::exception& e) {
    return error(http::status::internal_server_error, e.what());
  }
}

}  // namespace talents::service
