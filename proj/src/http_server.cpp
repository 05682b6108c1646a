#include "ebr/http_server.hpp"

#include <httplib.h>

#include <charconv>
#include <chrono>

#include "ebr/errors.hpp"

namespace ebr {

std::pair<std::string, int> split_listen_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Error(Errc::InvalidConfig, "listen_addr must be host:port, got '" + addr + "'");
  int port = -1;
  const auto* first = addr.data() + colon + 1;
  const auto* last = addr.data() + addr.size();
  const auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last || port < 0 || port > 65535) {
    throw Error(Errc::InvalidConfig, "bad port in listen_addr '" + addr + "'");
  }
  return {addr.substr(0, colon), port};
}

namespace {

template <class T>
T int_param(const httplib::Request& req, const char* name, T fallback) {
  if (!req.has_param(name)) return fallback;
  const auto s = req.get_param_value(name);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::InvalidArgument, std::string("query parameter ") + name + " must be an integer");
  }
  return v;
}

double real_param(const httplib::Request& req, const char* name, double fallback) {
  if (!req.has_param(name)) return fallback;
  const auto s = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::InvalidArgument, std::string("query parameter ") + name + " must be a number");
}

std::optional<std::int64_t> at_param(const httplib::Request& req) {
  if (!req.has_param("at")) return std::nullopt;
  return int_param<std::int64_t>(req, "at", 0);
}

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  const auto threads = service_.config().http_threads;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  const auto route = [this](bool mutation, auto handler) {
    return [this, mutation, handler](const httplib::Request& req, httplib::Response& res) {
      const auto start = std::chrono::steady_clock::now();
      ApiResponse r;
      const auto& token = service_.config().api_token;
      if (mutation && !token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
        r = {401, {{"error", {{"code", "unauthorized"}, {"message", "missing or wrong bearer token"}}}}};
      } else {
        try {
          r = handler(req);
        } catch (const Error& e) {
          r = error_response(e);
        } catch (const std::exception& e) {
          r = {500, {{"error", {{"code", "internal"}, {"message", e.what()}}}}};
        }
      }
      send(res, r);
      service_.record_latency(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    };
  };
  Service& s = service_;

  srv.Post("/videos", route(true, [&s](const auto& req) { return s.post_video(req.body); }));
  srv.Post("/trends", route(true, [&s](const auto& req) { return s.post_trend(req.body); }));
  srv.Get("/trends", route(false, [&s](const auto&) { return s.get_trends(); }));
  srv.Get(R"(/trends/([^/]+))", route(false, [&s](const auto& req) { return s.get_trend(req.matches[1], at_param(req)); }));
  srv.Post(R"(/trends/([^/]+)/seeds)", route(true, [&s](const auto& req) { return s.post_seed(req.matches[1], req.body); }));
  srv.Delete(R"(/trends/([^/]+)/seeds/([^/]+))",
             route(true, [&s](const auto& req) { return s.delete_seed(req.matches[1], req.matches[2], req.body); }));
  srv.Post(R"(/trends/([^/]+)/pause)", route(true, [&s](const auto& req) { return s.pause_trend(req.matches[1], req.body); }));
  srv.Post(R"(/trends/([^/]+)/resume)", route(true, [&s](const auto& req) { return s.resume_trend(req.matches[1], req.body); }));
  srv.Put(R"(/trends/([^/]+)/tiers)", route(true, [&s](const auto& req) { return s.put_tiers(req.matches[1], req.body); }));
  srv.Post(R"(/trends/([^/]+)/feedback-cycle)",
           route(true, [&s](const auto& req) { return s.post_feedback_cycle(req.matches[1], req.body); }));
  srv.Get(R"(/trends/([^/]+)/candidates)", route(false, [&s](const auto& req) {
            return s.get_candidates(req.matches[1], int_param<std::size_t>(req, "k", kDefaultKPerSeed),
                                    int_param<std::size_t>(req, "offset", 0));
          }));
  srv.Get(R"(/trends/([^/]+)/suggestions/cluster)", route(false, [&s](const auto& req) {
            return s.get_cluster_suggestions(req.matches[1], real_param(req, "eps", 0.2),
                                             int_param<std::size_t>(req, "min_pts", 5), int_param<std::size_t>(req, "m", 3),
                                             req.has_param("scope") ? req.get_param_value("scope") : "all");
          }));
  srv.Get(R"(/trends/([^/]+)/suggestions/historical)", route(false, [&s](const auto& req) {
            const auto& fb = s.config().feedback;
            return s.get_historical_suggestions(req.matches[1], at_param(req),
                                                int_param<std::int64_t>(req, "window", fb.window),
                                                real_param(req, "threshold", fb.target_precision),
                                                int_param<std::uint64_t>(req, "min_n", fb.min_n));
          }));
  srv.Post("/feedback", route(true, [&s](const auto& req) { return s.post_feedback(req.body); }));
  srv.Get("/metrics", route(false, [&s](const auto&) { return s.get_metrics(); }));
  srv.Get("/healthz", route(false, [&s](const auto&) { return s.get_health(); }));

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto code = res.status == 404 ? "not_found" : "http_error";
    res.set_content(nlohmann::json{{"error", {{"code", code}, {"message", httplib::status_message(res.status)}}}}.dump(),
                    "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool HttpServer::run() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace ebr
