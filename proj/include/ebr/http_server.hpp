#pragma once

// HTTP/1.1 routes over a Service. JSON in and out.

#include <memory>
#include <string>
#include <utility>

#include "ebr/service.hpp"

namespace httplib {
class Server;
}

namespace ebr {

// "host:port" -> (host, port). Throws InvalidConfig.
std::pair<std::string, int> split_listen_addr(const std::string& addr);

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port. Throws IoError.
  int bind(const std::string& host, int port);
  // Serves until stop(). Returns false if the listener failed.
  bool run();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ebr
