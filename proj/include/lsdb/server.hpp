#pragma once

#include <functional>
#include <memory>
#include <string>

#include "lsdb/app.hpp"

namespace httplib {
class Server;
}

namespace lsdb {

/// HTTP front end over an Engine:
///   POST /query  {"query", "filter"?}  -> same payload as `query --format json`
///   POST /ask    {"query", "filter"?}  -> same payload as `ask --format json`
///   GET  /articles/{id}                -> article record
///   GET  /stats                        -> corpus statistics
/// Errors: 400 malformed request, 404 unknown article, 409 stale index.
class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<const Engine> engine);
  ~ApiServer();

  /// Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  std::shared_ptr<const Engine> engine_;
  std::unique_ptr<httplib::Server> server_;
};

} // namespace lsdb
