#pragma once

#include <memory>
#include <string>

#include "spr/service/service.hpp"

namespace httplib {
class Server;
}

namespace spr {

// The /v1 REST surface over a Service.
//
//   POST  /v1/runs                          202 {"run_id"}
//   GET   /v1/runs/{id}                     run record
//   GET   /v1/trees/{ref}                   tree document
//   POST  /v1/runs/{id}/sessions            201 session record
//   PATCH /v1/sessions/{sid}/nodes/{nid}    delta report and new tree ref
//   POST  /v1/sessions/{sid}/commit         named snapshot
//   GET   /v1/runs/{id}/metrics?events=F    metrics report
//
// Errors are {"error": {"code", "message"}} with 400 (schema), 404 (unknown
// id), 409 (wrong state, e.g. editing a run's baseline) or 422 (invalid edit).
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind.
  void listen();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

// HTTP status for an engine error.
int http_status(const Error& error);

}  // namespace spr
