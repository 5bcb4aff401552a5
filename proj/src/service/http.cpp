#include "spr/service/http.hpp"

#include <httplib.h>

#include "spr/core/document.hpp"

namespace spr {

using nlohmann::json;

int http_status(const Error& error) {
  if (dynamic_cast<const ConflictError*>(&error)) return 409;
  switch (error.code()) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ParseError: return 400;
    case ErrorCode::ConstraintViolation: return 409;
    case ErrorCode::InvalidInput:
    case ErrorCode::IdConflict:
    case ErrorCode::CoefficientError:
    case ErrorCode::InvalidSpec: return 422;
    case ErrorCode::AgentExhausted:
    case ErrorCode::Transport:
    case ErrorCode::RunFailed:
    case ErrorCode::MissingPayload:
    case ErrorCode::PayloadSyntax: return 502;
    default: return 500;
  }
}

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(canonical_dump(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send(res, status, {{"error", {{"code", std::string(code)}, {"message", message}}}});
}

json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty() && allow_empty) return json();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::SchemaMismatch, "request body is not valid JSON");
  return body;
}

// Runs `handler`, translating engine errors into the error envelope.
template <typename F>
httplib::Server::Handler guarded(F handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

}  // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  Service& svc = service_;

  s.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
          send(res, 200, {{"status", "ok"}});
        }));
  s.Post("/v1/runs", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           send(res, 202, {{"run_id", svc.submit_run(parse_body(req, false))}});
         }));
  s.Get(R"(/v1/runs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          send(res, 200, svc.run_record(req.matches[1]));
        }));
  s.Get(R"(/v1/runs/([^/]+)/metrics)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          send(res, 200, svc.run_metrics(req.matches[1], req.get_param_value("events")));
        }));
  s.Post(R"(/v1/runs/([^/]+)/sessions)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           send(res, 201, svc.open_session(req.matches[1]));
         }));
  // The baseline of a run is immutable; edits go through a session.
  s.Patch(R"(/v1/runs/([^/]+)/nodes/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response&) {
            svc.run_record(req.matches[1]);
            throw ConflictError("run baselines are read-only; open a session to edit");
          }));
  s.Get(R"(/v1/trees/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          res.status = 200;
          res.set_content(svc.tree_document(req.matches[1]), "application/json");
        }));
  s.Get(R"(/v1/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          send(res, 200, svc.session_record(req.matches[1]));
        }));
  s.Patch(R"(/v1/sessions/([^/]+)/nodes/([^/]+))",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, svc.patch_node(req.matches[1], req.matches[2], parse_body(req, false)));
          }));
  s.Post(R"(/v1/sessions/([^/]+)/commit)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           send(res, 201, svc.commit_session(req.matches[1], parse_body(req, true)));
         }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace spr
