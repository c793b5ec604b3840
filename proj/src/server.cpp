#include "lsdb/server.hpp"

#include "httplib.h"

#include "lsdb/error.hpp"
#include "lsdb/json_io.hpp"

namespace lsdb {

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownArticle:
      return 404;
    case ErrorCode::StaleIndex:
    case ErrorCode::StoreLocked:
      return 409;
    case ErrorCode::EmptyQuery:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidWeights:
    case ErrorCode::DimensionMismatch:
      return 400;
    case ErrorCode::GeneratorUnavailable:
    case ErrorCode::RewriterUnavailable:
    case ErrorCode::EmbedderUnavailable:
      return 502;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(dump_payload(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, Json{{"error", code}, {"message", message}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Internal", e.what());
  }
}

struct QueryRequest {
  std::string query;
  std::string filter;
};

// Empty optional means the response was already filled with a 400.
std::optional<QueryRequest> parse_request(const httplib::Request& req, httplib::Response& res) {
  Json body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    send_error(res, 400, "MalformedRequest", "request body must be a JSON object");
    return std::nullopt;
  }
  auto q = body.find("query");
  if (q == body.end() || !q->is_string()) {
    send_error(res, 400, "MalformedRequest", "field 'query' must be a string");
    return std::nullopt;
  }
  QueryRequest out{q->get<std::string>(), {}};
  if (auto f = body.find("filter"); f != body.end() && !f->is_null()) {
    if (!f->is_string()) {
      send_error(res, 400, "MalformedRequest", "field 'filter' must be a string");
      return std::nullopt;
    }
    out.filter = f->get<std::string>();
  }
  return out;
}

} // namespace

ApiServer::ApiServer(std::shared_ptr<const Engine> engine)
    : engine_(std::move(engine)), server_(std::make_unique<httplib::Server>()) {
  auto engine_ref = engine_;
  server_->Post("/query", [engine_ref](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (auto r = parse_request(req, res)) send_json(res, 200, engine_ref->query_payload(r->query, r->filter));
    });
  });
  server_->Post("/ask", [engine_ref](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (auto r = parse_request(req, res)) send_json(res, 200, engine_ref->ask_payload(r->query, r->filter));
    });
  });
  server_->Get(R"(/articles/([^/]+))", [engine_ref](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      for (const auto& a : engine_ref->records().articles) {
        if (a.meta.article_id == id) {
          send_json(res, 200, Json(a));
          return;
        }
      }
      throw Error(ErrorCode::UnknownArticle, "unknown article " + id);
    });
  });
  server_->Get("/stats", [engine_ref](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, Json(compute_corpus_stats(engine_ref->records()))); });
  });
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "HttpError", httplib::status_message(res.status));
  });
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() { server_->stop(); }

} // namespace lsdb
