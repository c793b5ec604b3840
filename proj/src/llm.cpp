#include "lsdb/llm.hpp"

#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "lsdb/error.hpp"

namespace lsdb {

namespace http {

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::runtime_error("endpoint URL has no scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw std::runtime_error("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  if (path_start == std::string::npos) {
    e.scheme_host_port = url;
    e.path = "/";
  } else {
    e.scheme_host_port = url.substr(0, path_start);
    e.path = url.substr(path_start);
  }
  if (e.scheme_host_port.size() <= scheme_end + 3) throw std::runtime_error("endpoint URL has no host: " + url);
  return e;
}

std::string post_json(const std::string& url, const std::string& body, const std::string& api_key,
                      int timeout_ms) {
  const Endpoint e = split_url(url);
  httplib::Client client(e.scheme_host_port);
  const auto sec = timeout_ms / 1000;
  const auto usec = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(e.path, headers, body, "application/json");
  if (!res) throw std::runtime_error("request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw std::runtime_error("request to " + url + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

} // namespace http

HttpLlmProvider::HttpLlmProvider(ProviderConfig config) : config_(std::move(config)) {}

std::string HttpLlmProvider::complete(const LlmRequest& request) {
  if (config_.endpoint.empty()) throw Error(ErrorCode::GeneratorUnavailable, "no provider endpoint configured");
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  std::string reply;
  try {
    reply = http::post_json(config_.endpoint, body.dump(), config_.api_key, config_.timeout_ms);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GeneratorUnavailable, e.what());
  }
  try {
    auto j = nlohmann::json::parse(reply);
    if (j.contains("text")) return j.at("text").get<std::string>();
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GeneratorUnavailable, std::string("unexpected provider reply: ") + e.what());
  }
}

std::string user_text(const LlmRequest& request) {
  std::string out;
  for (const auto& m : request.messages) {
    if (m.role != "user") continue;
    if (!out.empty()) out += "\n";
    out += m.content;
  }
  return out;
}

} // namespace lsdb
