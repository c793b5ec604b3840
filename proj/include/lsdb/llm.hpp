#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lsdb {

/// Provider protocol shared by the generator, the query rewriter and the
/// external entity extractor: role-tagged text segments in, text out.
struct LlmMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct LlmRequest {
  std::vector<LlmMessage> messages;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  /// Throws GeneratorUnavailable when the backend cannot answer.
  virtual std::string complete(const LlmRequest& request) = 0;
};

struct ProviderConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string model;
  std::string api_key;
  int timeout_ms = 30000;
};

/// POSTs {"model", "messages": [{role, content}]} as JSON and accepts either
/// {"text": ...} or an OpenAI-style {"choices": [{"message": {"content": ...}}]}.
class HttpLlmProvider final : public LlmProvider {
 public:
  explicit HttpLlmProvider(ProviderConfig config);
  std::string complete(const LlmRequest& request) override;

 private:
  ProviderConfig config_;
};

/// Wraps a callable; used for scripted providers in tests and tooling.
class FunctionProvider final : public LlmProvider {
 public:
  explicit FunctionProvider(std::function<std::string(const LlmRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const LlmRequest& request) override { return fn_(request); }

 private:
  std::function<std::string(const LlmRequest&)> fn_;
};

/// Concatenated user-role content of a request.
std::string user_text(const LlmRequest& request);

namespace http {
struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};
/// Splits "http://host:port/path" into the client address and the path.
Endpoint split_url(const std::string& url);

/// POSTs a JSON body with an optional bearer token; returns the response body.
/// Throws std::runtime_error on transport failure or non-2xx status.
std::string post_json(const std::string& url, const std::string& body, const std::string& api_key,
                      int timeout_ms);
} // namespace http

} // namespace lsdb
