#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masvqa/error.hpp"
#include "masvqa/prompt.hpp"

namespace masvqa {

struct InferenceConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model_name = "default";
  double temperature = 0.7;
  int max_tokens = 512;
  std::size_t max_in_flight = 16;
  double timeout_seconds = 120.0;
  int retry_count = 3;
  int backoff_initial_ms = 500;
  std::string api_key_env = "MASVQA_API_KEY";
};

void validate(const InferenceConfig& cfg);

struct HttpReply {
  int status = 0;
  std::string body;
};

// One POST of a JSON body. Implementations throw Error(kTimeout) when no
// response arrives in time and Error(kTransport) for other connection
// failures; any HTTP status is returned, not thrown.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& body, std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport for http:// and https:// endpoints.
std::shared_ptr<Transport> make_http_transport(const std::string& endpoint_url,
                                               const std::string& api_key = {});

// Chat-completions request: one user turn whose content interleaves text
// parts with inline base64 image parts at each <image> placeholder.
std::string build_request_body(const PromptBundle& bundle, const InferenceConfig& cfg);

// Reads choices[0].message.content (string or list of text parts), falling
// back to choices[0].text. Throws Error(kMalformedResponse).
std::string parse_completion(const std::string& body);

struct CompletionResult {
  std::optional<std::string> text;
  std::optional<Error> error;

  bool ok() const { return text.has_value(); }
};

class ChatClient {
 public:
  ChatClient(InferenceConfig cfg, std::shared_ptr<Transport> transport);

  // Convenience: HTTP transport for cfg.endpoint_url, API key from the
  // environment variable named by cfg.api_key_env.
  explicit ChatClient(InferenceConfig cfg);

  const InferenceConfig& config() const { return cfg_; }

  // Blocking. Retries timeouts, connection failures, malformed replies and
  // 5xx/408/429 statuses up to retry_count times with exponential backoff,
  // then rethrows the last error. Other 4xx statuses fail immediately.
  std::string complete(const PromptBundle& bundle) const;

  // At most max_in_flight requests outstanding; results keep input order and
  // failures stay per item.
  std::vector<CompletionResult> complete_many(std::span<const PromptBundle> bundles) const;

 private:
  InferenceConfig cfg_;
  std::shared_ptr<Transport> transport_;
};

}  // namespace masvqa
