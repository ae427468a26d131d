#include "masvqa/inference.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "masvqa/bounded.hpp"
#include "masvqa/digest.hpp"

namespace masvqa {

namespace {

using json = nlohmann::json;

std::string text_of_content(const json& content) {
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
          part["text"].is_string()) {
        out += part["text"].get<std::string>();
      }
    }
    return out;
  }
  throw Error(ErrorCode::kMalformedResponse, "message content is neither text nor a list of parts");
}

}  // namespace

void validate(const InferenceConfig& cfg) {
  if (!(cfg.temperature >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (cfg.max_in_flight < 1) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  if (cfg.max_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  if (cfg.retry_count < 0) throw Error(ErrorCode::kInvalidArgument, "retry_count must be >= 0");
  if (!(cfg.timeout_seconds > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be positive");
  if (cfg.backoff_initial_ms < 0) throw Error(ErrorCode::kInvalidArgument, "backoff must be >= 0");
}

std::string build_request_body(const PromptBundle& bundle, const InferenceConfig& cfg) {
  json content = json::array();
  std::string_view rest = bundle.text;
  std::size_t image_index = 0;
  while (true) {
    const auto at = rest.find(kImagePlaceholder);
    const std::string_view text = rest.substr(0, at);
    if (!text.empty()) content.push_back({{"type", "text"}, {"text", text}});
    if (at == std::string_view::npos) break;
    if (image_index >= bundle.images.size()) {
      throw Error(ErrorCode::kInvalidArgument, "prompt has more image placeholders than images");
    }
    const ImageRef& img = bundle.images[image_index++];
    if (img.bytes.empty()) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("image slot {} is empty", image_index));
    }
    content.push_back({{"type", "image"},
                       {"mime_type", img.mime_type},
                       {"data_base64", base64_encode(img.bytes)}});
    rest.remove_prefix(at + kImagePlaceholder.size());
  }
  if (image_index != bundle.images.size()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt must contain exactly two image placeholders");
  }
  json body = {
      {"model", cfg.model_name},
      {"temperature", bundle.generation.temperature},
      {"max_tokens", bundle.generation.max_tokens},
      {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})},
  };
  return body.dump();
}

std::string parse_completion(const std::string& body) {
  json reply;
  try {
    reply = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, fmt::format("response is not JSON: {}", e.what()));
  }
  try {
    const json& choice = reply.at("choices").at(0);
    if (choice.contains("message")) return text_of_content(choice.at("message").at("content"));
    return choice.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, fmt::format("unexpected response shape: {}", e.what()));
  }
}

ChatClient::ChatClient(InferenceConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  validate(cfg_);
  if (!transport_) throw Error(ErrorCode::kInvalidArgument, "transport is required");
}

ChatClient::ChatClient(InferenceConfig cfg)
    : ChatClient(cfg, [&] {
        const char* key = cfg.api_key_env.empty() ? nullptr : std::getenv(cfg.api_key_env.c_str());
        return make_http_transport(cfg.endpoint_url, key ? key : "");
      }()) {}

std::string ChatClient::complete(const PromptBundle& bundle) const {
  const std::string body = build_request_body(bundle, cfg_);
  const std::string hash = bundle.hash();
  const auto timeout = std::chrono::milliseconds(static_cast<long>(std::llround(cfg_.timeout_seconds * 1000.0)));

  for (int attempt = 0;; ++attempt) {
    bool retryable_status = true;
    try {
      spdlog::debug("request prompt={} attempt={} bytes={}", hash.substr(0, 12), attempt + 1, body.size());
      const HttpReply reply = transport_->post(body, timeout);
      if (reply.status < 200 || reply.status >= 300) {
        retryable_status = reply.status >= 500 || reply.status == 408 || reply.status == 429;
        throw Error(ErrorCode::kHttpStatus, fmt::format("HTTP status {}", reply.status));
      }
      std::string text = parse_completion(reply.body);
      spdlog::debug("response prompt={} chars={}", hash.substr(0, 12), text.size());
      return text;
    } catch (const Error& e) {
      const bool retryable = e.code() == ErrorCode::kTimeout ||
                             (e.code() == ErrorCode::kHttpStatus && retryable_status) ||
                             e.code() == ErrorCode::kMalformedResponse || e.code() == ErrorCode::kTransport;
      if (!retryable || attempt >= cfg_.retry_count) {
        spdlog::warn("prompt={} failed after {} attempt(s): {}", hash.substr(0, 12), attempt + 1, e.what());
        throw;
      }
      const auto delay = std::chrono::milliseconds(static_cast<long>(cfg_.backoff_initial_ms) << std::min(attempt, 16));
      spdlog::debug("prompt={} retrying in {} ms: {}", hash.substr(0, 12), delay.count(), e.what());
      std::this_thread::sleep_for(delay);
    }
  }
}

std::vector<CompletionResult> ChatClient::complete_many(std::span<const PromptBundle> bundles) const {
  std::vector<CompletionResult> results(bundles.size());
  bounded_for_each(bundles.size(), cfg_.max_in_flight, [&](std::size_t i) {
    try {
      results[i].text = complete(bundles[i]);
    } catch (const Error& e) {
      results[i].error = e;
    } catch (const std::exception& e) {
      results[i].error = Error(ErrorCode::kTransport, e.what());
    }
  });
  return results;
}

}  // namespace masvqa
