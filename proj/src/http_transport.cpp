#include <httplib.h>

#include <fmt/format.h>

#include "masvqa/inference.hpp"

namespace masvqa {

namespace {

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base, std::string path, std::string api_key)
      : base_(std::move(base)), path_(std::move(path)), api_key_(std::move(api_key)) {}

  HttpReply post(const std::string& body, std::chrono::milliseconds timeout) override {
    httplib::Client client(base_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw Error(ErrorCode::kTimeout, fmt::format("no response from {}: {}", base_, httplib::to_string(err)));
      }
      throw Error(ErrorCode::kTransport, fmt::format("request to {} failed: {}", base_, httplib::to_string(err)));
    }
    return {res->status, res->body};
  }

 private:
  std::string base_;
  std::string path_;
  std::string api_key_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& endpoint_url, const std::string& api_key) {
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("endpoint '{}' lacks a scheme", endpoint_url));
  }
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  std::string base = endpoint_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/v1/chat/completions" : endpoint_url.substr(path_start);
  return std::make_shared<HttpTransport>(std::move(base), std::move(path), api_key);
}

}  // namespace masvqa
