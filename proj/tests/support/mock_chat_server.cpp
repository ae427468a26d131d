#include "mock_chat_server.hpp"

#include <chrono>
#include <mutex>
#include <stdexcept>

#include <httplib.h>

namespace testsupport {

std::string chat_reply(std::string_view text) {
  nlohmann::json body = {
      {"id", "mock"},
      {"object", "chat.completion"},
      {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", std::string(text)}}}}}}};
  return body.dump();
}

struct MockChatServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mu;
  std::string authorization;
};

MockChatServer::MockChatServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  // Enough workers that the server never becomes the concurrency bottleneck.
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(64); };
  impl_->server.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
    const int index = requests_++;
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    {
      std::lock_guard lock(impl_->mu);
      impl_->authorization = req.get_header_value("Authorization");
    }
    MockReply reply;
    try {
      reply = handler(nlohmann::json::parse(req.body), index);
    } catch (const std::exception& e) {
      reply = {400, e.what(), 0};
    }
    if (reply.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(reply.delay_ms));
    --in_flight_;
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("mock server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockChatServer::~MockChatServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockChatServer::url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1/chat/completions";
}

std::string MockChatServer::last_authorization() const {
  std::lock_guard lock(impl_->mu);
  return impl_->authorization;
}

}  // namespace testsupport
