#include "alchemy/chat_client.hpp"

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "alchemy/error.hpp"

namespace alchemy {

// Caps in-flight requests across every session sharing this client.
struct ChatClient::Gate {
  std::mutex mu;
  std::condition_variable cv;
  int available;
  explicit Gate(int n) : available(n < 1 ? 1 : n) {}
  void acquire() {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard lock(mu);
      ++available;
    }
    cv.notify_one();
  }
};

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix, no trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  return ep;
}

}  // namespace

ChatClient::ChatClient(ChatClientConfig config)
    : config_(std::move(config)), gate_(std::make_unique<Gate>(config_.max_concurrent)) {}

ChatClient::~ChatClient() = default;

ChatReply ChatClient::complete(const std::vector<ChatMessage>& messages, double temperature) {
  const Endpoint ep = split_url(config_.base_url);
  nlohmann::json body{{"model", config_.model}, {"temperature", temperature}, {"messages", nlohmann::json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error = "no attempt made";
  const int attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    gate_->acquire();
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      httplib::Client cli(ep.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      res = cli.Post(ep.path + "/chat/completions", headers, payload, "application/json");
    }
    gate_->release();

    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status >= 400) {
      throw TransportError("chat endpoint rejected request: HTTP " + std::to_string(res->status) + " " + res->body);
    } else {
      try {
        ChatReply reply;
        reply.raw = nlohmann::json::parse(res->body);
        const auto& message = reply.raw.at("choices").at(0).at("message");
        reply.content = message.value("content", std::string{});
        if (message.contains("reasoning_content") && message["reasoning_content"].is_string()) {
          reply.reasoning = message["reasoning_content"].get<std::string>();
        }
        if (reply.raw.contains("usage") && reply.raw["usage"].is_object()) {
          const auto& usage = reply.raw["usage"];
          if (usage.contains("prompt_tokens")) reply.prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
          if (usage.contains("completion_tokens"))
            reply.completion_tokens = usage["completion_tokens"].get<std::int64_t>();
        }
        reply.attempts = attempt;
        return reply;
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    if (attempt < attempts) std::this_thread::sleep_for(config_.retry_backoff * attempt);
  }
  throw TransportError("chat request failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace alchemy
