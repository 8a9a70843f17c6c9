#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace alchemy {

// Chat-completions transport. Request body:
//   {"model": str, "temperature": num, "messages": [{"role": "system"|"user", "content": str}, ...]}
// sent as POST {base_url}/chat/completions with "Authorization: Bearer $<api_key_env>"
// when that variable is set. Response fields read:
//   choices[0].message.content, choices[0].message.reasoning_content (optional),
//   usage.prompt_tokens, usage.completion_tokens (optional).
struct ChatClientConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds retry_backoff{250};
  int max_concurrent = 4;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatReply {
  std::string content;
  std::optional<std::string> reasoning;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  int attempts = 0;
  nlohmann::json raw;
};

class ChatClient {
 public:
  explicit ChatClient(ChatClientConfig config);
  ~ChatClient();
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  const ChatClientConfig& config() const { return config_; }

  // Retries connection failures, HTTP 429 and 5xx up to max_retries, then
  // throws TransportError. Other 4xx responses fail immediately.
  ChatReply complete(const std::vector<ChatMessage>& messages, double temperature);

 private:
  struct Gate;
  ChatClientConfig config_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace alchemy
