#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hintbandit/simulant.hpp"

namespace hintbandit {

struct LlmConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  double temperature = 1.0;
  int max_tokens = 2048;
  // Name of the environment variable holding the API key. The key itself is
  // never stored in a config, record or log line.
  std::string credential_env = "OPENAI_API_KEY";
  double timeout_s = 120.0;
  std::size_t max_retries = 2;
  std::size_t max_turns = 30;

  void validate() const;
};

// Missing keys keep their defaults; throws Error on bad values.
LlmConfig llm_config_from_json(const nlohmann::json& j);
LlmConfig load_llm_config(const std::filesystem::path& path);

struct Endpoint {
  std::string scheme;  // http | https
  std::string host;
  int port = 0;
  std::string path;
};
Endpoint parse_endpoint(std::string_view url);

std::string chat_request_body(const LlmConfig& config, const std::vector<ChatMessage>& messages);
// choices[0].message.content; throws SchemaError.
std::string chat_reply_content(std::string_view body);

// Chat-completions client over HTTP(S). Transport failures and 5xx/429
// replies are retried up to max_retries times; replies are cached per turn
// so a repeated call for the same turn never produces a second answer.
class HttpChatClient : public ChatClient {
 public:
  // Reads the credential from the environment; throws Error when it is
  // missing or malformed.
  explicit HttpChatClient(LlmConfig config);

  std::string complete(const std::vector<ChatMessage>& messages, std::size_t turn) override;

  std::size_t requests_sent() const { return requests_sent_; }
  const LlmConfig& config() const { return config_; }

 private:
  LlmConfig config_;
  Endpoint endpoint_;
  std::string credential_;
  std::mutex mutex_;
  std::map<std::size_t, std::string> replies_;
  std::size_t requests_sent_ = 0;
};

}  // namespace hintbandit
