#include "hintbandit/llm_client.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

#include "httplib.h"

#include "hintbandit/errors.hpp"

namespace hintbandit {

void LlmConfig::validate() const {
  parse_endpoint(endpoint);
  if (model.empty()) throw Error("llm model must be set");
  if (!(temperature >= 0.0)) throw Error("temperature must be >= 0");
  if (max_tokens <= 0) throw Error("max_tokens must be positive");
  if (credential_env.empty()) throw Error("credential_env must name a variable");
  if (!(timeout_s > 0.0)) throw Error("timeout must be positive");
  if (max_turns == 0) throw Error("max_turns must be positive");
}

LlmConfig llm_config_from_json(const nlohmann::json& j) {
  LlmConfig c;
  try {
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.credential_env = j.value("credential_env", c.credential_env);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.max_turns = j.value("max_turns", c.max_turns);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad llm config: ") + e.what());
  }
  c.validate();
  return c;
}

LlmConfig load_llm_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open llm config: " + path.string());
  try {
    return llm_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("llm config is not JSON: ") + e.what(), 0);
  }
}

Endpoint parse_endpoint(std::string_view url) {
  Endpoint e;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) throw Error("endpoint needs a scheme");
  e.scheme = std::string(url.substr(0, sep));
  if (e.scheme != "http" && e.scheme != "https") throw Error("endpoint scheme must be http(s)");
  auto rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  e.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const auto port = authority.substr(colon + 1);
    if (port.empty() || port.size() > 5) throw Error("bad endpoint port");
    e.port = 0;
    for (char ch : port) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) throw Error("bad endpoint port");
      e.port = e.port * 10 + (ch - '0');
    }
    if (e.port == 0 || e.port > 65535) throw Error("bad endpoint port");
    authority = authority.substr(0, colon);
  } else {
    e.port = e.scheme == "https" ? 443 : 80;
  }
  if (authority.empty()) throw Error("endpoint needs a host");
  e.host = std::string(authority);
  return e;
}

std::string chat_request_body(const LlmConfig& config, const std::vector<ChatMessage>& messages) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return body.dump();
}

std::string chat_reply_content(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("unexpected chat completion reply: ") + e.what());
  }
}

HttpChatClient::HttpChatClient(LlmConfig config)
    : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {
  config_.validate();
  const char* key = std::getenv(config_.credential_env.c_str());
  if (!key || !*key) throw Error("credential variable " + config_.credential_env + " is not set");
  credential_ = key;
  for (unsigned char ch : credential_) {
    if (ch <= 0x20 || ch >= 0x7f) {
      credential_.clear();
      throw Error("credential in " + config_.credential_env + " is malformed");
    }
  }
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages, std::size_t turn) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (auto it = replies_.find(turn); it != replies_.end()) return it->second;

  const std::string body = chat_request_body(config_, messages);
  const httplib::Headers headers = {{"Authorization", "Bearer " + credential_}};
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - double(secs)) * 1e6);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    const std::string base = endpoint_.scheme + "://" + endpoint_.host + ":" +
                             std::to_string(endpoint_.port);
    httplib::Client client(base);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    ++requests_sent_;
    auto res = client.Post(endpoint_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "server replied " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      // Client errors will not improve on retry.
      throw IoError("chat endpoint replied " + std::to_string(res->status));
    }
    std::string content = chat_reply_content(res->body);
    replies_.emplace(turn, content);
    return content;
  }
  throw IoError("chat request failed after retries: " + last_error);
}

}  // namespace hintbandit
