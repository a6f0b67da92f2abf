#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "hintbandit/embedding_store.hpp"
#include "hintbandit/rng.hpp"
#include "hintbandit/session.hpp"
#include "hintbandit/text_normalizer.hpp"

namespace httplib {
class Server;
}

namespace hintbandit {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::filesystem::path embeddings;
  std::filesystem::path frequencies;
  // Both empty selects the builtin normalization tables.
  std::filesystem::path stopwords;
  std::filesystem::path lemmas;
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path static_dir;  // empty disables static serving
  std::int64_t duration_s = 1200;
  std::uint32_t horizon = 20;
  std::size_t hint_size = kDefaultHintSize;
  std::size_t pool_cap = kDefaultPoolCap;

  // Checks values and that every configured input path is readable.
  void validate() const;
};

// Relative paths are resolved against `base_dir`. Unknown keys are an error.
ServiceConfig service_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;

// HINTBANDIT_HOST, HINTBANDIT_PORT, HINTBANDIT_EMBEDDINGS,
// HINTBANDIT_FREQUENCIES, HINTBANDIT_STOPWORDS, HINTBANDIT_LEMMAS,
// HINTBANDIT_CORPUS_DIR and HINTBANDIT_STATIC_DIR override the file.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env = ::getenv);

struct ServiceReply {
  int status = 200;
  std::string body;  // JSON
};

// Transport-independent request handlers plus an httplib mounting. Session
// creation and lookup share one table lock; every operation on a session
// holds that session's own mutex, so requests to one session run one at a
// time in lock order while distinct sessions proceed in parallel.
class SessionService {
 public:
  using Clock = std::function<std::int64_t()>;

  SessionService(ServiceConfig config, std::shared_ptr<const WordStore> store,
                 std::shared_ptr<const TextNormalizer> normalizer = nullptr,
                 Clock clock = {}, std::optional<std::uint64_t> seed_source = {});

  // Until a store is set every session call answers 503.
  void set_store(std::shared_ptr<const WordStore> store);
  bool ready() const;

  ServiceReply create_session(std::string_view body);
  ServiceReply submit_feature(const std::string& id, std::string_view body);
  ServiceReply request_hint(const std::string& id);
  ServiceReply finish(const std::string& id, std::string_view body = {});
  ServiceReply health() const;

  std::filesystem::path corpus_path() const;
  std::size_t open_sessions() const;

  // Routes plus static assets at `/` when a static directory is set.
  void mount(httplib::Server& server);

 private:
  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
    std::shared_ptr<const WordStore> store;  // keeps the store alive
    bool finished = false;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::string new_id();
  std::uint64_t new_seed();

  ServiceConfig config_;
  std::shared_ptr<const WordStore> store_;
  std::shared_ptr<const TextNormalizer> normalizer_;
  Clock clock_;
  mutable std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  Rng id_rng_;
  std::mutex corpus_mutex_;
};

// Loads stores and tables named by the config and serves until stopped.
// `on_ready` receives the bound port.
void run_service(const ServiceConfig& config,
                 const std::function<void(int)>& on_ready = {});

}  // namespace hintbandit
