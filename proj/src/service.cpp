#include "hintbandit/service.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>

#include "httplib.h"

#include "hintbandit/errors.hpp"
#include "hintbandit/record_io.hpp"

namespace hintbandit {

namespace {

// Seeds stay exact when a browser reads them as JavaScript numbers.
constexpr std::uint64_t kMaxSafeSeed = (std::uint64_t(1) << 53) - 1;

void require_readable(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string(what) + " is not readable: " + path.string());
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::string error_body(std::string_view message) {
  return nlohmann::json{{"error", message}}.dump();
}

ServiceReply error_reply(int status, std::string_view message) {
  return {status, error_body(message)};
}

ServiceReply json_reply(int status, const Json& body) { return {status, body.dump()}; }

nlohmann::json parse_object(std::string_view body, bool allow_empty) {
  if (allow_empty && body.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    return nlohmann::json::object();
  }
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw SchemaError("body is not valid UTF-8 JSON");
  if (!j.is_object()) throw SchemaError("body must be a JSON object");
  return j;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw SchemaError("unknown field '" + key + "'");
  }
}

std::string required_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw SchemaError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::int64_t system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

void ServiceConfig::validate() const {
  if (host.empty()) throw Error("host must be set");
  if (port < 0 || port > 65535) throw Error("port must be in 0..65535");
  if (embeddings.empty()) throw Error("embeddings path must be set");
  if (frequencies.empty()) throw Error("frequencies path must be set");
  require_readable(embeddings, "embeddings file");
  require_readable(frequencies, "frequency file");
  if (stopwords.empty() != lemmas.empty()) {
    throw Error("stopwords and lemmas must be given together");
  }
  if (!stopwords.empty()) {
    require_readable(stopwords, "stopword file");
    require_readable(lemmas, "lemma file");
  }
  if (corpus_dir.empty()) throw Error("corpus directory must be set");
  if (!static_dir.empty() && !std::filesystem::is_directory(static_dir)) {
    throw IoError("static directory does not exist: " + static_dir.string());
  }
  if (duration_s <= 0) throw Error("session duration must be positive");
  if (horizon == 0) throw Error("horizon must be positive");
  if (hint_size == 0) throw Error("hint size must be positive");
  if (pool_cap == 0) throw Error("pool cap must be positive");
}

ServiceConfig service_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  ServiceConfig c;
  try {
    if (!j.is_object()) throw SchemaError("service config must be a JSON object");
    reject_unknown(j, {"host", "port", "embeddings", "frequencies", "stopwords", "lemmas",
                       "corpus_dir", "static_dir", "session"});
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.embeddings = resolve(base_dir, j.value("embeddings", std::string()));
    c.frequencies = resolve(base_dir, j.value("frequencies", std::string()));
    c.stopwords = resolve(base_dir, j.value("stopwords", std::string()));
    c.lemmas = resolve(base_dir, j.value("lemmas", std::string()));
    c.corpus_dir = resolve(base_dir, j.value("corpus_dir", c.corpus_dir.string()));
    c.static_dir = resolve(base_dir, j.value("static_dir", std::string()));
    if (auto it = j.find("session"); it != j.end()) {
      const auto& s = *it;
      if (!s.is_object()) throw SchemaError("'session' must be an object");
      reject_unknown(s, {"duration_s", "horizon", "hint_size", "pool_cap"});
      c.duration_s = s.value("duration_s", c.duration_s);
      c.horizon = s.value("horizon", c.horizon);
      c.hint_size = s.value("hint_size", c.hint_size);
      c.pool_cap = s.value("pool_cap", c.pool_cap);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad service config: ") + e.what());
  }
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config: " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("service config is not JSON: " + path.string());
  return service_config_from_json(j, path.parent_path());
}

void apply_env_overrides(ServiceConfig& config, const EnvLookup& env) {
  auto get = [&](const char* name) -> std::optional<std::string> {
    const char* v = env(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("HINTBANDIT_HOST")) config.host = *v;
  if (auto v = get("HINTBANDIT_PORT")) {
    int port = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), port);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      throw Error("HINTBANDIT_PORT is not a number");
    }
    config.port = port;
  }
  if (auto v = get("HINTBANDIT_EMBEDDINGS")) config.embeddings = *v;
  if (auto v = get("HINTBANDIT_FREQUENCIES")) config.frequencies = *v;
  if (auto v = get("HINTBANDIT_STOPWORDS")) config.stopwords = *v;
  if (auto v = get("HINTBANDIT_LEMMAS")) config.lemmas = *v;
  if (auto v = get("HINTBANDIT_CORPUS_DIR")) config.corpus_dir = *v;
  if (auto v = get("HINTBANDIT_STATIC_DIR")) config.static_dir = *v;
}

SessionService::SessionService(ServiceConfig config, std::shared_ptr<const WordStore> store,
                               std::shared_ptr<const TextNormalizer> normalizer, Clock clock,
                               std::optional<std::uint64_t> seed_source)
    : config_(std::move(config)),
      store_(std::move(store)),
      normalizer_(std::move(normalizer)),
      clock_(clock ? std::move(clock) : Clock(system_now_ms)),
      id_rng_(seed_source ? *seed_source
                          : (std::uint64_t(std::random_device{}()) << 32) ^
                                std::random_device{}()) {
  if (!normalizer_) {
    normalizer_ = std::shared_ptr<const TextNormalizer>(&TextNormalizer::builtin(),
                                                        [](const TextNormalizer*) {});
  }
}

void SessionService::set_store(std::shared_ptr<const WordStore> store) {
  std::lock_guard lock(table_mutex_);
  store_ = std::move(store);
}

bool SessionService::ready() const {
  std::lock_guard lock(table_mutex_);
  return store_ != nullptr;
}

std::filesystem::path SessionService::corpus_path() const {
  return config_.corpus_dir / "records.jsonl";
}

std::size_t SessionService::open_sessions() const {
  std::lock_guard lock(table_mutex_);
  std::size_t n = 0;
  for (const auto& [id, e] : sessions_) n += e->finished ? 0 : 1;
  return n;
}

std::string SessionService::new_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  for (;;) {
    std::uint64_t v = id_rng_.next_u64();
    std::string id(16, '0');
    for (auto& ch : id) {
      ch = kHex[v & 15];
      v >>= 4;
    }
    if (!sessions_.contains(id)) return id;
  }
}

std::uint64_t SessionService::new_seed() { return id_rng_.next_u64() & kMaxSafeSeed; }

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::lock_guard lock(table_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

ServiceReply SessionService::health() const {
  if (!ready()) return error_reply(503, "stores not loaded");
  return json_reply(200, Json{{"status", "ok"}, {"open_sessions", open_sessions()}});
}

ServiceReply SessionService::create_session(std::string_view body) {
  SessionConfig c;
  std::optional<std::uint64_t> seed;
  try {
    auto j = parse_object(body, false);
    reject_unknown(j, {"participant_id", "concept", "condition", "seed", "block", "practice",
                       "duration_s"});
    c.participant_id = required_string(j, "participant_id");
    if (c.participant_id.empty()) throw SchemaError("participant_id must be nonempty");
    c.concept_word = fold_case(required_string(j, "concept"));
    c.condition = condition_from_string(required_string(j, "condition"));
    if (auto it = j.find("seed"); it != j.end()) {
      if (!it->is_number_unsigned() || it->get<std::uint64_t>() > kMaxSafeSeed) {
        throw SchemaError("seed must be an integer in [0, 2^53)");
      }
      seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("block"); it != j.end()) {
      if (!it->is_number_integer()) throw SchemaError("block must be an integer");
      c.block = it->get<int>();
    }
    if (auto it = j.find("practice"); it != j.end()) {
      if (!it->is_boolean()) throw SchemaError("practice must be a boolean");
      c.practice = it->get<bool>();
    }
    c.duration_s = config_.duration_s;
    if (auto it = j.find("duration_s"); it != j.end()) {
      if (!it->is_number_integer()) throw SchemaError("duration_s must be an integer");
      c.duration_s = it->get<std::int64_t>();
    }
    c.horizon = config_.horizon;
    c.hint_size = config_.hint_size;
    c.pool_cap = config_.pool_cap;
    c.source = "human";
    c.validate();
  } catch (const Error& e) {
    return error_reply(400, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, e.what());
  }

  std::lock_guard lock(table_mutex_);
  if (!store_) return error_reply(503, "stores not loaded");
  if (!store_->space.contains(c.concept_word)) {
    return error_reply(400, "concept is not in the vocabulary: " + c.concept_word);
  }
  c.seed = seed ? *seed : new_seed();
  c.start_ms = clock_();
  auto entry = std::make_shared<Entry>();
  entry->store = store_;
  entry->session = std::make_unique<Session>(c, *entry->store, *normalizer_);
  const std::string id = new_id();
  sessions_.emplace(id, entry);
  return json_reply(201, Json{{"session_id", id}, {"config", to_json(c)}});
}

ServiceReply SessionService::submit_feature(const std::string& id, std::string_view body) {
  if (!ready()) return error_reply(503, "stores not loaded");
  auto entry = find(id);
  if (!entry) return error_reply(404, "unknown session");
  std::string phrase;
  try {
    auto j = parse_object(body, false);
    reject_unknown(j, {"phrase"});
    phrase = required_string(j, "phrase");
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  std::lock_guard lock(entry->mutex);
  if (entry->finished) return error_reply(409, "session is closed");
  try {
    Json event = to_json(entry->session->submit_feature(phrase, clock_()));
    event["is_duplicate"] = event["duplicate"];
    return json_reply(200, event);
  } catch (const StateError& e) {
    return error_reply(409, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
}

ServiceReply SessionService::request_hint(const std::string& id) {
  if (!ready()) return error_reply(503, "stores not loaded");
  auto entry = find(id);
  if (!entry) return error_reply(404, "unknown session");
  std::lock_guard lock(entry->mutex);
  if (entry->finished) return error_reply(409, "session is closed");
  try {
    return json_reply(200, to_json(entry->session->request_hint(clock_())));
  } catch (const StateError& e) {
    return error_reply(409, e.what());
  } catch (const ArmUnavailable& e) {
    return error_reply(409, e.what());
  }
}

ServiceReply SessionService::finish(const std::string& id, std::string_view body) {
  if (!ready()) return error_reply(503, "stores not loaded");
  auto entry = find(id);
  if (!entry) return error_reply(404, "unknown session");
  std::optional<std::string> reason;
  try {
    auto j = parse_object(body, true);
    reject_unknown(j, {"reason"});
    if (j.contains("reason")) {
      reason = required_string(j, "reason");
      static const std::set<std::string> kAllowed = {"finished", "time_up", "gave_up"};
      if (!kAllowed.contains(*reason)) throw SchemaError("unknown end reason: " + *reason);
    }
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  std::lock_guard lock(entry->mutex);
  if (entry->finished) return error_reply(409, "session already finished");
  const auto now = clock_();
  if (!reason) reason = entry->session->is_expired(now) ? "time_up" : "finished";
  SessionRecord record;
  try {
    record = entry->session->finalize(now, *reason);
  } catch (const StateError& e) {
    return error_reply(409, e.what());
  }
  entry->finished = true;
  try {
    std::lock_guard corpus_lock(corpus_mutex_);
    std::filesystem::create_directories(config_.corpus_dir);
    append_record(corpus_path(), record);
  } catch (const std::exception& e) {
    return error_reply(500, std::string("record not persisted: ") + e.what());
  }
  // Drop the engine; the entry stays so a repeated finish answers 409.
  entry->session.reset();
  return {200, dump_record(record)};
}

void SessionService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json; charset=utf-8");
  };
  server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Post(R"(/sessions/([0-9a-f]+)/features)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, submit_feature(req.matches[1], req.body));
              });
  server.Post(R"(/sessions/([0-9a-f]+)/hints)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, request_hint(req.matches[1]));
              });
  server.Post(R"(/sessions/([0-9a-f]+)/finish)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, finish(req.matches[1], req.body));
              });
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        res.status = 500;
        res.set_content(error_body("internal error"), "application/json");
      });
  if (!config_.static_dir.empty()) {
    if (!server.set_mount_point("/", config_.static_dir.string())) {
      throw IoError("cannot serve static directory: " + config_.static_dir.string());
    }
  }
}

void run_service(const ServiceConfig& config, const std::function<void(int)>& on_ready) {
  config.validate();
  auto store = std::make_shared<const WordStore>(
      WordStore::load(config.embeddings, config.frequencies));
  std::shared_ptr<const TextNormalizer> normalizer;
  if (!config.stopwords.empty()) {
    normalizer = std::make_shared<const TextNormalizer>(
        TextNormalizer::from_files(config.stopwords, config.lemmas));
  }
  std::filesystem::create_directories(config.corpus_dir);
  SessionService service(config, std::move(store), std::move(normalizer));
  httplib::Server server;
  service.mount(server);
  int port = config.port;
  if (port == 0) {
    port = server.bind_to_any_port(config.host);
  } else if (!server.bind_to_port(config.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + config.host + ":" + std::to_string(config.port));
  if (on_ready) on_ready(port);
  server.listen_after_bind();
}

}  // namespace hintbandit
