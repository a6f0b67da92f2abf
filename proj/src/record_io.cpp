#include "hintbandit/record_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "hintbandit/arms.hpp"
#include "hintbandit/errors.hpp"

namespace hintbandit {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw SchemaError(std::string("expected object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get_as(const Json& j, const char* key) {
  const Json& v = field(j, key);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get_as<T>(j, key);
}

Json optional_string(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

}  // namespace

// -- config -------------------------------------------------------------------

Json to_json(const SessionConfig& c) {
  Json j;
  j["participant_id"] = c.participant_id;
  j["concept"] = c.concept_word;
  j["condition"] = to_string(c.condition);
  j["duration_s"] = c.duration_s;
  j["hint_size"] = c.hint_size;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["pool_cap"] = c.pool_cap;
  j["block"] = c.block;
  j["practice"] = c.practice;
  j["source"] = c.source;
  j["start_ms"] = c.start_ms;
  return j;
}

SessionConfig config_from_json(const Json& j) {
  SessionConfig c;
  c.participant_id = get_as<std::string>(j, "participant_id");
  c.concept_word = get_as<std::string>(j, "concept");
  try {
    c.condition = condition_from_string(get_as<std::string>(j, "condition"));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
  c.duration_s = get_or<std::int64_t>(j, "duration_s", c.duration_s);
  c.hint_size = get_or<std::size_t>(j, "hint_size", c.hint_size);
  c.horizon = get_or<std::uint32_t>(j, "horizon", c.horizon);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.pool_cap = get_or<std::size_t>(j, "pool_cap", c.pool_cap);
  c.block = get_or<int>(j, "block", c.block);
  c.practice = get_or<bool>(j, "practice", c.practice);
  c.source = get_or<std::string>(j, "source", c.source);
  c.start_ms = get_or<std::int64_t>(j, "start_ms", c.start_ms);
  try {
    c.validate();
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
  return c;
}

// -- events -------------------------------------------------------------------

Json to_json(const FeatureEvent& e) {
  Json j;
  j["type"] = "feature";
  j["t_ms"] = e.t_ms;
  j["phrase"] = e.phrase;
  j["word_types"] = e.word_types;
  j["vocab_words"] = e.vocab_words;
  j["duplicate"] = e.is_duplicate;
  return j;
}

Json to_json(const HintEvent& e) {
  Json j;
  j["type"] = "hint";
  j["t_ms"] = e.t_ms;
  j["t"] = e.t;
  j["arm"] = e.arm;
  j["words"] = e.words;
  j["source"] = optional_string(e.source);
  j["probs"] = e.probabilities;
  j["loss"] = e.loss ? Json(*e.loss) : Json(nullptr);
  j["resolved_at_end"] = e.resolved_at_end;
  return j;
}

Json to_json(const EndEvent& e) {
  Json j;
  j["type"] = "end";
  j["t_ms"] = e.t_ms;
  j["reason"] = e.reason;
  return j;
}

Json to_json(const SessionEvent& event) {
  return std::visit([](const auto& e) { return to_json(e); }, event);
}

SessionEvent event_from_json(const Json& j) {
  const auto type = get_as<std::string>(j, "type");
  if (type == "feature") {
    FeatureEvent e;
    e.t_ms = get_as<std::int64_t>(j, "t_ms");
    e.phrase = get_as<std::string>(j, "phrase");
    e.word_types = get_as<std::vector<std::string>>(j, "word_types");
    e.vocab_words = get_or<std::vector<std::string>>(j, "vocab_words", {});
    e.is_duplicate = get_as<bool>(j, "duplicate");
    return e;
  }
  if (type == "hint") {
    HintEvent e;
    e.t_ms = get_as<std::int64_t>(j, "t_ms");
    e.t = get_as<std::uint64_t>(j, "t");
    e.arm = get_as<std::string>(j, "arm");
    e.words = get_as<std::vector<std::string>>(j, "words");
    if (j.contains("source") && !j.at("source").is_null()) {
      e.source = get_as<std::string>(j, "source");
    }
    e.probabilities = get_or<std::vector<double>>(j, "probs", {});
    if (!field(j, "loss").is_null()) {
      const int loss = get_as<int>(j, "loss");
      if (loss != 0 && loss != 1) throw SchemaError("loss must be 0, 1 or null");
      e.loss = loss;
    }
    e.resolved_at_end = get_or<bool>(j, "resolved_at_end", false);
    return e;
  }
  if (type == "end") {
    EndEvent e;
    e.t_ms = get_as<std::int64_t>(j, "t_ms");
    e.reason = get_or<std::string>(j, "reason", "finished");
    return e;
  }
  throw SchemaError("unknown event type '" + type + "'");
}

// -- bandit -------------------------------------------------------------------

Json to_json(const Exp3Bandit& b) {
  Json j;
  j["eta"] = b.eta();
  j["weights"] = b.weights();
  j["log_weights"] = b.log_weights();
  Json pulls = Json::array();
  auto emit = [&](const PullRecord& p) {
    Json pj;
    pj["t"] = p.t;
    pj["arm"] = default_arms().at(p.arm).name;
    pj["probs"] = p.probabilities;
    pj["loss"] = p.loss ? Json(p.loss->value()) : Json(nullptr);
    pulls.push_back(std::move(pj));
  };
  for (const auto& p : b.history()) emit(p);
  if (b.pending()) emit(*b.pending());
  j["pulls"] = std::move(pulls);
  return j;
}

Exp3Bandit bandit_from_json(const Json& j) {
  const double eta = get_as<double>(j, "eta");
  std::vector<double> log_weights;
  if (j.contains("log_weights")) {
    log_weights = get_as<std::vector<double>>(j, "log_weights");
  } else {
    for (double w : get_as<std::vector<double>>(j, "weights")) {
      if (!(w > 0.0)) throw SchemaError("weights must be positive");
      log_weights.push_back(std::log(w));
    }
  }
  std::vector<PullRecord> history;
  std::optional<PullRecord> pending;
  const Json& pulls = field(j, "pulls");
  if (!pulls.is_array()) throw SchemaError("'pulls' must be an array");
  for (std::size_t i = 0; i < pulls.size(); ++i) {
    const Json& pj = pulls[i];
    PullRecord p;
    p.t = get_as<std::uint64_t>(pj, "t");
    try {
      p.arm = arm_index(get_as<std::string>(pj, "arm"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(e.what());
    }
    p.probabilities = get_as<std::vector<double>>(pj, "probs");
    if (field(pj, "loss").is_null()) {
      if (i + 1 != pulls.size()) throw SchemaError("only the last pull may be unresolved");
      pending = std::move(p);
      continue;
    }
    try {
      p.loss = Loss::from_int(get_as<int>(pj, "loss"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(e.what());
    }
    history.push_back(std::move(p));
  }
  try {
    return Exp3Bandit::restore(eta, std::move(log_weights), std::move(history),
                               std::move(pending));
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
}

// -- record -------------------------------------------------------------------

Json to_json(const SessionRecord& r) {
  Json j;
  j["schema"] = kRecordSchema;
  j["config"] = to_json(r.config);
  Json events = Json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  j["events"] = std::move(events);
  j["bandit"] = r.bandit ? to_json(*r.bandit) : Json(nullptr);
  j["complete"] = r.complete;
  if (!r.transcript_json.empty()) j["transcript"] = Json::parse(r.transcript_json);
  return j;
}

SessionRecord record_from_json(const Json& j) {
  if (get_as<std::string>(j, "schema") != kRecordSchema) {
    throw SchemaError("unsupported record schema");
  }
  SessionRecord r;
  r.config = config_from_json(field(j, "config"));
  const Json& events = field(j, "events");
  if (!events.is_array()) throw SchemaError("'events' must be an array");
  std::int64_t last = std::numeric_limits<std::int64_t>::min();
  for (const auto& ej : events) {
    SessionEvent e = event_from_json(ej);
    if (event_time(e) <= last) throw SchemaError("events are not strictly time-ordered");
    last = event_time(e);
    if (std::holds_alternative<HintEvent>(e) &&
        r.config.condition == Condition::kUnhinted) {
      throw SchemaError("unhinted record contains a hint event");
    }
    r.events.push_back(std::move(e));
  }
  if (j.contains("bandit") && !j.at("bandit").is_null()) {
    r.bandit = bandit_from_json(j.at("bandit"));
  }
  r.complete = get_or<bool>(j, "complete", true);
  if (j.contains("transcript")) r.transcript_json = j.at("transcript").dump();
  return r;
}

std::string dump_record(const SessionRecord& record) { return to_json(record).dump(); }

SessionRecord parse_record(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return record_from_json(j);
}

std::vector<SessionRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  std::vector<SessionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const SchemaError& e) {
      throw SchemaError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<SessionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus: " + path.string());
  for (const auto& r : records) out << dump_record(r) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void append_record(const std::filesystem::path& path, const SessionRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to corpus: " + path.string());
  out << dump_record(record) << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace hintbandit
