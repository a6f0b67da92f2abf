#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "hintbandit/arms.hpp"
#include "hintbandit/bandit.hpp"
#include "hintbandit/embedding_store.hpp"
#include "hintbandit/rng.hpp"
#include "hintbandit/text_normalizer.hpp"

namespace hintbandit {

enum class Condition { kHinted, kUnhinted };

std::string_view to_string(Condition condition);
// Throws Error for anything but "hinted" / "unhinted".
Condition condition_from_string(std::string_view name);

// Grace period after the nominal duration before the engine rejects input.
inline constexpr std::int64_t kExpiryGraceMs = 5000;

struct SessionConfig {
  std::string participant_id;
  std::string concept_word;
  Condition condition = Condition::kHinted;
  std::int64_t duration_s = 1200;
  std::size_t hint_size = kDefaultHintSize;
  std::uint32_t horizon = 20;
  std::uint64_t seed = 0;
  std::size_t pool_cap = kDefaultPoolCap;
  int block = 0;  // 1 or 2 in the main study, 0 when not applicable
  bool practice = false;
  std::string source = "human";  // human | mock | llm
  std::int64_t start_ms = 0;     // UTC milliseconds

  // Throws Error on an invalid combination.
  void validate() const;
  bool operator==(const SessionConfig&) const = default;
};

struct FeatureEvent {
  std::int64_t t_ms = 0;
  std::string phrase;
  std::vector<std::string> word_types;   // normalized types, phrase order
  std::vector<std::string> vocab_words;  // forms found in the embedding space
  bool is_duplicate = false;
};

struct HintEvent {
  std::int64_t t_ms = 0;
  std::uint64_t t = 0;  // 1-based pull index
  std::string arm;
  std::vector<std::string> words;
  std::optional<std::string> source;
  std::vector<double> probabilities;
  std::optional<int> loss;
  bool resolved_at_end = false;
};

struct EndEvent {
  std::int64_t t_ms = 0;
  std::string reason = "finished";
};

using SessionEvent = std::variant<FeatureEvent, HintEvent, EndEvent>;

std::int64_t event_time(const SessionEvent& event);

struct SessionRecord {
  SessionConfig config;
  std::vector<SessionEvent> events;
  std::optional<Exp3Bandit> bandit;  // hinted sessions only
  bool complete = true;              // false for aborted simulant runs
  std::string transcript_json;       // raw simulant transcript (JSON array) or empty

  std::vector<const FeatureEvent*> features() const;
  std::vector<const HintEvent*> hints() const;
};

// One feature-listing session. Not thread-safe: the owner must serialize
// calls (the service does so per session). All timestamps are supplied by
// the caller, which keeps the engine replayable.
class Session {
 public:
  Session(SessionConfig config, const WordStore& store,
          const TextNormalizer& normalizer = TextNormalizer::builtin());

  const SessionConfig& config() const { return config_; }
  const ArmContext& context() const { return ctx_; }
  const std::optional<Exp3Bandit>& bandit() const { return bandit_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  bool is_open() const { return open_; }
  bool is_expired(std::int64_t now_ms) const;
  std::int64_t deadline_ms() const;
  bool has_unresolved_hint() const { return pending_hint_.has_value(); }

  // Throws StateError if finalized, SessionExpired past the deadline.
  const FeatureEvent& submit_feature(std::string_view phrase, std::int64_t now_ms);

  // Resolves the previous hint, samples an arm and issues a new hint.
  // Throws StateError for unhinted sessions, SessionExpired past the
  // deadline and ArmUnavailable when no arm can produce a hint.
  const HintEvent& request_hint(std::int64_t now_ms);

  // Resolves any open hint and closes the session. Allowed after expiry;
  // throws StateError when called twice.
  SessionRecord finalize(std::int64_t now_ms, std::string reason = "finished");

 private:
  void check_accepting(std::int64_t now_ms) const;
  std::int64_t stamp(std::int64_t now_ms);
  void resolve_pending(bool at_end);

  SessionConfig config_;
  const WordStore& store_;
  const TextNormalizer& normalizer_;
  Rng rng_;
  ArmContext ctx_;
  std::optional<Exp3Bandit> bandit_;
  std::vector<SessionEvent> events_;
  std::set<std::vector<std::string>> seen_sequences_;
  std::optional<std::size_t> pending_hint_;  // index into events_
  std::size_t new_features_since_hint_ = 0;
  std::int64_t last_ms_ = 0;
  bool open_ = true;
};

// Feeds a record's raw inputs (phrases, hint requests, end) with their
// timestamps through a fresh engine built from the record's config.
SessionRecord replay(const SessionRecord& record, const WordStore& store,
                     const TextNormalizer& normalizer = TextNormalizer::builtin());

// Four-cell rotation over concept pairing and block order; index 4 repeats
// index 0. The first config is block 1.
std::pair<SessionConfig, SessionConfig> counterbalance_assign(
    std::uint64_t participant_index, std::string participant_id = {});

// The two practice sessions run before the main blocks.
std::pair<SessionConfig, SessionConfig> practice_configs(std::string participant_id);

}  // namespace hintbandit
