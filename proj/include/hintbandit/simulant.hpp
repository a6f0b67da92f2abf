#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hintbandit/embedding_store.hpp"
#include "hintbandit/rng.hpp"
#include "hintbandit/session.hpp"

namespace hintbandit {

// -- participant actions --------------------------------------------------------

enum class ActionKind { kFeature, kGetHints, kGiveUp };

struct Action {
  ActionKind kind = ActionKind::kFeature;
  std::string text;  // the property for kFeature, empty otherwise

  static Action feature(std::string phrase) { return {ActionKind::kFeature, std::move(phrase)}; }
  static Action get_hints() { return {ActionKind::kGetHints, {}}; }
  static Action give_up() { return {ActionKind::kGiveUp, {}}; }
  bool operator==(const Action&) const = default;
};

std::string_view to_string(ActionKind kind);

// -- mock participant -----------------------------------------------------------

struct KnowledgeItem {
  std::string phrase;
  std::vector<float> position;
};

struct MockProfile {
  std::vector<KnowledgeItem> knowledge;
  double recall_radius = 1.0;
  std::size_t stuck_after = 10;
  double hint_attention = 1.0;
  // After each hint, copy this many hint words back as features.
  std::size_t echo_hint_features = 0;
  // Hints in a row that unlock nothing before the mock gives up.
  std::size_t max_hints_without_progress = 3;

  void validate() const;
};

// Knowledge items for words of the space; each phrase is the word itself.
std::vector<KnowledgeItem> knowledge_from_words(const std::vector<std::string>& words,
                                                const EmbeddingSpace& space);

// Radius-limited recall around a movable cue. The cue starts at the
// concept's position (or the knowledge centroid when the concept has no
// vector) and moves to an adopted hint word.
class MockParticipant {
 public:
  MockParticipant(MockProfile profile, const EmbeddingSpace& space, std::string concept_word,
                  Condition condition, std::uint64_t seed);

  Action next();
  void observe_hint(const std::vector<std::string>& words);

  std::size_t remaining() const;
  const std::vector<float>& cue() const { return cue_; }

 private:
  std::vector<std::size_t> in_reach() const;

  MockProfile profile_;
  const EmbeddingSpace& space_;
  Condition condition_;
  Rng recall_rng_;
  Rng attention_rng_;
  std::vector<float> cue_;
  std::vector<bool> said_;
  std::vector<std::string> echo_;
  std::size_t since_cue_change_ = 0;
  std::size_t fruitless_hints_ = 0;
  bool hint_pending_ = false;
  bool progressed_since_hint_ = false;
};

inline constexpr std::int64_t kMockStepMs = 1000;

// Drives one engine session with the mock on a virtual clock (one action per
// kMockStepMs). Ends on GiveUp, on the session duration, or when no arm can
// hint.
SessionRecord run_mock_session(const MockProfile& profile, const SessionConfig& config,
                               const WordStore& store,
                               const TextNormalizer& normalizer = TextNormalizer::builtin());

// -- synthetic world ------------------------------------------------------------

struct WorldParams {
  std::size_t clusters = 12;
  std::size_t words_per_cluster = 80;
  std::size_t dim = 8;
  double cluster_spread = 0.35;  // per-coordinate sd around the centre
  double centre_scale = 2.0;     // per-coordinate sd of the centres
};

// Clustered vocabulary "w0000".. with Zipf-like frequencies. The given
// concept words sit at the centres of the first clusters.
WordStore make_synthetic_world(std::uint64_t seed, const std::vector<std::string>& concepts,
                               WorldParams params = {});

// 40 items: `near` from the concept's cluster and the rest spread over
// `other_clusters` further clusters; radius fits one cluster.
MockProfile clustered_profile(const WordStore& world, const std::string& concept_word,
                              std::uint64_t seed, std::size_t items = 40,
                              std::size_t other_clusters = 3, WorldParams params = {});

// For real vocabularies: `items` words drawn from the concept's `pool`
// nearest candidates, with a radius that starts a quarter of them in reach.
MockProfile neighbourhood_profile(const WordStore& store, const std::string& concept_word,
                                  std::uint64_t seed, std::size_t items = 40,
                                  std::size_t pool = 400);

// -- LLM protocol -----------------------------------------------------------------

enum class PromptPhase { kInitial, kSubsequent };

// Throws Error for a subsequent prompt in the unhinted condition or without
// hint words.
std::string build_prompt(Condition condition, std::string_view concept_word, PromptPhase phase,
                         const std::vector<std::string>& hint_words = {});

// Numbered properties in order, then at most one control action. Anything
// after the first control token is dropped.
std::vector<Action> parse_llm_reply(std::string_view text);

struct ChatMessage {
  std::string role;
  std::string content;
};

// One chat completion per call. `turn` is the 0-based turn index; a client
// that retries must return the same reply for the same turn.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages, std::size_t turn) = 0;
};

struct LlmRunOptions {
  std::size_t max_turns = 30;
};

// Feeds the conversation through the engine on a virtual clock (1 ms per
// event, so the timer never binds). Transport failures abort the session
// and mark the record incomplete.
SessionRecord run_llm_session(ChatClient& client, const SessionConfig& config,
                              const WordStore& store, LlmRunOptions options = {},
                              const TextNormalizer& normalizer = TextNormalizer::builtin());

// -- batches ----------------------------------------------------------------------

struct Cell {
  std::string concept_word;
  Condition condition;
};

// Both conditions for each concept.
std::vector<Cell> full_design(const std::vector<std::string>& concepts);

// Config for run `index` of a cell; the seed is derived from `base_seed`.
SessionConfig batch_config(const Cell& cell, std::size_t index, std::uint64_t base_seed,
                           const std::string& source);

// Runs n sessions per cell with up to `parallelism` workers. Output order is
// cell-major and independent of scheduling.
std::vector<SessionRecord> run_batch(
    const std::vector<Cell>& cells, std::size_t n, std::uint64_t base_seed,
    const std::string& source, std::size_t parallelism,
    const std::function<SessionRecord(const SessionConfig&)>& run_one);

}  // namespace hintbandit
