#include "hintbandit/session.hpp"

#include <algorithm>
#include <memory>

#include "hintbandit/errors.hpp"

namespace hintbandit {

std::string_view to_string(Condition condition) {
  return condition == Condition::kHinted ? "hinted" : "unhinted";
}

Condition condition_from_string(std::string_view name) {
  if (name == "hinted") return Condition::kHinted;
  if (name == "unhinted") return Condition::kUnhinted;
  throw Error("unknown condition '" + std::string(name) + "'");
}

void SessionConfig::validate() const {
  if (concept_word.empty()) throw Error("concept must be nonempty");
  if (duration_s <= 0) throw Error("duration must be positive");
  if (hint_size == 0) throw Error("hint size must be positive");
  if (horizon == 0) throw Error("horizon must be positive");
  if (pool_cap == 0) throw Error("pool cap must be positive");
  if (block < 0 || block > 2) throw Error("block must be 0, 1 or 2");
}

std::int64_t event_time(const SessionEvent& event) {
  return std::visit([](const auto& e) { return e.t_ms; }, event);
}

std::vector<const FeatureEvent*> SessionRecord::features() const {
  std::vector<const FeatureEvent*> out;
  for (const auto& e : events) {
    if (auto* f = std::get_if<FeatureEvent>(&e)) out.push_back(f);
  }
  return out;
}

std::vector<const HintEvent*> SessionRecord::hints() const {
  std::vector<const HintEvent*> out;
  for (const auto& e : events) {
    if (auto* h = std::get_if<HintEvent>(&e)) out.push_back(h);
  }
  return out;
}

Session::Session(SessionConfig config, const WordStore& store,
                 const TextNormalizer& normalizer)
    : config_(std::move(config)),
      store_(store),
      normalizer_(normalizer),
      rng_(config_.seed) {
  config_.validate();
  config_.concept_word = fold_case(config_.concept_word);
  ctx_ = ArmContext::for_concept(config_.concept_word, store_.candidates);
  if (config_.condition == Condition::kHinted) {
    bandit_.emplace(default_arms().size(), static_cast<double>(config_.horizon));
  }
  last_ms_ = config_.start_ms;
}

std::int64_t Session::deadline_ms() const {
  return config_.start_ms + config_.duration_s * 1000 + kExpiryGraceMs;
}

bool Session::is_expired(std::int64_t now_ms) const { return now_ms > deadline_ms(); }

void Session::check_accepting(std::int64_t now_ms) const {
  if (!open_) throw StateError("session is closed");
  if (is_expired(now_ms)) throw SessionExpired("session duration has elapsed");
}

std::int64_t Session::stamp(std::int64_t now_ms) {
  // Events are strictly time-ordered even when the caller's clock is coarse.
  const std::int64_t t = events_.empty() ? std::max(now_ms, last_ms_)
                                         : std::max(now_ms, last_ms_ + 1);
  last_ms_ = t;
  return t;
}

const FeatureEvent& Session::submit_feature(std::string_view phrase,
                                            std::int64_t now_ms) {
  check_accepting(now_ms);
  FeatureEvent event;
  event.t_ms = stamp(now_ms);
  event.phrase = std::string(phrase);
  for (auto& token : normalizer_.analyze(phrase)) {
    // Stems are often not words; fall back to the lemma for lookups.
    if (store_.space.contains(token.type)) {
      event.vocab_words.push_back(token.type);
    } else if (store_.space.contains(token.lemma)) {
      event.vocab_words.push_back(token.lemma);
    }
    event.word_types.push_back(std::move(token.type));
  }
  event.is_duplicate = !seen_sequences_.insert(event.word_types).second;
  if (!event.is_duplicate) {
    ++new_features_since_hint_;
    for (const auto& word : event.vocab_words) {
      if (store_.candidates.contains(word)) ctx_.said.insert(word);
    }
  }
  events_.emplace_back(std::move(event));
  return std::get<FeatureEvent>(events_.back());
}

void Session::resolve_pending(bool at_end) {
  if (!pending_hint_) return;
  auto& hint = std::get<HintEvent>(events_[*pending_hint_]);
  const Loss loss = new_features_since_hint_ > 0 ? Loss::zero() : Loss::one();
  bandit_->record_loss(arm_index(hint.arm), loss);
  hint.loss = loss.value();
  hint.resolved_at_end = at_end;
  pending_hint_.reset();
}

const HintEvent& Session::request_hint(std::int64_t now_ms) {
  if (config_.condition != Condition::kHinted) {
    throw StateError("hints are not available in the unhinted condition");
  }
  check_accepting(now_ms);
  // A request no arm can serve must leave no trace, or replay would diverge.
  const Rng saved_rng = rng_;
  const std::optional<Exp3Bandit> saved_bandit = bandit_;
  const std::optional<std::size_t> saved_pending = pending_hint_;
  std::optional<HintEvent> saved_hint;
  if (pending_hint_) saved_hint = std::get<HintEvent>(events_[*pending_hint_]);
  const std::size_t saved_new = new_features_since_hint_;
  resolve_pending(false);

  const auto& arms = default_arms();
  const ArmParams params{config_.hint_size, config_.pool_cap};
  // Plain array: std::vector<bool> cannot back a span.
  std::unique_ptr<bool[]> available(new bool[arms.size()]);
  std::fill_n(available.get(), arms.size(), true);
  const std::span<const bool> mask(available.get(), arms.size());
  while (true) {
    if (std::none_of(mask.begin(), mask.end(), [](bool a) { return a; })) {
      rng_ = saved_rng;
      bandit_ = saved_bandit;
      pending_hint_ = saved_pending;
      if (saved_hint) events_[*saved_pending] = *saved_hint;
      new_features_since_hint_ = saved_new;
      throw ArmUnavailable("no arm can produce a hint");
    }
    const std::size_t arm = bandit_->sample(rng_, mask);
    try {
      Hint hint = arms[arm].pull(ctx_, store_, rng_, params);
      const PullRecord& pull = *bandit_->pending();
      HintEvent event;
      event.t_ms = stamp(now_ms);
      event.t = pull.t;
      event.arm = arms[arm].name;
      event.words = std::move(hint.words);
      event.source = std::move(hint.source);
      event.probabilities = pull.probabilities;
      events_.emplace_back(std::move(event));
      pending_hint_ = events_.size() - 1;
      new_features_since_hint_ = 0;
      return std::get<HintEvent>(events_.back());
    } catch (const ArmUnavailable&) {
      // Skipped for this pull only and never charged.
      bandit_->cancel_pending();
      available[arm] = false;
    }
  }
}

SessionRecord Session::finalize(std::int64_t now_ms, std::string reason) {
  if (!open_) throw StateError("session already finalized");
  resolve_pending(true);
  events_.emplace_back(EndEvent{stamp(now_ms), std::move(reason)});
  open_ = false;
  SessionRecord record;
  record.config = config_;
  record.events = events_;
  record.bandit = bandit_;
  return record;
}

SessionRecord replay(const SessionRecord& record, const WordStore& store,
                     const TextNormalizer& normalizer) {
  Session session(record.config, store, normalizer);
  std::optional<SessionRecord> out;
  for (const auto& event : record.events) {
    if (auto* f = std::get_if<FeatureEvent>(&event)) {
      session.submit_feature(f->phrase, f->t_ms);
    } else if (auto* h = std::get_if<HintEvent>(&event)) {
      session.request_hint(h->t_ms);
    } else {
      const auto& end = std::get<EndEvent>(event);
      out = session.finalize(end.t_ms, end.reason);
    }
  }
  if (!out) throw SchemaError("record has no end event");
  out->complete = record.complete;
  out->transcript_json = record.transcript_json;
  return *out;
}

namespace {

SessionConfig main_block(std::string participant_id, std::string concept_word,
                         Condition condition, int block) {
  SessionConfig c;
  c.participant_id = std::move(participant_id);
  c.concept_word = std::move(concept_word);
  c.condition = condition;
  c.block = block;
  return c;
}

}  // namespace

std::pair<SessionConfig, SessionConfig> counterbalance_assign(
    std::uint64_t participant_index, std::string participant_id) {
  if (participant_id.empty()) participant_id = "p" + std::to_string(participant_index);
  // cell: bit 0 picks which concept is hinted, bit 1 whether the hinted
  // block comes first.
  const std::uint64_t cell = participant_index % 4;
  const bool penguin_hinted = (cell % 2) == 0;
  const bool hinted_first = cell < 2;
  const std::string hinted_concept = penguin_hinted ? "penguin" : "journalist";
  const std::string unhinted_concept = penguin_hinted ? "journalist" : "penguin";
  auto hinted = main_block(participant_id, hinted_concept, Condition::kHinted,
                           hinted_first ? 1 : 2);
  auto unhinted = main_block(participant_id, unhinted_concept, Condition::kUnhinted,
                             hinted_first ? 2 : 1);
  if (hinted_first) return {hinted, unhinted};
  return {unhinted, hinted};
}

std::pair<SessionConfig, SessionConfig> practice_configs(std::string participant_id) {
  auto tiger = main_block(participant_id, "tiger", Condition::kHinted, 0);
  auto desk = main_block(participant_id, "desk", Condition::kUnhinted, 0);
  tiger.practice = desk.practice = true;
  return {tiger, desk};
}

}  // namespace hintbandit
