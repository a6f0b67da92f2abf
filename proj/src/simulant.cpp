#include "hintbandit/simulant.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "hintbandit/errors.hpp"

namespace hintbandit {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kFeature: return "feature";
    case ActionKind::kGetHints: return "get_hints";
    case ActionKind::kGiveUp: return "give_up";
  }
  return "?";
}

namespace {

double sq_dist(const std::vector<float>& a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

double sq_dist(const std::vector<float>& a, const std::vector<float>& b) {
  return sq_dist(a, std::span<const float>(b));
}

double normal(Rng& rng) {
  // Box-Muller; one draw per call keeps the stream easy to reason about.
  const double u1 = 1.0 - rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

// -- mock -----------------------------------------------------------------------

void MockProfile::validate() const {
  if (knowledge.empty()) throw Error("mock profile needs knowledge");
  if (!(hint_attention >= 0.0 && hint_attention <= 1.0)) {
    throw Error("hint_attention must lie in [0, 1]");
  }
  if (!(recall_radius > 0.0)) throw Error("recall_radius must be positive");
  if (stuck_after == 0) throw Error("stuck_after must be positive");
  const auto dim = knowledge.front().position.size();
  for (const auto& k : knowledge) {
    if (k.position.size() != dim) throw Error("knowledge positions differ in dimension");
  }
}

std::vector<KnowledgeItem> knowledge_from_words(const std::vector<std::string>& words,
                                                const EmbeddingSpace& space) {
  std::vector<KnowledgeItem> out;
  for (const auto& w : words) {
    auto v = space.vector(w);
    out.push_back({w, std::vector<float>(v.begin(), v.end())});
  }
  return out;
}

MockParticipant::MockParticipant(MockProfile profile, const EmbeddingSpace& space,
                                 std::string concept_word, Condition condition,
                                 std::uint64_t seed)
    : profile_(std::move(profile)),
      space_(space),
      condition_(condition),
      recall_rng_(derive_seed(seed, 1)),
      attention_rng_(derive_seed(seed, 2)) {
  profile_.validate();
  said_.assign(profile_.knowledge.size(), false);
  if (auto i = space_.index_of(concept_word)) {
    auto v = space_.vector_at(*i);
    cue_.assign(v.begin(), v.end());
  } else {
    cue_.assign(profile_.knowledge.front().position.size(), 0.f);
    for (const auto& k : profile_.knowledge) {
      for (std::size_t d = 0; d < cue_.size(); ++d) cue_[d] += k.position[d];
    }
    for (auto& x : cue_) x /= static_cast<float>(profile_.knowledge.size());
  }
}

std::size_t MockParticipant::remaining() const {
  return static_cast<std::size_t>(std::count(said_.begin(), said_.end(), false));
}

std::vector<std::size_t> MockParticipant::in_reach() const {
  const double r2 = profile_.recall_radius * profile_.recall_radius;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < said_.size(); ++i) {
    if (!said_[i] && sq_dist(cue_, profile_.knowledge[i].position) <= r2) out.push_back(i);
  }
  return out;
}

Action MockParticipant::next() {
  if (!echo_.empty()) {
    std::string w = std::move(echo_.front());
    echo_.erase(echo_.begin());
    return Action::feature(std::move(w));
  }
  if (remaining() == 0) return Action::give_up();
  const auto reach = in_reach();
  if (reach.empty() || since_cue_change_ >= profile_.stuck_after) {
    if (condition_ == Condition::kUnhinted) return Action::give_up();
    if (hint_pending_ && !progressed_since_hint_) ++fruitless_hints_;
    if (fruitless_hints_ >= profile_.max_hints_without_progress) return Action::give_up();
    return Action::get_hints();
  }
  const std::size_t pick = reach[recall_rng_.uniform_index(reach.size())];
  said_[pick] = true;
  ++since_cue_change_;
  progressed_since_hint_ = true;
  fruitless_hints_ = 0;
  return Action::feature(profile_.knowledge[pick].phrase);
}

void MockParticipant::observe_hint(const std::vector<std::string>& words) {
  hint_pending_ = true;
  progressed_since_hint_ = false;
  const std::size_t echo = std::min(profile_.echo_hint_features, words.size());
  echo_.assign(words.begin(), words.begin() + static_cast<long>(echo));

  // Drawn for every hint so the recall stream never depends on attention.
  const bool attend = attention_rng_.uniform01() < profile_.hint_attention;
  if (!attend) return;
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_word;
  for (const auto& w : words) {
    auto idx = space_.index_of(w);
    if (!idx) continue;
    auto v = space_.vector_at(*idx);
    for (std::size_t i = 0; i < said_.size(); ++i) {
      if (said_[i]) continue;
      const double d = sq_dist(profile_.knowledge[i].position, v);
      if (d < best) {
        best = d;
        best_word = *idx;
      }
    }
  }
  if (!best_word) return;
  auto v = space_.vector_at(*best_word);
  cue_.assign(v.begin(), v.end());
  since_cue_change_ = 0;
}

SessionRecord run_mock_session(const MockProfile& profile, const SessionConfig& config,
                               const WordStore& store, const TextNormalizer& normalizer) {
  Session session(config, store, normalizer);
  MockParticipant mock(profile, store.space, session.config().concept_word, config.condition,
                       config.seed);
  const std::int64_t end = config.start_ms + config.duration_s * 1000;
  std::int64_t now = config.start_ms;
  while (true) {
    now += kMockStepMs;
    if (now > end) return session.finalize(end, "time_up");
    const Action a = mock.next();
    switch (a.kind) {
      case ActionKind::kFeature:
        session.submit_feature(a.text, now);
        break;
      case ActionKind::kGetHints:
        try {
          mock.observe_hint(session.request_hint(now).words);
        } catch (const ArmUnavailable&) {
          return session.finalize(now, "hints_exhausted");
        }
        break;
      case ActionKind::kGiveUp:
        return session.finalize(now, "gave_up");
    }
  }
}

// -- synthetic world ------------------------------------------------------------

WordStore make_synthetic_world(std::uint64_t seed, const std::vector<std::string>& concepts,
                               WorldParams p) {
  if (p.clusters == 0 || p.words_per_cluster == 0 || p.dim == 0) {
    throw Error("synthetic world needs clusters, words and dimensions");
  }
  if (concepts.size() > p.clusters) throw Error("more concepts than clusters");
  Rng rng(seed);
  std::vector<std::vector<float>> centres(p.clusters, std::vector<float>(p.dim));
  for (auto& c : centres) {
    for (auto& x : c) x = static_cast<float>(normal(rng) * p.centre_scale);
  }
  EmbeddingSpace space(p.dim);
  std::vector<std::string> words;
  for (std::size_t c = 0; c < p.clusters; ++c) {
    for (std::size_t i = 0; i < p.words_per_cluster; ++i) {
      std::vector<float> v(p.dim);
      for (std::size_t d = 0; d < p.dim; ++d) {
        v[d] = centres[c][d] + static_cast<float>(normal(rng) * p.cluster_spread);
      }
      char name[16];
      std::snprintf(name, sizeof name, "w%04zu", words.size());
      words.emplace_back(name);
      space.add(name, v);
    }
  }
  for (std::size_t c = 0; c < concepts.size(); ++c) {
    space.add(concepts[c], centres[c]);
    words.push_back(fold_case(concepts[c]));
  }
  // Zipf-like counts over a random rank order.
  std::vector<std::size_t> rank(words.size());
  std::iota(rank.begin(), rank.end(), 0);
  for (std::size_t i = rank.size(); i > 1; --i) std::swap(rank[i - 1], rank[rng.uniform_index(i)]);
  FrequencyTable freq;
  for (std::size_t i = 0; i < words.size(); ++i) {
    freq.add(words[i], 1 + static_cast<std::uint64_t>(1e6 / double(rank[i] + 1)));
  }
  return WordStore::from(std::move(space), std::move(freq));
}

MockProfile clustered_profile(const WordStore& world, const std::string& concept_word,
                              std::uint64_t seed, std::size_t items,
                              std::size_t other_clusters, WorldParams p) {
  auto concept_idx = world.space.index_of(concept_word);
  if (!concept_idx) throw UnknownWord(concept_word);
  auto word_name = [](std::size_t n) {
    char name[16];
    std::snprintf(name, sizeof name, "w%04zu", n);
    return std::string(name);
  };
  // Home cluster: the one whose mean lies closest to the concept. Word n of
  // the world belongs to cluster n / words_per_cluster.
  std::vector<float> concept_vec(world.space.vector_at(*concept_idx).begin(),
                                 world.space.vector_at(*concept_idx).end());
  std::size_t home = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < p.clusters; ++c) {
    std::vector<float> mean(p.dim, 0.f);
    for (std::size_t i = 0; i < p.words_per_cluster; ++i) {
      auto v = world.space.vector(word_name(c * p.words_per_cluster + i));
      for (std::size_t d = 0; d < p.dim; ++d) mean[d] += v[d] / float(p.words_per_cluster);
    }
    const double d = sq_dist(mean, concept_vec);
    if (d < best) {
      best = d;
      home = c;
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> clusters = {home};
  while (clusters.size() < other_clusters + 1 && clusters.size() < p.clusters) {
    const std::size_t c = rng.uniform_index(p.clusters);
    if (std::find(clusters.begin(), clusters.end(), c) == clusters.end()) clusters.push_back(c);
  }
  std::vector<std::string> words;
  for (std::size_t k = 0; k < items; ++k) {
    const std::size_t c = clusters[k % clusters.size()];
    while (true) {
      auto name = word_name(c * p.words_per_cluster + rng.uniform_index(p.words_per_cluster));
      if (std::find(words.begin(), words.end(), name) == words.end()) {
        words.push_back(std::move(name));
        break;
      }
    }
  }
  MockProfile profile;
  profile.knowledge = knowledge_from_words(words, world.space);
  // Covers one cluster from its centre but not the gap to the next.
  profile.recall_radius = 2.5 * p.cluster_spread * std::sqrt(double(p.dim));
  profile.stuck_after = 10;
  profile.hint_attention = 1.0;
  return profile;
}

MockProfile neighbourhood_profile(const WordStore& store, const std::string& concept_word,
                                  std::uint64_t seed, std::size_t items, std::size_t pool) {
  if (items == 0 || pool < items) throw Error("need 0 < items <= pool");
  auto near = nearest_neighbors(store.space, store.candidates, concept_word, pool);
  if (near.size() < items) throw Error("vocabulary too small for the knowledge pool");
  Rng rng(seed);
  for (std::size_t i = 0; i < items; ++i) {
    std::swap(near[i], near[i + rng.uniform_index(near.size() - i)]);
  }
  near.resize(items);
  MockProfile profile;
  profile.knowledge = knowledge_from_words(near, store.space);
  // Initially about a quarter of the knowledge is within reach of the concept.
  std::vector<double> d;
  for (const auto& w : near) d.push_back(distance(store.space, concept_word, w));
  std::sort(d.begin(), d.end());
  profile.recall_radius = d[(items - 1) / 4];
  profile.stuck_after = 10;
  profile.hint_attention = 1.0;
  return profile;
}

// -- prompts ----------------------------------------------------------------------

std::string build_prompt(Condition condition, std::string_view concept_word, PromptPhase phase,
                         const std::vector<std::string>& hint_words) {
  const std::string c(concept_word);
  if (phase == PromptPhase::kInitial) {
    if (condition == Condition::kUnhinted) {
      return "Please type as many properties of " + c +
             " as you can think of. If you think you have exhausted all ideas, say \"Give Up\". "
             "Please use the format below. 1. [PROPERTY 1]\n2. [PROPERTY 2]";
    }
    return "Please type as many properties of " + c +
           " as you can think of. When you run out of ideas, ask for a hint by saying 'Get "
           "Hints'. If you think you have exhausted all ideas, say 'Give Up'. Please use the "
           "format below. 1. [PROPERTY 1]\n2. [PROPERTY 2]";
  }
  if (condition == Condition::kUnhinted) {
    throw Error("the unhinted condition has no subsequent prompt");
  }
  if (hint_words.empty()) throw Error("a subsequent prompt needs the issued hint words");
  std::string joined;
  for (const auto& w : hint_words) joined += (joined.empty() ? "" : ", ") + w;
  return "Here are some hints: " + joined +
         ". If they are not helpful, ask for another hint by saying 'Get Hints'. If you have "
         "exhausted your knowledge, say 'Give Up'.";
}

// -- reply parsing ----------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Lowercase words separated by single spaces, padded with one space each side.
std::string word_string(std::string_view s) {
  std::string out = " ";
  for (unsigned char ch : s) {
    if (std::isalnum(ch)) {
      out += static_cast<char>(std::tolower(ch));
    } else if (out.back() != ' ') {
      out += ' ';
    }
  }
  if (out.back() != ' ') out += ' ';
  return out;
}

// Position of the first control token in `words` (as built by word_string).
std::optional<std::pair<std::size_t, ActionKind>> find_control(const std::string& words) {
  std::optional<std::pair<std::size_t, ActionKind>> hit;
  for (auto [token, kind] : {std::pair{" get hints ", ActionKind::kGetHints},
                             std::pair{" give up ", ActionKind::kGiveUp}}) {
    const auto pos = words.find(token);
    if (pos != std::string::npos && (!hit || pos < hit->first)) hit = {{pos, kind}};
  }
  return hit;
}

// "12. text", "12) text" or "12: text" after stripping bullets and bold.
std::optional<std::string> numbered_item(std::string line) {
  for (std::string marker : {"**", "__"}) {
    for (auto pos = line.find(marker); pos != std::string::npos; pos = line.find(marker)) {
      line.erase(pos, marker.size());
    }
  }
  line = trim(line);
  if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) line = trim(line.substr(2));
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i >= line.size()) return std::nullopt;
  if (line[i] != '.' && line[i] != ')' && line[i] != ':') return std::nullopt;
  std::string item = trim(line.substr(i + 1));
  if (item.size() >= 2 && item.front() == '[' && item.back() == ']') {
    item = trim(item.substr(1, item.size() - 2));
  }
  return item;
}

}  // namespace

std::vector<Action> parse_llm_reply(std::string_view text) {
  std::vector<Action> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;

    if (auto item = numbered_item(std::string(line))) {
      const std::string words = word_string(*item);
      // A numbered line is a control only when that is all it says.
      if (words == " get hints ") {
        out.push_back(Action::get_hints());
        return out;
      }
      if (words == " give up ") {
        out.push_back(Action::give_up());
        return out;
      }
      if (words != " ") out.push_back(Action::feature(*item));
      continue;
    }
    if (auto control = find_control(word_string(line))) {
      out.push_back(control->second == ActionKind::kGetHints ? Action::get_hints()
                                                             : Action::give_up());
      return out;
    }
  }
  return out;
}

// -- LLM session --------------------------------------------------------------------

SessionRecord run_llm_session(ChatClient& client, const SessionConfig& config,
                              const WordStore& store, LlmRunOptions options,
                              const TextNormalizer& normalizer) {
  if (options.max_turns == 0) throw Error("max_turns must be positive");
  Session session(config, store, normalizer);
  const Condition cond = config.condition;
  const std::string& concept_word = session.config().concept_word;
  std::int64_t clock = config.start_ms;
  auto tick = [&] { return ++clock; };

  std::vector<ChatMessage> messages = {
      {"user", build_prompt(cond, concept_word, PromptPhase::kInitial)}};
  nlohmann::ordered_json transcript = nlohmann::ordered_json::array();
  auto log = [&](std::size_t turn, const ChatMessage& m) {
    transcript.push_back({{"turn", turn}, {"role", m.role}, {"content", m.content}});
  };
  log(0, messages.back());

  std::string reason = "turn_cap";
  bool complete = true;
  for (std::size_t turn = 0; turn < options.max_turns; ++turn) {
    std::string reply;
    try {
      reply = client.complete(messages, turn);
    } catch (const Error& e) {
      transcript.push_back({{"turn", turn}, {"error", e.what()}});
      reason = "aborted";
      complete = false;
      break;
    }
    messages.push_back({"assistant", reply});
    log(turn, messages.back());

    std::optional<ActionKind> control;
    for (const auto& a : parse_llm_reply(reply)) {
      if (a.kind == ActionKind::kFeature) {
        session.submit_feature(a.text, tick());
      } else {
        control = a.kind;
      }
    }
    if (!control) {
      reason = "no_control";
      break;
    }
    if (*control == ActionKind::kGiveUp) {
      reason = "gave_up";
      break;
    }
    if (cond == Condition::kUnhinted) {
      reason = "hint_unavailable";
      break;
    }
    try {
      const auto& hint = session.request_hint(tick());
      messages.push_back(
          {"user", build_prompt(cond, concept_word, PromptPhase::kSubsequent, hint.words)});
      log(turn + 1, messages.back());
    } catch (const ArmUnavailable&) {
      reason = "hints_exhausted";
      break;
    }
  }
  SessionRecord record = session.finalize(tick(), reason);
  record.complete = complete;
  record.transcript_json = transcript.dump();
  return record;
}

// -- batches ------------------------------------------------------------------------

std::vector<Cell> full_design(const std::vector<std::string>& concepts) {
  std::vector<Cell> cells;
  for (const auto& c : concepts) {
    cells.push_back({c, Condition::kHinted});
    cells.push_back({c, Condition::kUnhinted});
  }
  return cells;
}

SessionConfig batch_config(const Cell& cell, std::size_t index, std::uint64_t base_seed,
                           const std::string& source) {
  SessionConfig c;
  c.concept_word = cell.concept_word;
  c.condition = cell.condition;
  c.source = source;
  c.participant_id = source + "-" + fold_case(cell.concept_word) + "-" +
                     std::string(to_string(cell.condition)) + "-" + std::to_string(index);
  // FNV-1a of the id: adding cells never reshuffles existing seeds.
  std::uint64_t key = 14695981039346656037ULL;
  for (char ch : c.participant_id) key = (key ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
  c.seed = derive_seed(base_seed, key) >> 11;  // stays below 2^53
  return c;
}

std::vector<SessionRecord> run_batch(
    const std::vector<Cell>& cells, std::size_t n, std::uint64_t base_seed,
    const std::string& source, std::size_t parallelism,
    const std::function<SessionRecord(const SessionConfig&)>& run_one) {
  std::vector<SessionConfig> configs;
  for (const auto& cell : cells) {
    for (std::size_t i = 0; i < n; ++i) configs.push_back(batch_config(cell, i, base_seed, source));
  }
  std::vector<std::optional<SessionRecord>> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_one(configs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, configs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<SessionRecord> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace hintbandit
