#include "hintbandit/arms.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "hintbandit/errors.hpp"

namespace hintbandit {

std::string_view to_string(ArmId arm) {
  switch (arm) {
    case ArmId::kSemantic:
      return "semantic";
    case ArmId::kFrequency:
      return "frequency";
    case ArmId::kDiversity:
      return "diversity";
  }
  return "unknown";
}

ArmId arm_from_string(std::string_view name) {
  if (name == "semantic") return ArmId::kSemantic;
  if (name == "frequency") return ArmId::kFrequency;
  if (name == "diversity") return ArmId::kDiversity;
  throw Error("unknown arm '" + std::string(name) + "'");
}

ArmContext ArmContext::for_concept(std::string_view concept_word,
                                   const CandidateVocabulary& candidates) {
  ArmContext ctx;
  ctx.concept_word = fold_case(concept_word);
  if (candidates.contains(ctx.concept_word)) ctx.heard.insert(ctx.concept_word);
  return ctx;
}

std::vector<std::uint8_t> seen_mask(const ArmContext& ctx,
                                    const CandidateVocabulary& candidates) {
  std::vector<std::uint8_t> mask(candidates.size(), 0);
  for (const WordSet* set : {&ctx.said, &ctx.heard}) {
    for (const auto& word : *set) {
      if (auto i = candidates.find(word)) mask[*i] = 1;
    }
  }
  return mask;
}

namespace {

std::vector<std::size_t> unseen_indices(const ArmContext& ctx,
                                        const CandidateVocabulary& candidates) {
  const auto mask = seen_mask(ctx, candidates);
  std::vector<std::size_t> pool;
  pool.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!mask[i]) pool.push_back(i);
  }
  return pool;
}

Hint finish_hint(ArmContext& ctx, const CandidateVocabulary& candidates,
                 const std::vector<std::size_t>& picked, ArmId arm) {
  Hint hint;
  hint.arm = std::string(to_string(arm));
  for (std::size_t i : picked) {
    hint.words.push_back(candidates.word(i));
    ctx.heard.insert(candidates.word(i));
  }
  return hint;
}

}  // namespace

Hint semantic_pull(ArmContext& ctx, const WordStore& store, std::size_t hint_size) {
  const auto& candidates = store.candidates;
  std::optional<std::string> source;
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  // said is iterated in lexicographic order, so strict < keeps the
  // lexicographically first word among equal frequencies.
  for (const auto& word : ctx.said) {
    if (ctx.removed_from_said.count(word)) continue;
    auto i = candidates.find(word);
    if (!i) continue;
    if (candidates.frequency(*i) < best) {
      best = candidates.frequency(*i);
      source = word;
    }
  }
  if (!source) throw ArmUnavailable("semantic arm: no unused said word");

  const std::size_t row = candidates.embedding_index(*candidates.find(*source));
  const auto mask = seen_mask(ctx, candidates);
  const auto picked =
      nearest_candidate_indices(store.space, candidates, row, hint_size, mask);
  if (picked.empty()) throw ArmUnavailable("semantic arm: candidates exhausted");

  ctx.removed_from_said.insert(*source);
  Hint hint = finish_hint(ctx, candidates, picked, ArmId::kSemantic);
  hint.source = std::move(source);
  return hint;
}

Hint frequency_pull(ArmContext& ctx, const WordStore& store, Rng& rng,
                    std::size_t hint_size) {
  const auto& candidates = store.candidates;
  std::vector<std::size_t> pool = unseen_indices(ctx, candidates);
  if (pool.empty()) throw ArmUnavailable("frequency arm: candidates exhausted");
  if (pool.size() < hint_size) return finish_hint(ctx, candidates, pool, ArmId::kFrequency);

  std::vector<double> weights(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    weights[j] = static_cast<double>(candidates.frequency(pool[j]));
  }
  std::vector<std::size_t> picked;
  picked.reserve(hint_size);
  for (std::size_t n = 0; n < hint_size; ++n) {
    const std::size_t j = rng.categorical(weights);
    picked.push_back(pool[j]);
    weights[j] = 0.0;
  }
  return finish_hint(ctx, candidates, picked, ArmId::kFrequency);
}

Hint diversity_pull(ArmContext& ctx, const WordStore& store, Rng& rng,
                    std::size_t hint_size, std::size_t pool_cap) {
  if (pool_cap == 0) throw Error("pool_cap must be positive");
  const auto& candidates = store.candidates;
  const auto& space = store.space;
  std::vector<std::size_t> pool = unseen_indices(ctx, candidates);
  if (pool.empty()) throw ArmUnavailable("diversity arm: candidates exhausted");

  if (pool.size() > pool_cap) {
    // Partial Fisher-Yates: the first pool_cap slots become a uniform subset.
    for (std::size_t i = 0; i < pool_cap; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(pool_cap);
  }

  std::vector<std::size_t> known_rows;
  for (const WordSet* set : {&ctx.said, &ctx.heard}) {
    for (const auto& word : *set) {
      if (auto row = space.index_of(word)) known_rows.push_back(*row);
    }
  }
  if (known_rows.empty()) {
    known_rows.push_back(candidates.embedding_index(pool[rng.uniform_index(pool.size())]));
  }

  std::vector<double> min_sq(pool.size(), std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const std::size_t row = candidates.embedding_index(pool[j]);
    for (std::size_t k : known_rows) {
      min_sq[j] = std::min(min_sq[j], space.squared_distance_at(row, k));
    }
  }

  std::vector<std::size_t> picked;
  while (!pool.empty() && picked.size() < hint_size) {
    const std::size_t j = rng.categorical(min_sq);
    const std::size_t chosen = pool[j];
    picked.push_back(chosen);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    min_sq.erase(min_sq.begin() + static_cast<std::ptrdiff_t>(j));
    const std::size_t chosen_row = candidates.embedding_index(chosen);
    for (std::size_t m = 0; m < pool.size(); ++m) {
      const double d = space.squared_distance_at(candidates.embedding_index(pool[m]),
                                                 chosen_row);
      min_sq[m] = std::min(min_sq[m], d);
    }
  }
  return finish_hint(ctx, candidates, picked, ArmId::kDiversity);
}

double word_set_distance(std::string_view word, const WordSet& set,
                         const EmbeddingSpace& space) {
  if (set.empty()) throw Error("word_set_distance: empty word set");
  auto row = space.index_of(word);
  if (!row) throw UnknownWord(std::string(word));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& other : set) {
    auto other_row = space.index_of(other);
    if (!other_row) throw UnknownWord(other);
    best = std::min(best, space.distance_at(*row, *other_row));
  }
  return best;
}

const std::vector<ArmSpec>& default_arms() {
  static const std::vector<ArmSpec> arms = {
      {"semantic",
       [](ArmContext& ctx, const WordStore& store, Rng&, const ArmParams& p) {
         return semantic_pull(ctx, store, p.hint_size);
       }},
      {"frequency",
       [](ArmContext& ctx, const WordStore& store, Rng& rng, const ArmParams& p) {
         return frequency_pull(ctx, store, rng, p.hint_size);
       }},
      {"diversity",
       [](ArmContext& ctx, const WordStore& store, Rng& rng, const ArmParams& p) {
         return diversity_pull(ctx, store, rng, p.hint_size, p.pool_cap);
       }},
  };
  return arms;
}

std::size_t arm_index(std::string_view name) {
  const auto& arms = default_arms();
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i].name == name) return i;
  }
  throw Error("unknown arm '" + std::string(name) + "'");
}

}  // namespace hintbandit
