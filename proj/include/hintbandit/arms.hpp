#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hintbandit/embedding_store.hpp"
#include "hintbandit/rng.hpp"

namespace hintbandit {

enum class ArmId { kSemantic, kFrequency, kDiversity };

// "semantic" | "frequency" | "diversity"
std::string_view to_string(ArmId arm);
// Throws Error on an unrecognized name.
ArmId arm_from_string(std::string_view name);

inline constexpr std::size_t kDefaultHintSize = 5;
inline constexpr std::size_t kDefaultPoolCap = 10000;

// Per-session word history the arms read and extend.
struct ArmContext {
  std::string concept_word;
  WordSet said;               // produced word types that are in the candidate vocabulary
  WordSet heard;              // every hint word issued so far (plus the concept)
  WordSet removed_from_said;  // semantic-arm sources already used

  // Heard starts with the concept word when the vocabulary knows it.
  static ArmContext for_concept(std::string_view concept_word,
                                const CandidateVocabulary& candidates);
};

struct Hint {
  std::vector<std::string> words;
  std::string arm;
  std::optional<std::string> source;  // semantic arm only: the said word expanded
};

struct ArmParams {
  std::size_t hint_size = kDefaultHintSize;
  std::size_t pool_cap = kDefaultPoolCap;
};

// Nearest candidates to the least frequent not-yet-used said word. Throws
// ArmUnavailable when every said word has been used (or none exist).
Hint semantic_pull(ArmContext& ctx, const WordStore& store,
                   std::size_t hint_size = kDefaultHintSize);

// Frequency-proportional draw without replacement from the unseen
// candidates. Returns every remaining candidate if fewer than hint_size.
Hint frequency_pull(ArmContext& ctx, const WordStore& store, Rng& rng,
                    std::size_t hint_size = kDefaultHintSize);

// kmeans++-style sequential draw: each unseen candidate is weighted by its
// squared distance to the nearest known (said, heard or already drawn) word.
Hint diversity_pull(ArmContext& ctx, const WordStore& store, Rng& rng,
                    std::size_t hint_size = kDefaultHintSize,
                    std::size_t pool_cap = kDefaultPoolCap);

// min over u in set of distance(word, u). Throws Error on an empty set and
// UnknownWord for words missing from the space.
double word_set_distance(std::string_view word, const WordSet& set,
                         const EmbeddingSpace& space);

// Candidate mask with 1 for every word in said or heard.
std::vector<std::uint8_t> seen_mask(const ArmContext& ctx,
                                    const CandidateVocabulary& candidates);

// The bandit's arms in index order. Adding an arm is one more entry here.
using PullFn =
    std::function<Hint(ArmContext&, const WordStore&, Rng&, const ArmParams&)>;

struct ArmSpec {
  std::string name;
  PullFn pull;
};

const std::vector<ArmSpec>& default_arms();

// Position of `name` in default_arms(); throws Error if absent.
std::size_t arm_index(std::string_view name);

}  // namespace hintbandit
