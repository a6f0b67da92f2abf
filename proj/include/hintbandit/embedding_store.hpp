#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hintbandit {

// Ordered so that iteration, serialization and tie-breaking are reproducible.
using WordSet = std::set<std::string, std::less<>>;

// ASCII case folding; bytes outside ASCII pass through unchanged.
std::string fold_case(std::string_view word);

// Read-only word -> dense vector map. Vectors are stored contiguously as
// float; distances accumulate in double.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  explicit EmbeddingSpace(std::size_t dim);

  // Adds a word (case-folded). Returns false and leaves the space unchanged
  // if the folded word is already present. Throws on dimension mismatch or
  // an empty / whitespace-containing key.
  bool add(std::string_view word, std::span<const float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  bool contains(std::string_view word) const;
  std::optional<std::size_t> index_of(std::string_view word) const;
  const std::string& word_at(std::size_t index) const { return words_[index]; }
  std::span<const float> vector_at(std::size_t index) const {
    return {data_.data() + index * dim_, dim_};
  }
  // Throws UnknownWord.
  std::span<const float> vector(std::string_view word) const;

  const std::vector<std::string>& words() const { return words_; }

  double squared_distance_at(std::size_t a, std::size_t b) const;
  double distance_at(std::size_t a, std::size_t b) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

class FrequencyTable {
 public:
  // Folds case; repeated folded keys accumulate. Count must be positive.
  void add(std::string_view word, std::uint64_t count);

  bool contains(std::string_view word) const;
  // Throws UnknownWord.
  std::uint64_t count(std::string_view word) const;
  std::uint64_t total() const { return total_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  const std::unordered_map<std::string, std::uint64_t>& counts() const {
    return counts_;
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Words present in both the embedding space and the frequency table,
// lexicographically ordered. Position in this list is the candidate index
// used by the arms.
class CandidateVocabulary {
 public:
  CandidateVocabulary() = default;

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::size_t embedding_index(std::size_t i) const { return embedding_rows_[i]; }
  std::uint64_t frequency(std::size_t i) const { return frequencies_[i]; }
  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

 private:
  friend CandidateVocabulary build_candidates(const EmbeddingSpace&,
                                              const FrequencyTable&);
  std::vector<std::string> words_;
  std::vector<std::size_t> embedding_rows_;
  std::vector<std::uint64_t> frequencies_;
};

// Vector file: optional "<count> <dim>" header, then "word v1 ... vdim".
// Throws IoError for a missing file, ParseError (with line) otherwise.
EmbeddingSpace load_embeddings(const std::filesystem::path& path);

// TSV "word<TAB>count".
FrequencyTable load_frequencies(const std::filesystem::path& path);

// Throws Error on empty input or empty intersection.
CandidateVocabulary build_candidates(const EmbeddingSpace& space,
                                     const FrequencyTable& freq);

// Euclidean distance. Throws UnknownWord.
double distance(const EmbeddingSpace& space, std::string_view w1,
                std::string_view w2);

// The k candidates closest to `query`, skipping the query itself and any
// word in `exclude`. Ascending by distance, ties lexicographic.
std::vector<std::string> nearest_neighbors(const EmbeddingSpace& space,
                                           const CandidateVocabulary& candidates,
                                           std::string_view query, std::size_t k,
                                           const WordSet& exclude = {});

// Mask variant used on hot paths: excluded[i] != 0 removes candidate i.
std::vector<std::size_t> nearest_candidate_indices(
    const EmbeddingSpace& space, const CandidateVocabulary& candidates,
    std::size_t query_row, std::size_t k, std::span<const std::uint8_t> excluded);

// Everything the arms and analysis read. Immutable once built, so one
// instance can be shared by all sessions.
struct WordStore {
  EmbeddingSpace space;
  FrequencyTable frequencies;
  CandidateVocabulary candidates;

  static WordStore load(const std::filesystem::path& embeddings,
                        const std::filesystem::path& frequencies);
  static WordStore from(EmbeddingSpace space, FrequencyTable frequencies);
};

}  // namespace hintbandit
