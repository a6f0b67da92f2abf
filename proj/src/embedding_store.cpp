#include "hintbandit/embedding_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hintbandit/errors.hpp"

namespace hintbandit {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string fold_case(std::string_view word) {
  std::string out(word);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// -- EmbeddingSpace -----------------------------------------------------------

EmbeddingSpace::EmbeddingSpace(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error("embedding dimension must be positive");
}

bool EmbeddingSpace::add(std::string_view word, std::span<const float> vector) {
  if (word.empty()) throw Error("embedding key must be nonempty");
  if (std::any_of(word.begin(), word.end(), is_space)) {
    throw Error("embedding key contains whitespace: '" + std::string(word) + "'");
  }
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw Error("dimension mismatch for '" + std::string(word) + "': expected " +
                std::to_string(dim_) + ", got " + std::to_string(vector.size()));
  }
  std::string key = fold_case(word);
  if (index_.count(key)) return false;
  index_.emplace(key, words_.size());
  words_.push_back(std::move(key));
  data_.insert(data_.end(), vector.begin(), vector.end());
  return true;
}

bool EmbeddingSpace::contains(std::string_view word) const {
  return index_of(word).has_value();
}

std::optional<std::size_t> EmbeddingSpace::index_of(std::string_view word) const {
  auto it = index_.find(fold_case(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingSpace::vector(std::string_view word) const {
  auto idx = index_of(word);
  if (!idx) throw UnknownWord(std::string(word));
  return vector_at(*idx);
}

double EmbeddingSpace::squared_distance_at(std::size_t a, std::size_t b) const {
  const float* x = data_.data() + a * dim_;
  const float* y = data_.data() + b * dim_;
  double sum = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
  }
  return sum;
}

double EmbeddingSpace::distance_at(std::size_t a, std::size_t b) const {
  return std::sqrt(squared_distance_at(a, b));
}

// -- FrequencyTable -----------------------------------------------------------

void FrequencyTable::add(std::string_view word, std::uint64_t count) {
  if (word.empty()) throw Error("frequency key must be nonempty");
  if (count == 0) throw Error("frequency count must be positive for '" +
                              std::string(word) + "'");
  counts_[fold_case(word)] += count;
  total_ += count;
}

bool FrequencyTable::contains(std::string_view word) const {
  return counts_.count(fold_case(word)) > 0;
}

std::uint64_t FrequencyTable::count(std::string_view word) const {
  auto it = counts_.find(fold_case(word));
  if (it == counts_.end()) throw UnknownWord(std::string(word));
  return it->second;
}

// -- CandidateVocabulary ------------------------------------------------------

std::optional<std::size_t> CandidateVocabulary::find(std::string_view word) const {
  const std::string key = fold_case(word);
  auto it = std::lower_bound(words_.begin(), words_.end(), key);
  if (it == words_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - words_.begin());
}

CandidateVocabulary build_candidates(const EmbeddingSpace& space,
                                     const FrequencyTable& freq) {
  if (space.empty()) throw Error("embedding space is empty");
  if (freq.empty()) throw Error("frequency table is empty");
  std::vector<std::pair<std::string, std::size_t>> shared;
  for (std::size_t row = 0; row < space.size(); ++row) {
    if (freq.counts().count(space.word_at(row))) {
      shared.emplace_back(space.word_at(row), row);
    }
  }
  if (shared.empty()) {
    throw Error("embedding and frequency vocabularies do not intersect");
  }
  std::sort(shared.begin(), shared.end());
  CandidateVocabulary out;
  out.words_.reserve(shared.size());
  for (auto& [word, row] : shared) {
    out.frequencies_.push_back(freq.counts().at(word));
    out.embedding_rows_.push_back(row);
    out.words_.push_back(std::move(word));
  }
  return out;
}

// -- Loaders ------------------------------------------------------------------

EmbeddingSpace load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path.string());

  EmbeddingSpace space;
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared_dim = 0;
  std::vector<float> values;
  bool saw_row = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (!saw_row && line_no == 1 && fields.size() == 2) {
      std::size_t count = 0;
      if (parse_number(fields[0], count) && parse_number(fields[1], declared_dim)) {
        if (declared_dim == 0) throw ParseError("header declares dimension 0", line_no);
        continue;
      }
      declared_dim = 0;
    }
    if (fields.size() < 2) throw ParseError("row has no vector values", line_no);
    const std::size_t dim = fields.size() - 1;
    const std::size_t expected = declared_dim ? declared_dim : space.dim();
    if (expected != 0 && dim != expected) {
      throw ParseError("dimension mismatch: expected " + std::to_string(expected) +
                           ", got " + std::to_string(dim),
                       line_no);
    }
    values.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_number(fields[i + 1], values[i])) {
        throw ParseError("invalid number '" + std::string(fields[i + 1]) + "'", line_no);
      }
    }
    space.add(fields[0], values);
    saw_row = true;
  }
  if (!saw_row) throw ParseError("embedding file has no vectors: " + path.string());
  return space;
}

FrequencyTable load_frequencies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open frequency file: " + path.string());
  FrequencyTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected word<TAB>count", line_no);
    std::string_view word(line.data(), tab);
    std::string_view count_text(line.data() + tab + 1, line.size() - tab - 1);
    std::uint64_t count = 0;
    if (!parse_number(count_text, count) || count == 0) {
      throw ParseError("count must be a positive integer", line_no);
    }
    table.add(word, count);
  }
  if (table.empty()) throw ParseError("frequency file is empty: " + path.string());
  return table;
}

// -- Queries ------------------------------------------------------------------

double distance(const EmbeddingSpace& space, std::string_view w1,
                std::string_view w2) {
  auto a = space.index_of(w1);
  if (!a) throw UnknownWord(std::string(w1));
  auto b = space.index_of(w2);
  if (!b) throw UnknownWord(std::string(w2));
  return space.distance_at(*a, *b);
}

std::vector<std::size_t> nearest_candidate_indices(
    const EmbeddingSpace& space, const CandidateVocabulary& candidates,
    std::size_t query_row, std::size_t k, std::span<const std::uint8_t> excluded) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    const std::size_t row = candidates.embedding_index(i);
    if (row == query_row) continue;
    scored.emplace_back(space.distance_at(query_row, row), i);
  }
  // Candidate indices are in lexicographic order, so pair ordering gives the
  // distance-then-word tie-break directly.
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<std::string> nearest_neighbors(const EmbeddingSpace& space,
                                           const CandidateVocabulary& candidates,
                                           std::string_view query, std::size_t k,
                                           const WordSet& exclude) {
  auto row = space.index_of(query);
  if (!row) throw UnknownWord(std::string(query));
  if (k == 0) throw Error("k must be positive");
  std::vector<std::uint8_t> mask(candidates.size(), 0);
  for (const auto& word : exclude) {
    if (auto i = candidates.find(word)) mask[*i] = 1;
  }
  std::vector<std::string> out;
  for (std::size_t i : nearest_candidate_indices(space, candidates, *row, k, mask)) {
    out.push_back(candidates.word(i));
  }
  return out;
}

// -- WordStore ----------------------------------------------------------------

WordStore WordStore::load(const std::filesystem::path& embeddings,
                          const std::filesystem::path& frequencies) {
  return from(load_embeddings(embeddings), load_frequencies(frequencies));
}

WordStore WordStore::from(EmbeddingSpace space, FrequencyTable frequencies) {
  WordStore store;
  store.candidates = build_candidates(space, frequencies);
  store.space = std::move(space);
  store.frequencies = std::move(frequencies);
  return store;
}

}  // namespace hintbandit
