#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hintbandit {

// Porter (1980) suffix stripper, following the rules of the reference C
// implementation. Expects a lowercase ASCII word; anything else is returned
// unchanged.
std::string porter_stem(std::string_view word);

// One surviving token of a phrase. `type` is the fully normalized form used
// for counting; `lemma` is the pre-stemming form, kept because stems are
// often not themselves words and cannot be looked up in a vocabulary.
struct NormalizedToken {
  std::string lemma;
  std::string type;
};

// Case folding, tokenization, stopword removal, lemmatization and stemming.
//
// Stage order: lowercase -> split on non-alphanumeric ASCII -> drop
// stopwords -> map irregular forms through the lemma table -> Porter stem.
// Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
class TextNormalizer {
 public:
  // Built from the data files shipped in data/ (compiled in).
  static const TextNormalizer& builtin();
  static TextNormalizer from_files(const std::filesystem::path& stopwords,
                                   const std::filesystem::path& lemmas);
  static TextNormalizer from_text(std::string_view stopwords, std::string_view lemmas);

  std::vector<NormalizedToken> analyze(std::string_view phrase) const;
  // Types only, in phrase order; repeats kept.
  std::vector<std::string> normalize(std::string_view phrase) const;

  bool is_stopword(std::string_view token) const;
  std::string lemmatize(std::string_view token) const;

  static std::vector<std::string> tokenize(std::string_view phrase);

 private:
  std::unordered_set<std::string> stopwords_;
  std::unordered_map<std::string, std::string> lemmas_;
};

// normalize_phrase using the builtin tables.
std::vector<std::string> normalize_phrase(std::string_view phrase);

}  // namespace hintbandit
