#include "hintbandit/text_normalizer.hpp"

#include <fstream>
#include <sstream>

#include "hintbandit/errors.hpp"

namespace hintbandit {

// Generated at configure time from data/stopwords.txt and data/lemmas.tsv.
extern const char* const kBuiltinStopwords;
extern const char* const kBuiltinLemmas;

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Yields non-comment, non-blank lines with trailing CR removed.
template <typename Fn>
void for_each_data_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    fn(line, line_no);
  }
}

}  // namespace

std::vector<std::string> TextNormalizer::tokenize(std::string_view phrase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : phrase) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TextNormalizer TextNormalizer::from_text(std::string_view stopwords,
                                         std::string_view lemmas) {
  TextNormalizer n;
  for_each_data_line(stopwords, [&](std::string_view line, std::size_t) {
    n.stopwords_.emplace(line);
  });
  for_each_data_line(lemmas, [&](std::string_view line, std::size_t line_no) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError("lemma table rows are form<TAB>lemma", line_no);
    }
    n.lemmas_.emplace(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
  });
  return n;
}

TextNormalizer TextNormalizer::from_files(const std::filesystem::path& stopwords,
                                          const std::filesystem::path& lemmas) {
  return from_text(read_file(stopwords), read_file(lemmas));
}

const TextNormalizer& TextNormalizer::builtin() {
  static const TextNormalizer instance = from_text(kBuiltinStopwords, kBuiltinLemmas);
  return instance;
}

bool TextNormalizer::is_stopword(std::string_view token) const {
  return stopwords_.count(std::string(token)) > 0;
}

std::string TextNormalizer::lemmatize(std::string_view token) const {
  auto it = lemmas_.find(std::string(token));
  return it == lemmas_.end() ? std::string(token) : it->second;
}

std::vector<NormalizedToken> TextNormalizer::analyze(std::string_view phrase) const {
  std::vector<NormalizedToken> out;
  for (auto& token : tokenize(phrase)) {
    if (is_stopword(token)) continue;
    std::string lemma = lemmatize(token);
    std::string type = porter_stem(lemma);
    out.push_back({std::move(lemma), std::move(type)});
  }
  return out;
}

std::vector<std::string> TextNormalizer::normalize(std::string_view phrase) const {
  std::vector<std::string> out;
  for (auto& token : analyze(phrase)) out.push_back(std::move(token.type));
  return out;
}

std::vector<std::string> normalize_phrase(std::string_view phrase) {
  return TextNormalizer::builtin().normalize(phrase);
}

}  // namespace hintbandit
