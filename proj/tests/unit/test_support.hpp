#pragma once

// Small fixtures shared by the unit tests.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "hintbandit/embedding_store.hpp"
#include "hintbandit/rng.hpp"

namespace hbtest {

struct ToyWord {
  std::string word;
  std::vector<float> vec;
  std::uint64_t freq;  // 0 = not in the frequency table
};

inline hintbandit::WordStore make_store(const std::vector<ToyWord>& words) {
  hintbandit::EmbeddingSpace space(words.front().vec.size());
  hintbandit::FrequencyTable freq;
  for (const auto& w : words) {
    space.add(w.word, w.vec);
    if (w.freq) freq.add(w.word, w.freq);
  }
  return hintbandit::WordStore::from(std::move(space), std::move(freq));
}

// n random words "w0000".."w{n-1}" in `dim` dimensions, uniform in [-1, 1],
// with frequencies 1..1000.
inline hintbandit::WordStore random_store(std::size_t n, std::size_t dim,
                                          std::uint64_t seed) {
  hintbandit::Rng rng(seed);
  std::vector<ToyWord> words;
  for (std::size_t i = 0; i < n; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "w%04zu", i);
    ToyWord w{name, std::vector<float>(dim), 1 + rng.uniform_index(1000)};
    for (auto& x : w.vec) x = static_cast<float>(rng.uniform01() * 2.0 - 1.0);
    words.push_back(std::move(w));
  }
  return make_store(words);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hintbandit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string test_data(const std::string& name) {
  return std::string(HB_TEST_DATA_DIR) + "/" + name;
}

}  // namespace hbtest
