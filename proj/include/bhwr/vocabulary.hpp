#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bhwr {

// Dense word index space. Indices are assigned by descending corpus count,
// ties broken lexicographically, so the same corpus always yields the same
// numbering. Words appended later (e.g. taxonomy-only words) keep count 0
// and sit behind the corpus words.
struct Vocabulary {
  std::vector<std::string> words;               // index -> word
  std::vector<std::uint64_t> counts;            // index -> raw corpus count
  std::unordered_map<std::string, std::uint32_t> index;  // word -> index
  std::uint64_t total_tokens = 0;               // all corpus tokens, kept + dropped
  std::uint64_t dropped_tokens = 0;             // mass of words below min_count

  std::size_t size() const { return words.size(); }

  bool contains(std::string_view word) const {
    return index.find(std::string(word)) != index.end();
  }

  std::uint32_t at(std::string_view word) const {
    auto it = index.find(std::string(word));
    if (it == index.end()) {
      throw std::out_of_range("word not in vocabulary: " + std::string(word));
    }
    return it->second;
  }

  std::int64_t find(std::string_view word) const {
    auto it = index.find(std::string(word));
    return it == index.end() ? -1 : static_cast<std::int64_t>(it->second);
  }

  std::uint64_t kept_tokens() const { return total_tokens - dropped_tokens; }

  // Relative frequency over kept tokens, the quantity subsampling works on.
  double relative_frequency(std::uint32_t i) const {
    return static_cast<double>(counts.at(i)) / static_cast<double>(kept_tokens());
  }

  // Appends a word with zero corpus count; returns its index.
  std::uint32_t append(const std::string& word) {
    auto it = index.find(word);
    if (it != index.end()) {
      return it->second;
    }
    const auto idx = static_cast<std::uint32_t>(words.size());
    words.push_back(word);
    counts.push_back(0);
    index.emplace(word, idx);
    return idx;
  }
};

inline Vocabulary build_vocabulary(std::span<const std::string> tokens,
                                   std::uint32_t min_count = 1) {
  if (tokens.empty()) {
    throw std::invalid_argument("build_vocabulary: empty corpus");
  }
  if (min_count < 1) {
    throw std::invalid_argument("build_vocabulary: min_count must be >= 1");
  }
  std::unordered_map<std::string, std::uint64_t> freq;
  freq.reserve(tokens.size() / 2 + 1);
  for (const auto& tok : tokens) {
    ++freq[tok];
  }

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  kept.reserve(freq.size());
  std::uint64_t dropped = 0;
  for (auto& [word, count] : freq) {
    if (count >= min_count) {
      kept.emplace_back(word, count);
    } else {
      dropped += count;
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.total_tokens = tokens.size();
  vocab.dropped_tokens = dropped;
  vocab.words.reserve(kept.size());
  vocab.counts.reserve(kept.size());
  for (auto& [word, count] : kept) {
    vocab.index.emplace(word, static_cast<std::uint32_t>(vocab.words.size()));
    vocab.words.push_back(std::move(word));
    vocab.counts.push_back(count);
  }
  return vocab;
}

// Whitespace-tokenized plain text as one flat token stream; no case folding
// or other normalization. Line breaks count as ordinary whitespace.
inline std::vector<std::string> read_corpus_tokens(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open corpus file: " + path);
  }
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) {
    tokens.push_back(tok);
  }
  return tokens;
}

// Probability of keeping a token of relative frequency f under subsampling
// threshold t: min(1, sqrt(t/f)). t = 0 turns subsampling off entirely.
inline double keep_probability(double f, double t) {
  if (!(f > 0.0) || f > 1.0) {
    throw std::logic_error("keep_probability: frequency outside (0, 1]");
  }
  if (t < 0.0) {
    throw std::invalid_argument("keep_probability: negative threshold");
  }
  if (t == 0.0) {
    return 1.0;
  }
  return std::min(1.0, std::sqrt(t / f));
}

// Unigram distribution raised to `power`, normalized. Zero-count entries
// (taxonomy-only words) get zero mass.
inline std::vector<double> negative_distribution(const Vocabulary& vocab,
                                                 double power = 0.75) {
  if (vocab.size() == 0) {
    throw std::invalid_argument("negative_distribution: empty vocabulary");
  }
  if (!(power > 0.0) || power > 1.0) {
    throw std::invalid_argument("negative_distribution: power outside (0, 1]");
  }
  std::vector<double> table(vocab.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    table[i] = std::pow(static_cast<double>(vocab.counts[i]), power);
    sum += table[i];
  }
  if (!(sum > 0.0)) {
    throw std::logic_error("negative_distribution: no positive counts");
  }
  for (auto& p : table) {
    p /= sum;
  }
  return table;
}

}  // namespace bhwr
