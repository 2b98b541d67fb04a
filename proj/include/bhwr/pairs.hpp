#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bhwr/binary.hpp"
#include "bhwr/rng.hpp"
#include "bhwr/vocabulary.hpp"

namespace bhwr {

struct SamplerConfig {
  std::uint32_t c_max = 5;        // window size cap; actual window ~ U{1..c_max}
  double subsample_t = 1e-4;      // 0 disables subsampling
  double neg_ratio = 1.0;         // negatives per positive, per center
  double unigram_power = 0.75;
  std::uint32_t min_count = 1;
  std::uint64_t seed = 42;

  void validate() const {
    if (c_max < 1) throw std::invalid_argument("sampler: c_max must be >= 1");
    if (!(unigram_power > 0.0) || unigram_power > 1.0) {
      throw std::invalid_argument("sampler: unigram_power outside (0, 1]");
    }
    if (subsample_t < 0.0) {
      throw std::invalid_argument("sampler: negative subsample_t");
    }
    if (neg_ratio < 0.0) {
      throw std::invalid_argument("sampler: negative neg_ratio");
    }
    if (min_count < 1) {
      throw std::invalid_argument("sampler: min_count must be >= 1");
    }
  }
};

struct PairRecord {
  std::uint32_t i = 0;      // center word index
  std::uint32_t j = 0;      // context / noise word index
  std::uint32_t n_pos = 0;  // positive co-occurrence count
  std::uint32_t n_neg = 0;  // negative (noise) count
};

// Aggregated positive/negative co-occurrence counts. Records are kept sorted
// by (i, j); no record has both counts zero.
struct PairDataset {
  std::vector<PairRecord> records;
  std::uint64_t total_pos = 0;   // sum of n_pos
  std::uint64_t total_neg = 0;   // sum of n_neg
  std::uint64_t oov_skipped = 0; // tokens not in the vocabulary, dropped
  SamplerConfig config;

  bool empty() const { return records.empty(); }
};

namespace detail {

// Inverse-CDF sampler over an explicit probability table.
class CdfSampler {
 public:
  explicit CdfSampler(const std::vector<double>& probs) : cdf_(probs.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
  }

  std::uint32_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint32_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

inline std::vector<std::uint32_t> index_stream(std::span<const std::string> tokens,
                                               const Vocabulary& vocab,
                                               std::uint64_t& oov_skipped) {
  std::vector<std::uint32_t> stream;
  stream.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const auto idx = vocab.find(tok);
    if (idx < 0) {
      ++oov_skipped;
    } else {
      stream.push_back(static_cast<std::uint32_t>(idx));
    }
  }
  return stream;
}

// Independently deletes tokens with probability 1 - keep_probability. Tokens
// with keep probability 1 consume no randomness.
inline void subsample_stream(std::vector<std::uint32_t>& stream,
                             const Vocabulary& vocab, double t, Rng& rng) {
  if (t <= 0.0) return;
  std::size_t out = 0;
  for (std::size_t p = 0; p < stream.size(); ++p) {
    const double keep = keep_probability(vocab.relative_frequency(stream[p]), t);
    if (keep >= 1.0 || rng.uniform() < keep) {
      stream[out++] = stream[p];
    }
  }
  stream.resize(out);
}

}  // namespace detail

// Builds the aggregated pair dataset: for each surviving center token, draw a
// window size uniform in {1..c_max}, emit a positive pair per in-window
// neighbor, then draw neg_ratio negatives per positive from the unigram^power
// table. Fully deterministic given (tokens, config).
inline PairDataset build_pair_dataset(std::span<const std::string> tokens,
                                      const Vocabulary& vocab,
                                      const SamplerConfig& config) {
  config.validate();
  PairDataset out;
  out.config = config;
  if (tokens.empty()) {
    return out;
  }

  Rng rng(config.seed);
  auto stream = detail::index_stream(tokens, vocab, out.oov_skipped);
  detail::subsample_stream(stream, vocab, config.subsample_t, rng);

  const detail::CdfSampler noise(negative_distribution(vocab, config.unigram_power));

  std::map<std::pair<std::uint32_t, std::uint32_t>,
           std::pair<std::uint64_t, std::uint64_t>>
      agg;
  const std::size_t length = stream.size();
  for (std::size_t p = 0; p < length; ++p) {
    const std::uint32_t center = stream[p];
    const auto window = static_cast<std::size_t>(1 + rng.below(config.c_max));
    const std::size_t lo = p >= window ? p - window : 0;
    const std::size_t hi = std::min(length - 1, p + window);
    std::uint64_t positives = 0;
    for (std::size_t q = lo; q <= hi; ++q) {
      if (q == p) continue;
      ++agg[{center, stream[q]}].first;
      ++positives;
    }
    out.total_pos += positives;
    const auto negatives = static_cast<std::uint64_t>(
        std::llround(config.neg_ratio * static_cast<double>(positives)));
    for (std::uint64_t n = 0; n < negatives; ++n) {
      ++agg[{center, noise.draw(rng)}].second;
    }
    out.total_neg += negatives;
  }

  out.records.reserve(agg.size());
  for (const auto& [key, counts] : agg) {
    PairRecord rec;
    rec.i = key.first;
    rec.j = key.second;
    rec.n_pos = static_cast<std::uint32_t>(counts.first);
    rec.n_neg = static_cast<std::uint32_t>(counts.second);
    out.records.push_back(rec);
  }
  return out;
}

// Redraws the negative halves of every record for a given epoch, keeping the
// positives fixed. Epoch 0 with the original config reproduces the negatives
// of build_pair_dataset only in count, not identity; this exists for
// experiments that want fresh noise per epoch.
inline PairDataset resample_negatives(const PairDataset& dataset,
                                      const Vocabulary& vocab,
                                      std::uint64_t epoch) {
  PairDataset out;
  out.config = dataset.config;
  out.oov_skipped = dataset.oov_skipped;
  out.total_pos = dataset.total_pos;

  Rng rng(dataset.config.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
  const detail::CdfSampler noise(
      negative_distribution(vocab, dataset.config.unigram_power));

  std::map<std::pair<std::uint32_t, std::uint32_t>,
           std::pair<std::uint64_t, std::uint64_t>>
      agg;
  for (const auto& rec : dataset.records) {
    if (rec.n_pos > 0) {
      agg[{rec.i, rec.j}].first = rec.n_pos;
    }
  }
  // Per-center negative budgets mirror construction: neg_ratio per positive.
  std::map<std::uint32_t, std::uint64_t> center_pos;
  for (const auto& rec : dataset.records) {
    center_pos[rec.i] += rec.n_pos;
  }
  for (const auto& [center, positives] : center_pos) {
    const auto negatives = static_cast<std::uint64_t>(std::llround(
        dataset.config.neg_ratio * static_cast<double>(positives)));
    for (std::uint64_t n = 0; n < negatives; ++n) {
      ++agg[{center, noise.draw(rng)}].second;
    }
    out.total_neg += negatives;
  }

  for (const auto& [key, counts] : agg) {
    PairRecord rec;
    rec.i = key.first;
    rec.j = key.second;
    rec.n_pos = static_cast<std::uint32_t>(counts.first);
    rec.n_neg = static_cast<std::uint32_t>(counts.second);
    out.records.push_back(rec);
  }
  return out;
}

inline constexpr char kPairCacheMagic[] = "BHWRPD1";
inline constexpr std::uint32_t kPairCacheVersion = 1;

inline void encode_vocabulary(BinaryWriter& w, const Vocabulary& vocab) {
  w.u64(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    w.str(vocab.words[i]);
    w.u64(vocab.counts[i]);
  }
  w.u64(vocab.total_tokens);
  w.u64(vocab.dropped_tokens);
}

inline Vocabulary decode_vocabulary(BinaryReader& r) {
  Vocabulary vocab;
  const std::uint64_t n = r.u64();
  vocab.words.reserve(n);
  vocab.counts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string word = r.str();
    vocab.index.emplace(word, static_cast<std::uint32_t>(i));
    vocab.words.push_back(std::move(word));
    vocab.counts.push_back(r.u64());
  }
  vocab.total_tokens = r.u64();
  vocab.dropped_tokens = r.u64();
  return vocab;
}

// Cache layout: magic, version, vocabulary, sampler config, 64-bit totals,
// then (i, j, n_pos, n_neg) u32 records sorted by (i, j). Little-endian.
inline void save_pair_cache(const PairDataset& dataset, const Vocabulary& vocab,
                            const std::string& path) {
  BinaryWriter w;
  w.bytes(kPairCacheMagic);
  w.u32(kPairCacheVersion);
  encode_vocabulary(w, vocab);
  w.u32(dataset.config.c_max);
  w.u32(dataset.config.min_count);
  w.f64(dataset.config.subsample_t);
  w.f64(dataset.config.neg_ratio);
  w.f64(dataset.config.unigram_power);
  w.u64(dataset.config.seed);
  w.u64(dataset.total_pos);
  w.u64(dataset.total_neg);
  w.u64(dataset.oov_skipped);
  w.u64(dataset.records.size());
  for (const auto& rec : dataset.records) {
    w.u32(rec.i);
    w.u32(rec.j);
    w.u32(rec.n_pos);
    w.u32(rec.n_neg);
  }
  atomic_write_file(path, w.buffer());
}

inline std::pair<PairDataset, Vocabulary> load_pair_cache(const std::string& path) {
  const std::string data = read_file(path);
  BinaryReader r(data);
  if (r.bytes(sizeof(kPairCacheMagic) - 1) != kPairCacheMagic) {
    throw std::runtime_error("not a pair cache file (bad magic): " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kPairCacheVersion) {
    throw std::runtime_error("unsupported pair cache version " +
                             std::to_string(version) + ": " + path);
  }
  Vocabulary vocab = decode_vocabulary(r);
  PairDataset dataset;
  dataset.config.c_max = r.u32();
  dataset.config.min_count = r.u32();
  dataset.config.subsample_t = r.f64();
  dataset.config.neg_ratio = r.f64();
  dataset.config.unigram_power = r.f64();
  dataset.config.seed = r.u64();
  dataset.total_pos = r.u64();
  dataset.total_neg = r.u64();
  dataset.oov_skipped = r.u64();
  const std::uint64_t n_records = r.u64();
  dataset.records.reserve(n_records);
  for (std::uint64_t n = 0; n < n_records; ++n) {
    PairRecord rec;
    rec.i = r.u32();
    rec.j = r.u32();
    rec.n_pos = r.u32();
    rec.n_neg = r.u32();
    if (rec.i >= vocab.size() || rec.j >= vocab.size()) {
      throw std::runtime_error("pair cache record outside vocabulary: " + path);
    }
    dataset.records.push_back(rec);
  }
  if (!r.exhausted()) {
    throw std::runtime_error("trailing bytes in pair cache: " + path);
  }
  return {std::move(dataset), std::move(vocab)};
}

}  // namespace bhwr
