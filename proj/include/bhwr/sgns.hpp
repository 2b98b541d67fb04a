#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bhwr/math.hpp"
#include "bhwr/pairs.hpp"
#include "bhwr/rng.hpp"

namespace bhwr {

struct SgnsConfig {
  int k = 50;
  int epochs = 15;
  double learning_rate = 0.025;
  std::uint64_t seed = 42;
  // Redraw the negative sets before every epoch after the first; the
  // default keeps the dataset's one-shot negatives for every epoch.
  bool resample_negatives = false;

  void validate() const {
    if (k < 1) throw std::invalid_argument("sgns config: k must be >= 1");
    if (epochs < 1) throw std::invalid_argument("sgns config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("sgns config: learning rate must be positive");
    }
  }
};

// Point-estimate skip-gram embeddings: one context row and one target row
// per word. Rows stay finite by construction (the loss is checked each
// epoch during training).
struct PointEmbeddings {
  Eigen::MatrixXd u;  // contexts, N_W x k
  Eigen::MatrixXd v;  // targets, N_W x k
  SgnsConfig config;

  std::int64_t rows() const { return u.rows(); }
  int dim() const { return static_cast<int>(u.cols()); }
};

// Gradients of -log sigmoid(label * u.v) for one sample.
struct SampleGradients {
  Eigen::VectorXd grad_u;
  Eigen::VectorXd grad_v;
};

inline SampleGradients sgns_sample_gradients(const Eigen::VectorXd& u,
                                             const Eigen::VectorXd& v,
                                             int label) {
  if (label != 1 && label != -1) {
    throw std::invalid_argument("sgns gradient: label must be +1 or -1");
  }
  const double d = static_cast<double>(label);
  const double g = (sigmoid(d * u.dot(v)) - 1.0) * d;
  return {g * v, g * u};
}

// Negative log-likelihood of the counted pairs under the point model:
// -sum n_pos log sigmoid(u.v) - sum n_neg log sigmoid(-u.v).
inline double sgns_loss(const PointEmbeddings& emb, const PairDataset& pairs) {
  double loss = 0.0;
  for (const PairRecord& r : pairs.records) {
    if (r.i >= emb.rows() || r.j >= emb.rows()) {
      throw std::invalid_argument("sgns loss: pair index out of range");
    }
    const double x = emb.u.row(r.i).dot(emb.v.row(r.j));
    loss -= r.n_pos * log_sigmoid(x) + r.n_neg * log_sigmoid(-x);
  }
  return loss;
}

// Seeded SGD over a shuffled expansion of the counted pairs. Entries start
// uniform in [-0.5/k, 0.5/k] (contexts first, then targets, row-major); the
// step size decays linearly over all steps with a 1e-4 floor. Deterministic
// given the seed.
inline PointEmbeddings train_sgns(const PairDataset& pairs,
                                  const Vocabulary& vocab,
                                  const SgnsConfig& config) {
  config.validate();
  if (pairs.records.empty()) {
    throw std::invalid_argument("train_sgns: empty pair dataset");
  }
  const std::size_t vocab_size = vocab.size();
  if (vocab_size < 1) {
    throw std::invalid_argument("train_sgns: empty vocabulary");
  }

  const int k = config.k;
  PointEmbeddings emb;
  emb.config = config;
  Rng rng(config.seed);
  emb.u.resize(static_cast<std::int64_t>(vocab_size), k);
  emb.v.resize(static_cast<std::int64_t>(vocab_size), k);
  for (std::int64_t r = 0; r < emb.u.rows(); ++r) {
    for (int c = 0; c < k; ++c) emb.u(r, c) = (rng.uniform() - 0.5) / k;
  }
  for (std::int64_t r = 0; r < emb.v.rows(); ++r) {
    for (int c = 0; c < k; ++c) emb.v(r, c) = (rng.uniform() - 0.5) / k;
  }

  struct Sample {
    std::uint32_t i;
    std::uint32_t j;
    std::int8_t label;
  };
  const auto expand = [vocab_size](const PairDataset& d) {
    std::vector<Sample> samples;
    samples.reserve(d.total_pos + d.total_neg);
    for (const PairRecord& r : d.records) {
      if (r.i >= vocab_size || r.j >= vocab_size) {
        throw std::invalid_argument("train_sgns: pair index out of range");
      }
      for (std::uint32_t c = 0; c < r.n_pos; ++c) samples.push_back({r.i, r.j, 1});
      for (std::uint32_t c = 0; c < r.n_neg; ++c) samples.push_back({r.i, r.j, -1});
    }
    return samples;
  };
  std::vector<Sample> samples = expand(pairs);
  PairDataset resampled;  // active only when negatives are redrawn per epoch

  const double total_steps =
      static_cast<double>(config.epochs) * static_cast<double>(samples.size());
  const double lr0 = config.learning_rate;
  double step = 0.0;
  Eigen::RowVectorXd gu(k), gv(k);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.resample_negatives && epoch > 0) {
      resampled = resample_negatives(pairs, vocab, epoch);
      samples = expand(resampled);
    }
    rng.shuffle(samples);
    for (const Sample& s : samples) {
      const double lr = lr0 * std::max(1.0 - step / total_steps, 1e-4);
      const double d = static_cast<double>(s.label);
      const double x = emb.u.row(s.i).dot(emb.v.row(s.j));
      const double g = (sigmoid(d * x) - 1.0) * d;
      gu = g * emb.v.row(s.j);
      gv = g * emb.u.row(s.i);
      emb.u.row(s.i) -= lr * gu;
      emb.v.row(s.j) -= lr * gv;
      step += 1.0;
    }
    const PairDataset& active =
        (config.resample_negatives && epoch > 0) ? resampled : pairs;
    const double loss = sgns_loss(emb, active);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train_sgns: loss diverged (non-finite) at epoch " +
                               std::to_string(epoch + 1));
    }
  }
  return emb;
}

namespace detail {

template <typename A, typename B>
double cosine_or_zero(const Eigen::MatrixBase<A>& a,
                      const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace detail

// Cosine of the context rows and cosine of the target rows, averaged.
// A zero row contributes 0 to its cosine by convention.
inline double sg_similarity(const PointEmbeddings& emb, std::uint32_t i,
                            std::uint32_t j) {
  if (i >= emb.rows() || j >= emb.rows()) {
    throw std::out_of_range("sg_similarity: word index out of range");
  }
  const double cu = detail::cosine_or_zero(emb.u.row(i), emb.u.row(j));
  const double cv = detail::cosine_or_zero(emb.v.row(i), emb.v.row(j));
  return 0.5 * (cu + cv);
}

struct SgNeighbor {
  std::uint32_t index = 0;
  double score = 0.0;
};

// Top-n words by sg_similarity against the query, excluding the query
// itself. Ties broken by ascending index.
inline std::vector<SgNeighbor> sg_nearest_neighbors(const PointEmbeddings& emb,
                                                    std::uint32_t query,
                                                    std::size_t n) {
  if (query >= emb.rows()) {
    throw std::out_of_range("sg_nearest_neighbors: word index out of range");
  }
  std::vector<SgNeighbor> all;
  all.reserve(static_cast<std::size_t>(emb.rows()) - 1);
  for (std::uint32_t j = 0; j < emb.rows(); ++j) {
    if (j == query) continue;
    all.push_back({j, sg_similarity(emb, query, j)});
  }
  const std::size_t take = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take),
                    all.end(), [](const SgNeighbor& a, const SgNeighbor& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.index < b.index;
                    });
  all.resize(take);
  return all;
}

}  // namespace bhwr
