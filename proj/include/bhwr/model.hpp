#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bhwr/gaussian.hpp"
#include "bhwr/rng.hpp"

namespace bhwr {

struct Hyperparams {
  double tau_u = 0.1;     // leaf context precision
  double tau_v = 0.1;     // leaf target precision
  double tau_hu = 0.001;  // parent context precision
  double tau_hv = 0.001;  // parent target precision

  void validate() const {
    if (!(tau_u > 0.0) || !(tau_v > 0.0) || !(tau_hu > 0.0) || !(tau_hv > 0.0)) {
      throw std::invalid_argument("hyperparams: precisions must be positive");
    }
  }
};

enum class XiMode {
  paper,  // diagonal-moment formula; ignores mean cross-terms
  exact,  // sqrt of the exact second moment of the dot product
};

struct TrainConfig {
  int k = 50;
  int max_sweeps = 50;
  double rel_elbo_tol = 1e-5;
  XiMode xi_mode = XiMode::exact;
  std::uint64_t seed = 42;
  // 0 = sequential sweeps (the default; coordinate ascent, monotone ELBO).
  // >= 1 = Jacobi-style: each family updated in parallel against a frozen
  // snapshot of the others. Deterministic, but monotonicity is not guaranteed.
  int jacobi_threads = 0;

  void validate() const {
    if (k < 1) throw std::invalid_argument("train config: k must be >= 1");
    if (max_sweeps < 1) {
      throw std::invalid_argument("train config: max_sweeps must be >= 1");
    }
    if (!(rel_elbo_tol > 0.0)) {
      throw std::invalid_argument("train config: tolerance must be positive");
    }
    if (jacobi_threads < 0) {
      throw std::invalid_argument("train config: negative thread count");
    }
  }
};

enum class LeafFamily { context_u, target_v };
enum class ParentFamily { context_hu, target_hv };

// The four factor families, one factor per vocabulary index: leaf context U,
// leaf target V (full covariance), parent context H^u and parent target H^v
// (isotropic).
struct ModelState {
  std::vector<GaussianFactor> u;
  std::vector<GaussianFactor> v;
  std::vector<GaussianFactor> hu;
  std::vector<GaussianFactor> hv;
  Hyperparams hyper;
  int k = 0;
  std::uint64_t seed = 0;
  int sweeps_run = 0;
  double final_elbo = 0.0;

  std::size_t size() const { return u.size(); }

  const std::vector<GaussianFactor>& leaf(LeafFamily f) const {
    return f == LeafFamily::context_u ? u : v;
  }
  std::vector<GaussianFactor>& leaf(LeafFamily f) {
    return f == LeafFamily::context_u ? u : v;
  }
  const std::vector<GaussianFactor>& parent(ParentFamily f) const {
    return f == ParentFamily::context_hu ? hu : hv;
  }
  std::vector<GaussianFactor>& parent(ParentFamily f) {
    return f == ParentFamily::context_hu ? hu : hv;
  }
};

// Means drawn i.i.d. standard normal from the seeded stream, in family order
// U, V, H^u, H^v, ascending index, coordinate 0..k-1; every precision starts
// at the identity. Deterministic given the seed.
inline ModelState init_state(std::size_t vocab_size, const TrainConfig& config,
                             const Hyperparams& hyper = {}) {
  if (vocab_size < 1) {
    throw std::invalid_argument("init_state: vocabulary must be non-empty");
  }
  config.validate();
  hyper.validate();

  ModelState state;
  state.hyper = hyper;
  state.k = config.k;
  state.seed = config.seed;
  Rng rng(config.seed);

  auto draw_mean = [&] {
    Eigen::VectorXd m(config.k);
    for (int d = 0; d < config.k; ++d) m(d) = rng.normal();
    return m;
  };

  state.u.reserve(vocab_size);
  state.v.reserve(vocab_size);
  state.hu.reserve(vocab_size);
  state.hv.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    state.u.push_back(GaussianFactor::standard_full(draw_mean()));
  }
  for (std::size_t i = 0; i < vocab_size; ++i) {
    state.v.push_back(GaussianFactor::standard_full(draw_mean()));
  }
  for (std::size_t i = 0; i < vocab_size; ++i) {
    state.hu.push_back(GaussianFactor::isotropic(draw_mean(), 1.0));
  }
  for (std::size_t i = 0; i < vocab_size; ++i) {
    state.hv.push_back(GaussianFactor::isotropic(draw_mean(), 1.0));
  }
  return state;
}

}  // namespace bhwr
