#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bhwr/gaussian.hpp"
#include "bhwr/math.hpp"
#include "bhwr/model.hpp"

namespace bhwr {

// Mean and variance of a^T b for independent Gaussians a, b.
struct DotMoments {
  double mean = 0.0;
  double var = 0.0;

  double second_moment() const { return var + mean * mean; }
};

inline DotMoments dot_moments(const GaussianFactor& a, const GaussianFactor& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dot_moments: dimension mismatch");
  }
  DotMoments m;
  m.mean = a.mean().dot(b.mean());
  m.var = GaussianFactor::trace_product(a, b) + b.cov_quadratic(a.mean()) +
          a.cov_quadratic(b.mean());
  return m;
}

namespace detail {

// Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1): nodes are pre-scaled by
// sqrt(2) and weights normalized to sum to one, so the expectation is just
// sum_i weight[i] * f(node[i]). Computed once via Golub-Welsch.
struct HermiteRule {
  static constexpr int order = 61;
  std::array<double, order> node;
  std::array<double, order> weight;
};

inline const HermiteRule& hermite_rule() {
  static const HermiteRule rule = [] {
    constexpr int n = HermiteRule::order;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const double off = std::sqrt(i / 2.0);
      jacobi(i, i - 1) = off;
      jacobi(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    HermiteRule r;
    for (int i = 0; i < n; ++i) {
      r.node[i] = std::sqrt(2.0) * solver.eigenvalues()(i);
      const double v0 = solver.eigenvectors()(0, i);
      r.weight[i] = v0 * v0;
    }
    return r;
  }();
  return rule;
}

}  // namespace detail

// Gaussian-integrated sigmoid E[sigmoid(x)], x ~ N(mean, var), by fixed-order
// Gauss-Hermite quadrature. The weights are positive and the nodes symmetric,
// so the result stays in (0,1), is strictly increasing in the mean, and is
// exactly 1/2 at mean zero. Zero variance short-circuits to the plain sigmoid.
inline double predictive_prob(double mean, double var) {
  if (!(var >= 0.0)) {
    throw std::invalid_argument("predictive_prob: negative variance");
  }
  if (var == 0.0) return sigmoid(mean);
  const auto& rule = detail::hermite_rule();
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (int i = 0; i < detail::HermiteRule::order; ++i) {
    acc += rule.weight[i] * sigmoid(mean + sd * rule.node[i]);
  }
  return acc;
}

inline double predictive_prob(const DotMoments& m) {
  return predictive_prob(m.mean, m.var);
}

// Probability that word j appears in the context window of word i: the
// integrated sigmoid of u_i . v_j. Asymmetric in general.
inline double co_occurrence_prob(const ModelState& state, std::uint32_t i,
                                 std::uint32_t j) {
  if (i >= state.size() || j >= state.size()) {
    throw std::out_of_range("co_occurrence_prob: word index out of range");
  }
  return predictive_prob(dot_moments(state.u[i], state.v[j]));
}

// Symmetric similarity: the integrated sigmoids of u_i . u_j and v_i . v_j,
// averaged. Within-family dots, not the cross co-occurrence score.
inline double pair_similarity(const ModelState& state, std::uint32_t i,
                              std::uint32_t j) {
  if (i >= state.size() || j >= state.size()) {
    throw std::out_of_range("pair_similarity: word index out of range");
  }
  const double su = predictive_prob(dot_moments(state.u[i], state.u[j]));
  const double sv = predictive_prob(dot_moments(state.v[i], state.v[j]));
  return 0.5 * (su + sv);
}

struct Neighbor {
  std::uint32_t index = 0;
  double score = 0.0;
};

// Top-n words by pair_similarity against the query, excluding the query
// itself. Ties broken by ascending index so results are deterministic.
inline std::vector<Neighbor> nearest_neighbors(const ModelState& state,
                                               std::uint32_t query,
                                               std::size_t n) {
  if (query >= state.size()) {
    throw std::out_of_range("nearest_neighbors: word index out of range");
  }
  std::vector<Neighbor> all;
  all.reserve(state.size() > 0 ? state.size() - 1 : 0);
  for (std::uint32_t j = 0; j < state.size(); ++j) {
    if (j == query) continue;
    all.push_back({j, pair_similarity(state, query, j)});
  }
  const std::size_t take = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take),
                    all.end(), [](const Neighbor& a, const Neighbor& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.index < b.index;
                    });
  all.resize(take);
  return all;
}

}  // namespace bhwr
