#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bhwr/gaussian.hpp"
#include "bhwr/math.hpp"
#include "bhwr/model.hpp"
#include "bhwr/pairs.hpp"
#include "bhwr/predictive.hpp"
#include "bhwr/taxonomy.hpp"

namespace bhwr {

// Per-word views of a PairDataset: by_u[i] holds the records keyed (i, .),
// by_v[j] the records keyed (., j). Edge lists inherit the dataset's sorted
// order, so accumulation order is deterministic.
struct PairAdjacency {
  struct Edge {
    std::uint32_t other = 0;
    std::uint32_t n_pos = 0;
    std::uint32_t n_neg = 0;
  };
  std::vector<std::vector<Edge>> by_u;
  std::vector<std::vector<Edge>> by_v;
};

inline PairAdjacency build_adjacency(const PairDataset& pairs,
                                     std::size_t vocab_size) {
  PairAdjacency adj;
  adj.by_u.resize(vocab_size);
  adj.by_v.resize(vocab_size);
  for (const PairRecord& r : pairs.records) {
    if (r.i >= vocab_size || r.j >= vocab_size) {
      throw std::invalid_argument("pair adjacency: word index out of range");
    }
    adj.by_u[r.i].push_back({r.j, r.n_pos, r.n_neg});
    adj.by_v[r.j].push_back({r.i, r.n_pos, r.n_neg});
  }
  return adj;
}

// Linearization point for the logistic bound on a pair. paper mode pairs up
// coordinate-wise second moments and ignores mean cross-terms; exact mode is
// sqrt(E[(u^T v)^2]), the optimal (bound-tightening) choice.
inline double xi_value(const GaussianFactor& a, const GaussianFactor& b,
                       XiMode mode) {
  if (mode == XiMode::exact) {
    return std::sqrt(dot_moments(a, b).second_moment());
  }
  const Eigen::VectorXd& ma = a.mean();
  const Eigen::VectorXd& mb = b.mean();
  double sum = 0.0;
  for (int m = 0; m < a.dim(); ++m) {
    sum += (a.cov_diagonal(m) + ma(m) * ma(m)) *
           (b.cov_diagonal(m) + mb(m) * mb(m));
  }
  return std::sqrt(sum);
}

namespace detail {

// Lazily materialized second moments E[z z^T] of one frozen family, valid
// for the duration of a single update phase.
class OuterCache {
 public:
  explicit OuterCache(const std::vector<GaussianFactor>& factors)
      : factors_(&factors), outers_(factors.size()), ready_(factors.size(), 0) {}

  const Eigen::MatrixXd& at(std::uint32_t j) {
    if (!ready_[j]) {
      outers_[j] = (*factors_)[j].expected_outer();
      ready_[j] = 1;
    }
    return outers_[j];
  }

 private:
  const std::vector<GaussianFactor>* factors_;
  std::vector<Eigen::MatrixXd> outers_;
  std::vector<char> ready_;
};

inline void check_state(const ModelState& state, const Taxonomy& taxonomy) {
  if (state.size() == 0) throw std::invalid_argument("empty model state");
  if (taxonomy.size() != state.size()) {
    throw std::invalid_argument("taxonomy size does not match model state");
  }
}

// Runs fn(i) for i in [0, n). With threads <= 1 the loop is inline;
// otherwise contiguous chunks go to worker threads. fn must write only to
// slot i, so the result never depends on the thread count.
template <typename Fn>
void parallel_for(std::uint32_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::uint32_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::uint32_t workers =
      std::min<std::uint32_t>(static_cast<std::uint32_t>(threads), n);
  const std::uint32_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::uint32_t w = 0; w < workers; ++w) {
    const std::uint32_t lo = w * chunk;
    const std::uint32_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::uint32_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Closed-form coordinate update of one leaf factor, holding everything else
// fixed. The bound's linearization points are refreshed from the current
// moments as each edge is consumed. A word with no counted pairs collapses
// to its prior N(prior_mean, tau^{-1} I) exactly, bit for bit.
inline GaussianFactor update_leaf(std::uint32_t i, LeafFamily family,
                                  const ModelState& state,
                                  const PairAdjacency& adj,
                                  const Taxonomy& taxonomy, XiMode mode,
                                  detail::OuterCache* cache = nullptr) {
  detail::check_state(state, taxonomy);
  if (i >= state.size()) throw std::out_of_range("update_leaf: index");

  const bool is_u = family == LeafFamily::context_u;
  const double tau = is_u ? state.hyper.tau_u : state.hyper.tau_v;
  const GaussianFactor& self = is_u ? state.u[i] : state.v[i];
  const std::vector<GaussianFactor>& opposite = is_u ? state.v : state.u;
  const std::vector<GaussianFactor>& anchors = is_u ? state.hu : state.hv;
  const std::vector<PairAdjacency::Edge>& edges =
      is_u ? adj.by_u[i] : adj.by_v[i];
  const int k = state.k;

  const Eigen::VectorXd prior = prior_mean(
      taxonomy, i, k, [&](std::uint32_t n) -> const Eigen::VectorXd& {
        return anchors[n].mean();
      });

  if (edges.empty()) {
    return GaussianFactor::full_isotropic(prior, tau);
  }

  Eigen::MatrixXd precision = tau * Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd linear = tau * prior;
  for (const PairAdjacency::Edge& e : edges) {
    const GaussianFactor& other = opposite[e.other];
    const double xi = xi_value(self, other, mode);
    const double total = static_cast<double>(e.n_pos) + e.n_neg;
    const double signed_count = static_cast<double>(e.n_pos) - e.n_neg;
    const double coeff = 2.0 * total * logistic_bound_lambda(xi);
    if (cache != nullptr) {
      precision += coeff * cache->at(e.other);
    } else {
      precision += coeff * other.expected_outer();
    }
    linear += 0.5 * signed_count * other.mean();
  }
  return GaussianFactor::full_from_precision(precision, linear);
}

// Closed-form coordinate update of one taxonomy-node factor. Evidence flows
// up from each child's leaf and node factors; siblings sharing a child are
// explained away. A node with no children collapses to its prior exactly.
inline GaussianFactor update_parent(std::uint32_t i, ParentFamily family,
                                    const ModelState& state,
                                    const Taxonomy& taxonomy) {
  detail::check_state(state, taxonomy);
  if (i >= state.size()) throw std::out_of_range("update_parent: index");

  const bool is_u = family == ParentFamily::context_hu;
  const double tau_leaf = is_u ? state.hyper.tau_u : state.hyper.tau_v;
  const double tau_h = is_u ? state.hyper.tau_hu : state.hyper.tau_hv;
  const std::vector<GaussianFactor>& leaves = is_u ? state.u : state.v;
  const std::vector<GaussianFactor>& nodes = is_u ? state.hu : state.hv;
  const int k = state.k;

  const Eigen::VectorXd prior = prior_mean(
      taxonomy, i, k, [&](std::uint32_t n) -> const Eigen::VectorXd& {
        return nodes[n].mean();
      });

  const std::vector<std::uint32_t>& children = taxonomy.children[i];
  if (children.empty()) {
    return GaussianFactor::isotropic(prior, tau_h);
  }

  double p = tau_h;
  Eigen::VectorXd linear = tau_h * prior;
  for (std::uint32_t m : children) {
    const auto& pi = taxonomy.parents[m];
    const double fan = static_cast<double>(pi.size());
    p += (tau_leaf + tau_h) / (fan * fan);
    linear += (tau_leaf * leaves[m].mean() + tau_h * nodes[m].mean()) / fan;
    for (std::uint32_t n : pi) {
      if (n == i) continue;
      linear -= ((tau_leaf + tau_h) / (fan * fan)) * nodes[n].mean();
    }
  }
  return GaussianFactor::isotropic(linear / p, p);
}

namespace detail {

// Prior-minus-entropy contribution of one factor anchored at the average of
// its parents' node means: E[log p(z | parents)] + H[q(z)] in closed form.
inline double factor_bound_term(const GaussianFactor& q,
                                const Eigen::VectorXd& prior_mean_vec,
                                double parent_trace_sum, double fan,
                                double tau) {
  const int k = q.dim();
  double expected_sq =
      (q.mean() - prior_mean_vec).squaredNorm() + q.cov_trace();
  if (fan > 0.0) expected_sq += parent_trace_sum / (fan * fan);
  return 0.5 * k * (std::log(tau) + 1.0) - 0.5 * tau * expected_sq +
         0.5 * q.logdet_cov();
}

inline double family_bound_terms(const ModelState& state,
                                 const Taxonomy& taxonomy,
                                 const std::vector<GaussianFactor>& family,
                                 const std::vector<GaussianFactor>& anchors,
                                 double tau, const char* name) {
  double total = 0.0;
  for (std::uint32_t i = 0; i < family.size(); ++i) {
    const Eigen::VectorXd prior = prior_mean(
        taxonomy, i, state.k, [&](std::uint32_t n) -> const Eigen::VectorXd& {
          return anchors[n].mean();
        });
    double parent_trace = 0.0;
    for (std::uint32_t n : taxonomy.parents[i]) {
      parent_trace += anchors[n].cov_trace();
    }
    const double term = factor_bound_term(
        family[i], prior, parent_trace,
        static_cast<double>(taxonomy.parents[i].size()), tau);
    if (!std::isfinite(term)) {
      throw std::runtime_error(std::string("elbo: non-finite contribution from ") +
                               name + "[" + std::to_string(i) + "]");
    }
    total += term;
  }
  return total;
}

}  // namespace detail

// Evidence lower bound of the current posterior under the logistic bound,
// with linearization points freshly tightened from the current moments.
inline double elbo(const ModelState& state, const PairDataset& pairs,
                   const Taxonomy& taxonomy, XiMode mode) {
  detail::check_state(state, taxonomy);

  double total = 0.0;
  for (const PairRecord& r : pairs.records) {
    if (r.i >= state.size() || r.j >= state.size()) {
      throw std::invalid_argument("elbo: pair index out of range");
    }
    const GaussianFactor& qu = state.u[r.i];
    const GaussianFactor& qv = state.v[r.j];
    const DotMoments m = dot_moments(qu, qv);
    const double s2 = m.second_moment();
    const double xi = xi_value(qu, qv, mode);
    const double total_count = static_cast<double>(r.n_pos) + r.n_neg;
    const double signed_count = static_cast<double>(r.n_pos) - r.n_neg;
    const double term =
        0.5 * signed_count * m.mean -
        total_count * (logistic_bound_lambda(xi) * (s2 - xi * xi) + 0.5 * xi -
                       log_sigmoid(xi));
    if (!std::isfinite(term)) {
      throw std::runtime_error("elbo: non-finite contribution from pair (" +
                               std::to_string(r.i) + ", " +
                               std::to_string(r.j) + ")");
    }
    total += term;
  }

  total += detail::family_bound_terms(state, taxonomy, state.u, state.hu,
                                      state.hyper.tau_u, "U");
  total += detail::family_bound_terms(state, taxonomy, state.v, state.hv,
                                      state.hyper.tau_v, "V");
  total += detail::family_bound_terms(state, taxonomy, state.hu, state.hu,
                                      state.hyper.tau_hu, "H^u");
  total += detail::family_bound_terms(state, taxonomy, state.hv, state.hv,
                                      state.hyper.tau_hv, "H^v");
  return total;
}

struct TrainResult {
  ModelState state;
  std::vector<double> elbo_trace;  // [0] is the pre-training bound
};

// Full-batch coordinate ascent. Each sweep refreshes, in order: taxonomy
// context nodes (children before parents), context leaves, taxonomy target
// nodes, target leaves; then the bound is re-evaluated. Stops when the
// relative bound change drops below tolerance or max_sweeps is hit.
//
// jacobi_threads >= 1 switches every phase to Jacobi semantics: all factors
// of the family are computed against a frozen snapshot, then committed.
// Leaf phases are unaffected by the switch (leaves never read their own
// family); node phases lose the within-phase chaining, so the two modes
// agree only on leaf values. Either way the result is a pure function of
// the inputs — the thread count never changes the arithmetic.
inline TrainResult train(ModelState state, const PairDataset& pairs,
                         const Taxonomy& taxonomy, const TrainConfig& config) {
  config.validate();
  detail::check_state(state, taxonomy);
  if (state.k != config.k) {
    throw std::invalid_argument("train: config dimension does not match state");
  }

  const PairAdjacency adj = build_adjacency(pairs, state.size());
  const std::vector<std::uint32_t> order = child_first_order(taxonomy);
  const auto n = static_cast<std::uint32_t>(state.size());
  const bool jacobi = config.jacobi_threads >= 1;

  const auto run_parent_phase = [&](ParentFamily family) {
    std::vector<GaussianFactor>& slot = state.parent(family);
    if (jacobi) {
      std::vector<GaussianFactor> next = slot;
      detail::parallel_for(n, config.jacobi_threads, [&](std::uint32_t i) {
        next[i] = update_parent(i, family, state, taxonomy);
      });
      slot = std::move(next);
    } else {
      for (std::uint32_t i : order) {
        slot[i] = update_parent(i, family, state, taxonomy);
      }
    }
  };

  const auto run_leaf_phase = [&](LeafFamily family) {
    std::vector<GaussianFactor>& slot = state.leaf(family);
    if (jacobi) {
      std::vector<GaussianFactor> next = slot;
      detail::parallel_for(n, config.jacobi_threads, [&](std::uint32_t i) {
        next[i] = update_leaf(i, family, state, adj, taxonomy, config.xi_mode);
      });
      slot = std::move(next);
    } else {
      detail::OuterCache cache(family == LeafFamily::context_u ? state.v
                                                               : state.u);
      for (std::uint32_t i = 0; i < n; ++i) {
        slot[i] =
            update_leaf(i, family, state, adj, taxonomy, config.xi_mode, &cache);
      }
    }
  };

  TrainResult result;
  result.elbo_trace.push_back(elbo(state, pairs, taxonomy, config.xi_mode));

  int sweeps = 0;
  for (; sweeps < config.max_sweeps;) {
    run_parent_phase(ParentFamily::context_hu);
    run_leaf_phase(LeafFamily::context_u);
    run_parent_phase(ParentFamily::target_hv);
    run_leaf_phase(LeafFamily::target_v);
    ++sweeps;

    const double current = elbo(state, pairs, taxonomy, config.xi_mode);
    if (!std::isfinite(current)) {
      throw std::runtime_error("train: bound diverged (non-finite) at sweep " +
                               std::to_string(sweeps));
    }
    const double previous = result.elbo_trace.back();
    result.elbo_trace.push_back(current);
    const double scale =
        std::max({std::abs(current), std::abs(previous), 1e-12});
    if (std::abs(current - previous) / scale < config.rel_elbo_tol) break;
  }

  state.sweeps_run = sweeps;
  state.final_elbo = result.elbo_trace.back();
  result.state = std::move(state);
  return result;
}

}  // namespace bhwr
