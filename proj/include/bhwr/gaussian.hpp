#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace bhwr {

enum class CovKind { full, isotropic };

// One variational Gaussian factor q(z) = N(mean, cov). Leaf factors carry a
// full SPD covariance with cached precision and log-determinant; parent
// factors are isotropic (their updates always produce scalar * I precision).
class GaussianFactor {
 public:
  GaussianFactor() = default;

  // Builds a full-covariance factor from natural parameters: precision P and
  // linear coefficient b, with mean P^{-1} b. Throws if P is not SPD.
  static GaussianFactor full_from_precision(const Eigen::MatrixXd& precision,
                                            const Eigen::VectorXd& linear) {
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("GaussianFactor: precision is not positive-definite");
    }
    GaussianFactor f;
    f.kind_ = CovKind::full;
    f.mean_ = llt.solve(linear);
    f.prec_ = precision;
    f.cov_ = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
    // Symmetrize; the solve can leave asymmetry at roundoff level.
    f.cov_ = ((f.cov_ + f.cov_.transpose()) * 0.5).eval();
    f.logdet_cov_ = 0.0;
    const auto diag = llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < precision.rows(); ++i) {
      f.logdet_cov_ -= 2.0 * std::log(diag(i));
    }
    return f;
  }

  // Full-kind factor with exact covariance (1/precision) I. Used for prior
  // fallbacks, where the posterior must equal the prior bit-for-bit.
  static GaussianFactor full_isotropic(Eigen::VectorXd mean, double precision) {
    if (!(precision > 0.0)) {
      throw std::runtime_error("GaussianFactor: precision must be positive");
    }
    const auto k = mean.size();
    GaussianFactor f;
    f.kind_ = CovKind::full;
    f.mean_ = std::move(mean);
    f.cov_ = Eigen::MatrixXd::Identity(k, k) * (1.0 / precision);
    f.prec_ = Eigen::MatrixXd::Identity(k, k) * precision;
    f.logdet_cov_ = -static_cast<double>(k) * std::log(precision);
    return f;
  }

  // Builds a full-covariance factor from its mean and covariance, keeping the
  // covariance bytes exactly as given (needed for lossless persistence).
  static GaussianFactor full_from_moments(Eigen::VectorXd mean,
                                          Eigen::MatrixXd cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("GaussianFactor: covariance is not positive-definite");
    }
    GaussianFactor f;
    f.kind_ = CovKind::full;
    f.mean_ = std::move(mean);
    f.cov_ = std::move(cov);
    f.prec_ = llt.solve(Eigen::MatrixXd::Identity(f.cov_.rows(), f.cov_.cols()));
    f.prec_ = ((f.prec_ + f.prec_.transpose()) * 0.5).eval();
    f.logdet_cov_ = 0.0;
    const auto diag = llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < f.cov_.rows(); ++i) {
      f.logdet_cov_ += 2.0 * std::log(diag(i));
    }
    return f;
  }

  static GaussianFactor isotropic(Eigen::VectorXd mean, double precision) {
    if (!(precision > 0.0)) {
      throw std::runtime_error("GaussianFactor: isotropic precision must be positive");
    }
    GaussianFactor f;
    f.kind_ = CovKind::isotropic;
    f.mean_ = std::move(mean);
    f.iso_prec_ = precision;
    return f;
  }

  // Standard factor N(mean, I), the initialization state.
  static GaussianFactor standard_full(Eigen::VectorXd mean) {
    const auto k = mean.size();
    GaussianFactor f;
    f.kind_ = CovKind::full;
    f.mean_ = std::move(mean);
    f.cov_ = Eigen::MatrixXd::Identity(k, k);
    f.prec_ = Eigen::MatrixXd::Identity(k, k);
    f.logdet_cov_ = 0.0;
    return f;
  }

  CovKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }

  bool is_isotropic() const { return kind_ == CovKind::isotropic; }

  double isotropic_precision() const {
    if (kind_ != CovKind::isotropic) {
      throw std::logic_error("GaussianFactor: not isotropic");
    }
    return iso_prec_;
  }

  const Eigen::MatrixXd& covariance() const {
    if (kind_ != CovKind::full) {
      throw std::logic_error("GaussianFactor: dense covariance of isotropic factor");
    }
    return cov_;
  }

  const Eigen::MatrixXd& precision() const {
    if (kind_ != CovKind::full) {
      throw std::logic_error("GaussianFactor: dense precision of isotropic factor");
    }
    return prec_;
  }

  Eigen::MatrixXd covariance_dense() const {
    if (kind_ == CovKind::full) return cov_;
    return Eigen::MatrixXd::Identity(dim(), dim()) / iso_prec_;
  }

  double cov_trace() const {
    if (kind_ == CovKind::full) return cov_.trace();
    return static_cast<double>(dim()) / iso_prec_;
  }

  // x' Sigma x
  double cov_quadratic(const Eigen::VectorXd& x) const {
    if (kind_ == CovKind::full) return x.dot(cov_ * x);
    return x.squaredNorm() / iso_prec_;
  }

  double cov_diagonal(int m) const {
    if (kind_ == CovKind::full) return cov_(m, m);
    return 1.0 / iso_prec_;
  }

  double logdet_cov() const {
    if (kind_ == CovKind::full) return logdet_cov_;
    return -static_cast<double>(dim()) * std::log(iso_prec_);
  }

  // E[z z'] = Sigma + mean mean'
  Eigen::MatrixXd expected_outer() const {
    if (kind_ == CovKind::full) {
      return cov_ + mean_ * mean_.transpose();
    }
    Eigen::MatrixXd m = mean_ * mean_.transpose();
    m.diagonal().array() += 1.0 / iso_prec_;
    return m;
  }

  // tr(Sigma_a Sigma_b), valid for any kind combination.
  static double trace_product(const GaussianFactor& a, const GaussianFactor& b) {
    if (a.kind_ == CovKind::full && b.kind_ == CovKind::full) {
      return a.cov_.cwiseProduct(b.cov_).sum();
    }
    if (a.kind_ == CovKind::isotropic && b.kind_ == CovKind::isotropic) {
      return static_cast<double>(a.dim()) / (a.iso_prec_ * b.iso_prec_);
    }
    const GaussianFactor& full = a.kind_ == CovKind::full ? a : b;
    const GaussianFactor& iso = a.kind_ == CovKind::full ? b : a;
    return full.cov_.trace() / iso.iso_prec_;
  }

  // Checks the cached precision against the covariance: max |Sigma P - I|.
  double precision_cache_error() const {
    if (kind_ == CovKind::isotropic) return 0.0;
    const Eigen::MatrixXd residual =
        cov_ * prec_ - Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols());
    return residual.cwiseAbs().maxCoeff();
  }

  bool operator==(const GaussianFactor& other) const {
    if (kind_ != other.kind_ || mean_ != other.mean_) return false;
    if (kind_ == CovKind::full) return cov_ == other.cov_;
    return iso_prec_ == other.iso_prec_;
  }

 private:
  CovKind kind_ = CovKind::full;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;    // full only
  Eigen::MatrixXd prec_;   // full only
  double logdet_cov_ = 0.0;
  double iso_prec_ = 1.0;  // isotropic only
};

}  // namespace bhwr
