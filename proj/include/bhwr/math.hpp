#pragma once

#include <cmath>

namespace bhwr {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

// Curvature coefficient of the quadratic logistic bound:
// lambda(a) = (sigmoid(a) - 1/2) / (2a), extended by its limit 1/8 at 0.
// The tanh form is the same function, stable near zero and exactly even.
inline double logistic_bound_lambda(double a) {
  constexpr double kLimitEps = 1e-6;
  if (std::fabs(a) <= kLimitEps) {
    return 0.125;
  }
  return std::tanh(0.5 * a) / (4.0 * a);
}

// Quadratic lower bound on log sigmoid(x) with tightness parameter xi.
// Holds for every real xi; touches log sigmoid(x) at xi = +/-x.
inline double logistic_log_bound(double x, double xi) {
  return log_sigmoid(xi) + 0.5 * (x - xi) -
         logistic_bound_lambda(xi) * (x * x - xi * xi);
}

}  // namespace bhwr
