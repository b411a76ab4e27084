#pragma once

#include <algorithm>
#include <cmath>

namespace sympo {

// sigma(z) = 1 / (1 + exp(-z)), overflow-safe on both sides.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// softplus(z) = log(1 + exp(z)); -log sigma(z) == softplus(-z).
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double neg_log_sigmoid(double z) { return softplus(-z); }

// Relative error with a floor that keeps near-zero comparisons meaningful.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace sympo
