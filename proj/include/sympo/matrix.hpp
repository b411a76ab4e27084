#pragma once

#include <cstddef>
#include <vector>

#include "sympo/kernels.hpp"

namespace sympo {

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::size_t size() const { return data.size(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  // this += alpha * other (shapes must match)
  void add_scaled(double alpha, const Matrix& other) {
    kernels::axpy(alpha, other.data.data(), data.data(), data.size());
  }

  double frobenius_norm_sq() const {
    return kernels::dot(data.data(), data.data(), data.size());
  }
};

using GradMatrix = Matrix;

}  // namespace sympo
