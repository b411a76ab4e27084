#include "sympo/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace sympo::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double vmax_scalar(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > m) m = v[i];
  return m;
}

double sum_scalar(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s;
}

Isa pick_isa() {
  const char* env = std::getenv("SYMPO_SIMD");
  std::string mode = env ? env : "auto";
  if (mode == "scalar") return Isa::scalar;
  if (mode == "avx2") {
    if (!avx2_available())
      throw std::runtime_error("SYMPO_SIMD=avx2 requested but AVX2 is unavailable");
    return Isa::avx2;
  }
  if (mode != "auto" && !mode.empty())
    throw std::runtime_error("unknown SYMPO_SIMD value: " + mode);
  return avx2_available() ? Isa::avx2 : Isa::scalar;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{dot_scalar, axpy_scalar, vmax_scalar, sum_scalar};
  return ops;
}

#if !defined(SYMPO_HAVE_AVX2_TU)
const Ops& avx2_ops() { return scalar_ops(); }
bool avx2_available() { return false; }
#endif

Isa active_isa() {
  static const Isa isa = pick_isa();
  return isa;
}

const Ops& active() {
  return active_isa() == Isa::avx2 ? avx2_ops() : scalar_ops();
}

const char* isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

double logsumexp(const double* v, std::size_t n) {
  const double m = active().vmax(v, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double softmax(const double* logits, double* probs, std::size_t n) {
  const double m = active().vmax(logits, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp(logits[i] - m);
    s += probs[i];
  }
  const double inv = 1.0 / s;
  for (std::size_t i = 0; i < n; ++i) probs[i] *= inv;
  return m + std::log(s);
}

}  // namespace sympo::kernels
