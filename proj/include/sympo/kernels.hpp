#pragma once

#include <cstddef>

// Dense double-precision kernels used by the policy and loss inner loops.
// A scalar reference implementation always exists; an AVX2+FMA variant is
// compiled when the toolchain supports it and selected at runtime. The
// SYMPO_SIMD environment variable ("auto", "scalar", "avx2") overrides the
// automatic choice. Selection happens once per process, so repeated runs on
// the same machine use the same kernels and stay bit-reproducible.

namespace sympo::kernels {

enum class Isa { scalar, avx2 };

struct Ops {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // max_i v[i], n >= 1
  double (*vmax)(const double* v, std::size_t n);
  // sum_i v[i]
  double (*sum)(const double* v, std::size_t n);
};

const Ops& scalar_ops();
const Ops& avx2_ops();  // valid only when avx2_available()
bool avx2_available();

// Dispatch table selected at first use (cpu detection + SYMPO_SIMD).
const Ops& active();
Isa active_isa();
const char* isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline double vmax(const double* v, std::size_t n) { return active().vmax(v, n); }
inline double sum(const double* v, std::size_t n) { return active().sum(v, n); }

// log(sum_i exp(v[i])) with max subtraction; n >= 1.
double logsumexp(const double* v, std::size_t n);

// probs[i] = exp(logits[i]) / sum_j exp(logits[j]); returns logsumexp(logits).
double softmax(const double* logits, double* probs, std::size_t n);

}  // namespace sympo::kernels
