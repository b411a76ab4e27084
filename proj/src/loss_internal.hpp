#pragma once

// Shared internals of the loss implementations: per-conditioning softmax
// caching, rank-1 gradient accumulation, and the deterministic batch-mean
// driver. Not part of the public API.

#include <functional>
#include <vector>

#include "sympo/errors.hpp"
#include "sympo/kernels.hpp"
#include "sympo/matrix.hpp"
#include "sympo/objectives.hpp"
#include "sympo/parallel.hpp"
#include "sympo/policy.hpp"

namespace sympo::detail {

constexpr std::size_t kBatchChunk = 32;

// Softmax state of policy and reference under one conditioning.
struct CondEval {
  SoftmaxState th;
  SoftmaxState ref;

  double log_ratio(ResponseId y) const { return th.log_prob(y) - ref.log_prob(y); }
};

inline CondEval eval_cond(const PolicyParams& params, const PolicyParams& ref_params,
                          const ImageFeat& image, const Prompt& prompt) {
  return CondEval{eval_softmax(params, image, prompt), eval_softmax(ref_params, image, prompt)};
}

// Response-space coefficients for one conditioning, flushed into the
// gradient as a single rank-1 update: grad += f (x) (c + prob_weight*pi).
struct CoefVec {
  std::vector<double> c;
  double prob_weight = 0.0;

  explicit CoefVec(std::size_t k) : c(k, 0.0) {}
  void add_response(ResponseId y, double w) { c[static_cast<std::size_t>(y)] += w; }
};

inline void flush_rank1(GradMatrix& g, const CondEval& cond, CoefVec& coef) {
  if (coef.prob_weight != 0.0) {
    const std::vector<double> probs = cond.th.probs();
    kernels::axpy(coef.prob_weight, probs.data(), coef.c.data(), coef.c.size());
  }
  const auto& f = cond.th.features.values;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) kernels::axpy(f[i], coef.c.data(), g.row(i), g.cols);
}

// Per-sample term plus gradient contribution (added into g).
using SampleFn = std::function<double(const SymmetricSample&, GradMatrix& g)>;

// Batch mean with fixed chunking: per-chunk partial sums are accumulated in
// ascending sample order and combined in ascending chunk order, so the
// result is bit-identical for any worker count.
inline LossResult batch_mean(Batch batch, const PolicyParams& params, LossId id,
                             const SampleFn& per_sample) {
  if (batch.empty()) throw usage_error("empty batch");

  struct Partial {
    double sum = 0.0;
    GradMatrix grad;
  };
  const std::size_t chunks = parallel::chunk_count(batch.size(), kBatchChunk);
  std::vector<Partial> partials(chunks);

  parallel::for_chunks(batch.size(), kBatchChunk,
                       [&](std::size_t c, std::size_t begin, std::size_t end) {
                         Partial& p = partials[c];
                         p.grad = GradMatrix(params.W.rows, params.W.cols);
                         for (std::size_t i = begin; i < end; ++i)
                           p.sum += per_sample(batch[i], p.grad);
                       });

  LossResult out;
  out.grad = GradMatrix(params.W.rows, params.W.cols);
  double sum = 0.0;
  for (const Partial& p : partials) {
    sum += p.sum;
    out.grad.add_scaled(1.0, p.grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.value.total = sum * inv_n;
  out.value.components.emplace_back(id, out.value.total);
  for (double& g : out.grad.data) g *= inv_n;
  return out;
}

}  // namespace sympo::detail
