#pragma once

#include <span>
#include <vector>

#include "sympo/domain.hpp"
#include "sympo/matrix.hpp"
#include "sympo/policy.hpp"

// The preference-optimization loss family, each returning the batch-mean
// loss and its analytic parameter gradient. Batch reduction is the
// arithmetic mean with a fixed ascending-index summation order; per-sample
// terms may be computed in parallel (see parallel.hpp) without changing a
// single bit of the result.

namespace sympo {

enum class LossId { dpo_m, vco, vco_star, pair, margin, ancpo, symmpo };
const char* to_string(LossId id);

struct LossValue {
  double total = 0.0;
  // Unweighted component means in insertion order; `total` applies the
  // component weights (lambda, gamma, eta) where relevant.
  std::vector<std::pair<LossId, double>> components;

  bool has(LossId id) const;
  double component(LossId id) const;  // throws usage_error if absent
};

struct LossResult {
  LossValue value;
  GradMatrix grad;
};

using Batch = std::span<const SymmetricSample>;

// beta * [log pi_theta(y|image) - log pi_ref(y|image)] is the tractable part
// of the implicit reward; this returns the unscaled log-ratio.
double log_ratio(const PolicyParams& params, const PolicyParams& ref_params,
                 const ImageFeat& image, const Prompt& prompt, ResponseId y);

// sigma(r_w - r_l): likelihood that the first reward wins.
double bt_probability(double r_w, double r_l);

// Preference margin between y_a and y_b under one conditioning. Follows the
// printed definition (no beta) unless hp.margin_uses_beta is set.
double margin_delta(const PolicyParams& params, const PolicyParams& ref_params,
                    const ImageFeat& image, const Prompt& prompt, ResponseId y_a,
                    ResponseId y_b, const HyperParams& hp);

// -log sigma(beta * [rho(y_w|m) - rho(y_l|m)]) averaged over the batch.
LossResult loss_dpo_m(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                      const HyperParams& hp);

// Vision-oriented contrastive baseline: same response, contrasted images,
// partition functions silently dropped.
LossResult loss_vco(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                    const HyperParams& hp);

// Symmetric pairwise term: y_w beats y_w_c under the image, y_w_c beats y_w
// under the contrastive image.
LossResult loss_pair(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                     const HyperParams& hp);

// Squared mismatch of the two preference margins.
LossResult loss_margin(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                       const HyperParams& hp);

// Anchored regularization: each arm's preferred log-ratio pushed above delta.
LossResult loss_ancpo(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                      const HyperParams& hp);

// total = dpo_m + lambda*pair + gamma*margin + eta*ancpo.
LossResult loss_symmpo(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                       const HyperParams& hp);

}  // namespace sympo
