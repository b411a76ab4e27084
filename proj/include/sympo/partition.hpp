#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "sympo/domain.hpp"
#include "sympo/objectives.hpp"
#include "sympo/policy.hpp"

// Exact partition-function analysis over the enumerable response catalog:
// Z(m,x) under a posited ground-truth reward, the offset c it induces
// between contrastive images, the corrected contrastive loss that keeps the
// offset, and the per-sample comparison of the two gradient coefficients.

namespace sympo {

// r*(m,x,y) = scale * (correct - incorrect) over the prompt's q assertions,
// with attributes thresholded at 0.5. Bounded by scale*q in magnitude; the
// preferred response is its unique maximizer.
struct GroundTruthReward {
  double scale = 1.0;

  double operator()(const ImageFeat& image, const Prompt& prompt, ResponseId y) const;
};

struct PartitionReport {
  double z_w = 0.0;
  double z_l = 0.0;
  double u = 0.0;
  double c = 0.0;
  double coef_star = 0.0;
  double coef_plain = 0.0;
  double loss_vco = 0.0;
  double loss_vco_star = 0.0;
};

// log Z(m,x) = logsumexp_y [log pi_ref(y|m,x) + r(m,x,y)/beta]; exact
// enumeration over the catalog, for an arbitrary bounded reward.
double log_partition_z_of(const PolicyParams& ref_params,
                          const std::function<double(ResponseId)>& reward_of,
                          const ImageFeat& image, const Prompt& prompt, const HyperParams& hp);

// Same under the ground-truth reward. scale == 0 makes the reward
// identically zero, hence Z is the reference normalization, exactly 1.
double log_partition_z(const PolicyParams& ref_params, const GroundTruthReward& reward,
                       const ImageFeat& image, const Prompt& prompt, const HyperParams& hp);

// Z itself, exponentiated only for reporting; always > 0.
double partition_z(const PolicyParams& ref_params, const GroundTruthReward& reward,
                   const ImageFeat& image, const Prompt& prompt, const HyperParams& hp);

// c = beta * (ln Z(m,x) - ln Z(m',x)); independent of the policy parameters.
double offset_c(const PolicyParams& ref_params, const GroundTruthReward& reward,
                const ImageFeat& image, const ImageFeat& image_c, const Prompt& prompt,
                const HyperParams& hp);

// Corrected contrastive loss: -log sigma(u + c) with u the beta-scaled
// log-ratio difference and c from offset_c; c contributes no gradient.
LossResult loss_vco_star(Batch batch, const PolicyParams& params,
                         const PolicyParams& ref_params, const GroundTruthReward& reward,
                         const HyperParams& hp);

// (sigma(-(u+c)), sigma(-u)): the gradient coefficients of the corrected
// and the offset-free contrastive losses.
std::pair<double, double> gradient_coefficients(double u, double c);

// Per-sample report; asserts the gradient-ratio identity
// grad_star = sigma(-(u+c))/sigma(-u) * grad_plain elementwise (1e-10 rel.)
// using the gradients produced by the two loss implementations.
std::vector<PartitionReport> compare_vco_gradients(Batch batch, const PolicyParams& params,
                                                   const PolicyParams& ref_params,
                                                   const GroundTruthReward& reward,
                                                   const HyperParams& hp);

}  // namespace sympo
