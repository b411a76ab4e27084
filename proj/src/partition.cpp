#include "sympo/partition.hpp"

#include <cmath>

#include "loss_internal.hpp"
#include "sympo/errors.hpp"
#include "sympo/kernels.hpp"
#include "sympo/numerics.hpp"

namespace sympo {

double GroundTruthReward::operator()(const ImageFeat& image, const Prompt& prompt,
                                     ResponseId y) const {
  const int q = static_cast<int>(prompt.queried_positions.size());
  int correct = 0;
  for (int t = 0; t < q; ++t) {
    const bool asserted = (y >> t) & 1;
    const bool truth = image[static_cast<size_t>(prompt.queried_positions[t])] >= 0.5;
    if (asserted == truth) ++correct;
  }
  return scale * static_cast<double>(2 * correct - q);
}

double log_partition_z_of(const PolicyParams& ref_params,
                          const std::function<double(ResponseId)>& reward_of,
                          const ImageFeat& image, const Prompt& prompt, const HyperParams& hp) {
  if (!(hp.beta > 0.0) || !std::isfinite(hp.beta))
    throw config_error("beta must be positive and finite");
  const SoftmaxState ref = eval_softmax(ref_params, image, prompt);
  const size_t K = ref.logits.size();
  std::vector<double> terms(K);
  for (size_t y = 0; y < K; ++y)
    terms[y] = ref.log_prob(static_cast<ResponseId>(y)) +
               reward_of(static_cast<ResponseId>(y)) / hp.beta;
  return kernels::logsumexp(terms.data(), K);
}

double log_partition_z(const PolicyParams& ref_params, const GroundTruthReward& reward,
                       const ImageFeat& image, const Prompt& prompt, const HyperParams& hp) {
  if (!(hp.beta > 0.0) || !std::isfinite(hp.beta))
    throw config_error("beta must be positive and finite");
  if (reward.scale == 0.0) return 0.0;  // Z = sum of reference probabilities = 1
  return log_partition_z_of(
      ref_params, [&](ResponseId y) { return reward(image, prompt, y); }, image, prompt, hp);
}

double partition_z(const PolicyParams& ref_params, const GroundTruthReward& reward,
                   const ImageFeat& image, const Prompt& prompt, const HyperParams& hp) {
  return std::exp(log_partition_z(ref_params, reward, image, prompt, hp));
}

double offset_c(const PolicyParams& ref_params, const GroundTruthReward& reward,
                const ImageFeat& image, const ImageFeat& image_c, const Prompt& prompt,
                const HyperParams& hp) {
  return hp.beta * (log_partition_z(ref_params, reward, image, prompt, hp) -
                    log_partition_z(ref_params, reward, image_c, prompt, hp));
}

LossResult loss_vco_star(Batch batch, const PolicyParams& params,
                         const PolicyParams& ref_params, const GroundTruthReward& reward,
                         const HyperParams& hp) {
  const double beta = hp.beta;
  return detail::batch_mean(
      batch, params, LossId::vco_star, [&](const SymmetricSample& s, GradMatrix& g) {
        const detail::CondEval cond_m = detail::eval_cond(params, ref_params, s.image, s.prompt);
        const detail::CondEval cond_c =
            detail::eval_cond(params, ref_params, s.image_c, s.prompt);
        const double u = beta * (cond_m.log_ratio(s.y_w) - cond_c.log_ratio(s.y_w));
        const double c = offset_c(ref_params, reward, s.image, s.image_c, s.prompt, hp);
        // c is constant in the policy parameters; only u carries gradient
        const double coef = -sigmoid(-(u + c)) * beta;
        detail::CoefVec cm(cond_m.th.logits.size());
        cm.add_response(s.y_w, coef);
        cm.prob_weight = -coef;
        detail::flush_rank1(g, cond_m, cm);
        detail::CoefVec cc(cond_c.th.logits.size());
        cc.add_response(s.y_w, -coef);
        cc.prob_weight = coef;
        detail::flush_rank1(g, cond_c, cc);
        return neg_log_sigmoid(u + c);
      });
}

std::pair<double, double> gradient_coefficients(double u, double c) {
  return {sigmoid(-(u + c)), sigmoid(-u)};
}

std::vector<PartitionReport> compare_vco_gradients(Batch batch, const PolicyParams& params,
                                                   const PolicyParams& ref_params,
                                                   const GroundTruthReward& reward,
                                                   const HyperParams& hp) {
  if (batch.empty()) throw usage_error("empty batch");
  std::vector<PartitionReport> reports;
  reports.reserve(batch.size());

  for (const SymmetricSample& s : batch) {
    const Batch one(&s, 1);
    PartitionReport r;
    r.z_w = partition_z(ref_params, reward, s.image, s.prompt, hp);
    r.z_l = partition_z(ref_params, reward, s.image_c, s.prompt, hp);
    r.u = hp.beta * (log_ratio(params, ref_params, s.image, s.prompt, s.y_w) -
                     log_ratio(params, ref_params, s.image_c, s.prompt, s.y_w));
    r.c = offset_c(ref_params, reward, s.image, s.image_c, s.prompt, hp);
    std::tie(r.coef_star, r.coef_plain) = gradient_coefficients(r.u, r.c);

    const LossResult plain = loss_vco(one, params, ref_params, hp);
    const LossResult star = loss_vco_star(one, params, ref_params, reward, hp);
    r.loss_vco = plain.value.total;
    r.loss_vco_star = star.value.total;

    // Offsetting c rescales the shared gradient direction by
    // sigma(-(u+c))/sigma(-u); verify elementwise against both
    // implementations.
    const double ratio = r.coef_star / r.coef_plain;
    for (size_t i = 0; i < plain.grad.size(); ++i) {
      const double err = rel_err(star.grad.data[i], ratio * plain.grad.data[i]);
      if (err > 1e-10)
        throw numeric_error("gradient-ratio identity violated: rel err " + std::to_string(err));
    }
    reports.push_back(r);
  }
  return reports;
}

}  // namespace sympo
