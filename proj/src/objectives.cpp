#include "sympo/objectives.hpp"

#include <cmath>

#include "loss_internal.hpp"
#include "sympo/errors.hpp"
#include "sympo/numerics.hpp"

namespace sympo {

using detail::CoefVec;
using detail::CondEval;
using detail::eval_cond;
using detail::flush_rank1;

const char* to_string(LossId id) {
  switch (id) {
    case LossId::dpo_m: return "dpo_m";
    case LossId::vco: return "vco";
    case LossId::vco_star: return "vco_star";
    case LossId::pair: return "pair";
    case LossId::margin: return "margin";
    case LossId::ancpo: return "ancpo";
    case LossId::symmpo: return "symmpo";
  }
  return "?";
}

bool LossValue::has(LossId id) const {
  for (const auto& [k, v] : components)
    if (k == id) return true;
  return false;
}

double LossValue::component(LossId id) const {
  for (const auto& [k, v] : components)
    if (k == id) return v;
  throw usage_error(std::string("loss component absent: ") + to_string(id));
}

double log_ratio(const PolicyParams& params, const PolicyParams& ref_params,
                 const ImageFeat& image, const Prompt& prompt, ResponseId y) {
  return log_prob(params, image, prompt, y) - log_prob(ref_params, image, prompt, y);
}

double bt_probability(double r_w, double r_l) { return sigmoid(r_w - r_l); }

double margin_delta(const PolicyParams& params, const PolicyParams& ref_params,
                    const ImageFeat& image, const Prompt& prompt, ResponseId y_a,
                    ResponseId y_b, const HyperParams& hp) {
  const double d = log_ratio(params, ref_params, image, prompt, y_a) -
                   log_ratio(params, ref_params, image, prompt, y_b);
  return hp.margin_uses_beta ? hp.beta * d : d;
}

LossResult loss_dpo_m(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                      const HyperParams& hp) {
  const double beta = hp.beta;
  return detail::batch_mean(
      batch, params, LossId::dpo_m, [&](const SymmetricSample& s, GradMatrix& g) {
        const CondEval cond = eval_cond(params, ref_params, s.image, s.prompt);
        const double z = beta * (cond.log_ratio(s.y_w) - cond.log_ratio(s.y_l));
        const double coef = -sigmoid(-z) * beta;
        // shared conditioning: the softmax terms of the two response
        // gradients cancel, leaving pure response coefficients
        CoefVec cv(cond.th.logits.size());
        cv.add_response(s.y_w, coef);
        cv.add_response(s.y_l, -coef);
        flush_rank1(g, cond, cv);
        return neg_log_sigmoid(z);
      });
}

LossResult loss_vco(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                    const HyperParams& hp) {
  const double beta = hp.beta;
  return detail::batch_mean(
      batch, params, LossId::vco, [&](const SymmetricSample& s, GradMatrix& g) {
        const CondEval cond_m = eval_cond(params, ref_params, s.image, s.prompt);
        const CondEval cond_c = eval_cond(params, ref_params, s.image_c, s.prompt);
        const double z = beta * (cond_m.log_ratio(s.y_w) - cond_c.log_ratio(s.y_w));
        const double coef = -sigmoid(-z) * beta;
        CoefVec cm(cond_m.th.logits.size());
        cm.add_response(s.y_w, coef);
        cm.prob_weight = -coef;
        flush_rank1(g, cond_m, cm);
        CoefVec cc(cond_c.th.logits.size());
        cc.add_response(s.y_w, -coef);
        cc.prob_weight = coef;
        flush_rank1(g, cond_c, cc);
        return neg_log_sigmoid(z);
      });
}

LossResult loss_pair(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                     const HyperParams& hp) {
  const double beta = hp.beta;
  return detail::batch_mean(
      batch, params, LossId::pair, [&](const SymmetricSample& s, GradMatrix& g) {
        if (s.y_w == s.y_w_c) throw usage_error("degenerate symmetric pair: y_w == y_w_c");
        const CondEval cond_m = eval_cond(params, ref_params, s.image, s.prompt);
        const CondEval cond_c = eval_cond(params, ref_params, s.image_c, s.prompt);
        const double z1 = beta * (cond_m.log_ratio(s.y_w) - cond_m.log_ratio(s.y_w_c));
        const double z2 = beta * (cond_c.log_ratio(s.y_w_c) - cond_c.log_ratio(s.y_w));
        const double c1 = -sigmoid(-z1) * beta;
        const double c2 = -sigmoid(-z2) * beta;
        CoefVec cm(cond_m.th.logits.size());
        cm.add_response(s.y_w, c1);
        cm.add_response(s.y_w_c, -c1);
        flush_rank1(g, cond_m, cm);
        CoefVec cc(cond_c.th.logits.size());
        cc.add_response(s.y_w_c, c2);
        cc.add_response(s.y_w, -c2);
        flush_rank1(g, cond_c, cc);
        return neg_log_sigmoid(z1) + neg_log_sigmoid(z2);
      });
}

LossResult loss_margin(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                       const HyperParams& hp) {
  const double kappa = hp.margin_uses_beta ? hp.beta : 1.0;
  return detail::batch_mean(
      batch, params, LossId::margin, [&](const SymmetricSample& s, GradMatrix& g) {
        const CondEval cond_m = eval_cond(params, ref_params, s.image, s.prompt);
        const CondEval cond_c = eval_cond(params, ref_params, s.image_c, s.prompt);
        const double d1 = kappa * (cond_m.log_ratio(s.y_w) - cond_m.log_ratio(s.y_w_c));
        const double d2 = kappa * (cond_c.log_ratio(s.y_w_c) - cond_c.log_ratio(s.y_w));
        const double mismatch = d1 - d2;
        const double coef = 2.0 * mismatch * kappa;
        CoefVec cm(cond_m.th.logits.size());
        cm.add_response(s.y_w, coef);
        cm.add_response(s.y_w_c, -coef);
        flush_rank1(g, cond_m, cm);
        // d(-d2)/dW flips the response signs of the second arm twice over,
        // landing on the same coefficient pattern as the first arm.
        CoefVec cc(cond_c.th.logits.size());
        cc.add_response(s.y_w, coef);
        cc.add_response(s.y_w_c, -coef);
        flush_rank1(g, cond_c, cc);
        return mismatch * mismatch;
      });
}

LossResult loss_ancpo(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                      const HyperParams& hp) {
  const double beta = hp.beta;
  const double delta = hp.delta;
  return detail::batch_mean(
      batch, params, LossId::ancpo, [&](const SymmetricSample& s, GradMatrix& g) {
        const CondEval cond_m = eval_cond(params, ref_params, s.image, s.prompt);
        const CondEval cond_c = eval_cond(params, ref_params, s.image_c, s.prompt);
        const double z1 = beta * cond_m.log_ratio(s.y_w) - delta;
        const double z2 = beta * cond_c.log_ratio(s.y_w_c) - delta;
        const double c1 = -sigmoid(-z1) * beta;
        const double c2 = -sigmoid(-z2) * beta;
        CoefVec cm(cond_m.th.logits.size());
        cm.add_response(s.y_w, c1);
        cm.prob_weight = -c1;
        flush_rank1(g, cond_m, cm);
        CoefVec cc(cond_c.th.logits.size());
        cc.add_response(s.y_w_c, c2);
        cc.prob_weight = -c2;
        flush_rank1(g, cond_c, cc);
        return neg_log_sigmoid(z1) + neg_log_sigmoid(z2);
      });
}

LossResult loss_symmpo(Batch batch, const PolicyParams& params, const PolicyParams& ref_params,
                       const HyperParams& hp) {
  LossResult dpo = loss_dpo_m(batch, params, ref_params, hp);
  LossResult pair = loss_pair(batch, params, ref_params, hp);
  LossResult margin = loss_margin(batch, params, ref_params, hp);
  LossResult ancpo = loss_ancpo(batch, params, ref_params, hp);

  LossResult out;
  out.value.total = dpo.value.total + hp.lambda * pair.value.total +
                    hp.gamma * margin.value.total + hp.eta * ancpo.value.total;
  out.value.components.emplace_back(LossId::dpo_m, dpo.value.total);
  out.value.components.emplace_back(LossId::pair, pair.value.total);
  out.value.components.emplace_back(LossId::margin, margin.value.total);
  out.value.components.emplace_back(LossId::ancpo, ancpo.value.total);

  out.grad = std::move(dpo.grad);
  out.grad.add_scaled(hp.lambda, pair.grad);
  out.grad.add_scaled(hp.gamma, margin.grad);
  out.grad.add_scaled(hp.eta, ancpo.grad);
  return out;
}

}  // namespace sympo
