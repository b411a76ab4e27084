#include "sympo/verify.hpp"

#include <algorithm>
#include <cmath>

#include "sympo/errors.hpp"
#include "sympo/numerics.hpp"

namespace sympo::verify {

GradMatrix finite_diff_grad(const LossEvaluator& loss, const PolicyParams& params, double h) {
  if (!(h > 0.0)) throw usage_error("finite-difference step must be positive");
  PolicyParams probe = params;
  GradMatrix g(params.W.rows, params.W.cols);
  for (size_t i = 0; i < g.size(); ++i) {
    const double w0 = params.W.data[i];
    probe.W.data[i] = w0 + h;
    const double up = loss(probe);
    probe.W.data[i] = w0 - h;
    const double down = loss(probe);
    probe.W.data[i] = w0;
    g.data[i] = (up - down) / (2.0 * h);
  }
  return g;
}

RandomInstance make_random_instance(std::uint64_t seed, int index) {
  SplitMix64 rng(stream_seed(seed, static_cast<std::uint64_t>(index)));
  RandomInstance inst;

  WorldConfig& w = inst.world;
  w.d_img = 2 + static_cast<int>(rng.next_below(7));            // 2..8
  w.n_prompts = 1 + static_cast<int>(rng.next_below(4));        // 1..4
  w.q = 1 + static_cast<int>(rng.next_below(
                 static_cast<std::uint64_t>(std::min(4, w.d_img))));  // K <= 16
  w.n_images = 2;
  w.flip_count = 1;
  w.seed = seed;

  inst.params = PolicyParams::zeros(w);
  inst.ref_params = PolicyParams::zeros(w);
  for (double& v : inst.params.W.data) v = rng.next_range(-1.0, 1.0);
  for (double& v : inst.ref_params.W.data) v = rng.next_range(-1.0, 1.0);

  inst.hp = HyperParams{};  // defaults: beta=0.1, delta=0, lambda=0.5, ...
  inst.reward = GroundTruthReward{1.0};

  const int K = w.catalog_size();
  const int n_samples = 1 + static_cast<int>(rng.next_below(4));  // 1..4
  for (int s = 0; s < n_samples; ++s) {
    SymmetricSample sample;
    sample.prompt.id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w.n_prompts)));
    // q distinct sorted positions
    std::vector<int> all(static_cast<size_t>(w.d_img));
    for (int i = 0; i < w.d_img; ++i) all[static_cast<size_t>(i)] = i;
    for (int t = 0; t < w.q; ++t) {
      const auto j = t + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w.d_img - t)));
      std::swap(all[static_cast<size_t>(t)], all[static_cast<size_t>(j)]);
    }
    sample.prompt.queried_positions.assign(all.begin(), all.begin() + w.q);
    std::sort(sample.prompt.queried_positions.begin(), sample.prompt.queried_positions.end());

    sample.image.resize(static_cast<size_t>(w.d_img));
    sample.image_c.resize(static_cast<size_t>(w.d_img));
    for (double& v : sample.image) v = rng.next_bool(0.5) ? 1.0 : 0.0;
    for (double& v : sample.image_c) v = rng.next_bool(0.5) ? 1.0 : 0.0;

    // q >= 1, so K >= 2 and distinct responses always exist
    sample.y_w = static_cast<ResponseId>(rng.next_below(static_cast<std::uint64_t>(K)));
    do {
      sample.y_l = static_cast<ResponseId>(rng.next_below(static_cast<std::uint64_t>(K)));
    } while (sample.y_l == sample.y_w);
    do {
      sample.y_w_c = static_cast<ResponseId>(rng.next_below(static_cast<std::uint64_t>(K)));
    } while (sample.y_w_c == sample.y_w);
    inst.batch.push_back(std::move(sample));
  }
  return inst;
}

double eval_loss(LossId id, const RandomInstance& inst, const PolicyParams& params) {
  return eval_loss_grad(id, RandomInstance{inst.world, params, inst.ref_params, inst.hp,
                                           inst.reward, inst.batch})
      .value.total;
}

LossResult eval_loss_grad(LossId id, const RandomInstance& inst) {
  const Batch b(inst.batch.data(), inst.batch.size());
  switch (id) {
    case LossId::dpo_m: return loss_dpo_m(b, inst.params, inst.ref_params, inst.hp);
    case LossId::vco: return loss_vco(b, inst.params, inst.ref_params, inst.hp);
    case LossId::vco_star:
      return loss_vco_star(b, inst.params, inst.ref_params, inst.reward, inst.hp);
    case LossId::pair: return loss_pair(b, inst.params, inst.ref_params, inst.hp);
    case LossId::margin: return loss_margin(b, inst.params, inst.ref_params, inst.hp);
    case LossId::ancpo: return loss_ancpo(b, inst.params, inst.ref_params, inst.hp);
    case LossId::symmpo: return loss_symmpo(b, inst.params, inst.ref_params, inst.hp);
  }
  throw usage_error("unknown loss id");
}

GradCheckReport check_gradient(LossId id, const RandomInstance& inst, int instance_index,
                               double h, double tolerance) {
  const LossResult analytic = eval_loss_grad(id, inst);
  const GradMatrix numeric = finite_diff_grad(
      [&](const PolicyParams& p) { return eval_loss(id, inst, p); }, inst.params, h);

  GradCheckReport report;
  report.loss_id = id;
  report.instance = instance_index;
  for (size_t i = 0; i < numeric.size(); ++i) {
    const double err = rel_err(analytic.grad.data[i], numeric.data[i]);
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_row = i / numeric.cols;
      report.worst_col = i % numeric.cols;
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

BatteryResult run_gradcheck_battery(const BatteryConfig& config) {
  static constexpr LossId kAll[] = {LossId::dpo_m, LossId::vco,   LossId::vco_star,
                                    LossId::pair,  LossId::margin, LossId::ancpo,
                                    LossId::symmpo};
  BatteryResult result;
  for (LossId id : kAll) {
    if (config.only && *config.only != id) continue;
    for (int i = 0; i < config.instances; ++i) {
      const RandomInstance inst = make_random_instance(config.seed, i);
      GradCheckReport report = check_gradient(id, inst, i, config.h, config.tolerance);
      result.all_passed = result.all_passed && report.passed;
      result.reports.push_back(report);
    }
  }
  return result;
}

CancellationReport cancellation_check(const SymmetricSample& sample, const PolicyParams& params,
                                      const PolicyParams& ref_params,
                                      const GroundTruthReward& reward, const HyperParams& hp) {
  CancellationReport rep;
  const Batch one(&sample, 1);
  const double beta = hp.beta;

  // implicit rewards with the partition term spelled out
  const double log_z_m = log_partition_z(ref_params, reward, sample.image, sample.prompt, hp);
  const double log_z_c = log_partition_z(ref_params, reward, sample.image_c, sample.prompt, hp);
  auto reward_m = [&](ResponseId y) {
    return beta * log_ratio(params, ref_params, sample.image, sample.prompt, y) +
           beta * log_z_m;
  };
  auto reward_c = [&](ResponseId y) {
    return beta * log_ratio(params, ref_params, sample.image_c, sample.prompt, y) +
           beta * log_z_c;
  };

  rep.dpo_plain = loss_dpo_m(one, params, ref_params, hp).value.total;
  rep.dpo_explicit_z = neg_log_sigmoid(reward_m(sample.y_w) - reward_m(sample.y_l));

  rep.pair_plain = loss_pair(one, params, ref_params, hp).value.total;
  rep.pair_explicit_z = neg_log_sigmoid(reward_m(sample.y_w) - reward_m(sample.y_w_c)) +
                        neg_log_sigmoid(reward_c(sample.y_w_c) - reward_c(sample.y_w));

  rep.vco_plain = loss_vco(one, params, ref_params, hp).value.total;
  rep.vco_star = neg_log_sigmoid(reward_m(sample.y_w) - reward_c(sample.y_w));
  rep.c = beta * (log_z_m - log_z_c);

  rep.shared_z_cancels = std::abs(rep.dpo_plain - rep.dpo_explicit_z) <= 1e-10 &&
                         std::abs(rep.pair_plain - rep.pair_explicit_z) <= 1e-10;
  return rep;
}

SymmetricSample swap_arms(const SymmetricSample& sample) {
  SymmetricSample s = sample;
  std::swap(s.image, s.image_c);
  std::swap(s.y_w, s.y_w_c);
  return s;
}

bool invariant_under_arm_swap(const std::function<double(const SymmetricSample&)>& loss_fn,
                              const SymmetricSample& sample, double tol) {
  return std::abs(loss_fn(sample) - loss_fn(swap_arms(sample))) <= tol;
}

bool symmetry_check(const SymmetricSample& sample, const PolicyParams& params,
                    const PolicyParams& ref_params, const HyperParams& hp) {
  const auto eval = [&](LossId id) {
    return [&, id](const SymmetricSample& s) {
      const Batch one(&s, 1);
      switch (id) {
        case LossId::pair: return loss_pair(one, params, ref_params, hp).value.total;
        case LossId::margin: return loss_margin(one, params, ref_params, hp).value.total;
        default: return loss_ancpo(one, params, ref_params, hp).value.total;
      }
    };
  };
  return invariant_under_arm_swap(eval(LossId::pair), sample, 1e-12) &&
         invariant_under_arm_swap(eval(LossId::margin), sample, 1e-12) &&
         invariant_under_arm_swap(eval(LossId::ancpo), sample, 1e-12);
}

}  // namespace sympo::verify
