#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sympo/domain.hpp"
#include "sympo/objectives.hpp"
#include "sympo/partition.hpp"
#include "sympo/policy.hpp"
#include "sympo/rng.hpp"

// Independent oracles: finite-difference gradient checking against every
// analytic gradient, explicit partition-function cancellation checks, and
// arm-swap symmetry checks. Runnable as a battery (the `gradcheck`
// subcommand) and reused by the test suite.

namespace sympo::verify {

using LossEvaluator = std::function<double(const PolicyParams&)>;

// Central differences (L(W+h) - L(W-h)) / 2h per coordinate.
GradMatrix finite_diff_grad(const LossEvaluator& loss, const PolicyParams& params, double h);

struct GradCheckReport {
  LossId loss_id = LossId::dpo_m;
  int instance = 0;
  double max_rel_err = 0.0;
  std::size_t worst_row = 0;
  std::size_t worst_col = 0;
  bool passed = false;
};

// One random instance of the battery: a small world, random policy and
// reference parameters, and a tiny batch of well-formed samples.
struct RandomInstance {
  WorldConfig world;
  PolicyParams params;
  PolicyParams ref_params;
  HyperParams hp;
  GroundTruthReward reward;
  std::vector<SymmetricSample> batch;
};

// Deterministic in (seed, index): parameters uniform in [-1,1], images
// Bernoulli(0.5), geometry capped at feature_dim <= 16, catalog <= 16.
RandomInstance make_random_instance(std::uint64_t seed, int index);

// Evaluates the given loss on the instance's batch (value only / with grad).
double eval_loss(LossId id, const RandomInstance& inst, const PolicyParams& params);
LossResult eval_loss_grad(LossId id, const RandomInstance& inst);

GradCheckReport check_gradient(LossId id, const RandomInstance& inst, int instance_index,
                               double h, double tolerance);

struct BatteryConfig {
  std::uint64_t seed = 1729;
  int instances = 100;
  double h = 1e-5;
  double tolerance = 1e-5;
  std::optional<LossId> only;  // restrict to one loss
};

struct BatteryResult {
  std::vector<GradCheckReport> reports;
  bool all_passed = true;
};

// 7 losses x `instances` seeded random instances.
BatteryResult run_gradcheck_battery(const BatteryConfig& config);

struct CancellationReport {
  // (a) shared-conditioning losses recomputed with explicit +beta*ln Z terms
  double dpo_plain = 0.0;
  double dpo_explicit_z = 0.0;
  double pair_plain = 0.0;
  double pair_explicit_z = 0.0;
  // (b) contrastive loss where Z does not cancel
  double vco_plain = 0.0;
  double vco_star = 0.0;
  double c = 0.0;
  bool shared_z_cancels = false;  // |plain - explicit| <= 1e-10 for (a)
};

CancellationReport cancellation_check(const SymmetricSample& sample, const PolicyParams& params,
                                      const PolicyParams& ref_params,
                                      const GroundTruthReward& reward, const HyperParams& hp);

// The sample with its two arms exchanged: (image, y_w) <-> (image_c, y_w_c).
SymmetricSample swap_arms(const SymmetricSample& sample);

// |loss(sample) - loss(swapped)| <= tol for an arbitrary per-sample loss.
bool invariant_under_arm_swap(const std::function<double(const SymmetricSample&)>& loss_fn,
                              const SymmetricSample& sample, double tol);

// True iff loss_pair, loss_margin and loss_ancpo are all invariant (1e-12)
// under swapping the sample's arms.
bool symmetry_check(const SymmetricSample& sample, const PolicyParams& params,
                    const PolicyParams& ref_params, const HyperParams& hp);

}  // namespace sympo::verify
