#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sympo/datagen.hpp"
#include "sympo/domain.hpp"
#include "sympo/objectives.hpp"
#include "sympo/policy.hpp"

// Deterministic mini-batch training of the toy policy under any configured
// objective, with hallucination-style evaluation on the held-out split.

namespace sympo {

enum class Objective {
  dpo,
  vco,
  vco_star,
  symmpo,
  symmpo_wo_pair,
  symmpo_wo_margin,
  symmpo_wo_ancpo,
};
const char* to_string(Objective objective);
Objective objective_from_string(const std::string& name);

enum class Optimizer { sgd, adam };
const char* to_string(Optimizer optimizer);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
  Objective objective = Objective::symmpo;
  HyperParams hyper;
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t shuffle_seed = 0;
  int eval_every = 0;          // 0: evaluate only before and after training
  double reward_scale = 1.0;   // ground-truth reward scale for vco_star

  // Resolves ablation aliases (symmpo_wo_* -> symmpo with the weight
  // zeroed), collapses symmpo with lambda=gamma=eta=0 to dpo, and zeroes
  // knobs the resolved objective does not read. Equivalent configs thus
  // share one canonical form, one hash, and byte-identical runs.
  TrainConfig canonical() const;
};

struct StepRecord {
  int step = 0;
  double loss_total = 0.0;
  std::vector<std::pair<LossId, double>> components;
  double grad_norm = 0.0;
};

struct EvalRecord {
  int step = 0;
  double hallucination_rate = 0.0;
  double mention_rate = 0.0;
  double contrastive_accuracy = 0.0;
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::optional<std::string> abort_reason;
  int abort_step = -1;
};

struct TrainResult {
  PolicyParams params;
  MetricsLog log;
  bool aborted = false;
};

// Runs epochs * ceil(N/batch) steps over the train split with a seeded
// shuffle per epoch. The reference model is frozen to the initial
// parameters (W=0 unless init_params is given). Deterministic given the
// config, including across thread counts.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const PolicyParams* init_params = nullptr);

struct HallucinationMetrics {
  double response_rate = 0.0;  // fraction of argmax responses with >=1 wrong assertion
  double mention_rate = 0.0;   // mean fraction of wrong assertions per response
};

HallucinationMetrics evaluate_hallucination_rate(const PolicyParams& params,
                                                 std::span<const SymmetricSample> split);

// Fraction of samples where y_w beats y_w_c under the image AND y_w_c beats
// y_w under the contrastive image (both Bradley-Terry probabilities
// strictly above 0.5).
double evaluate_contrastive_accuracy(const PolicyParams& params, const PolicyParams& ref_params,
                                     std::span<const SymmetricSample> split,
                                     const HyperParams& hp);

// Canonical JSON of the canonicalized config (the hash input).
nlohmann::ordered_json train_config_to_json(const TrainConfig& config);
std::string train_config_hash(const TrainConfig& config, const std::string& dataset_hash);

// metrics.jsonl: {"kind":"step",...} / {"kind":"eval",...} records in step
// order, plus a trailing {"kind":"abort",...} record when training aborted.
void write_metrics_jsonl(const std::string& path, const MetricsLog& log);

}  // namespace sympo
