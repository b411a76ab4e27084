#include "sympo/trainer.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sympo/confighash.hpp"
#include "sympo/errors.hpp"
#include "sympo/numerics.hpp"
#include "sympo/partition.hpp"
#include "sympo/rng.hpp"

namespace sympo {

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::dpo: return "dpo";
    case Objective::vco: return "vco";
    case Objective::vco_star: return "vco_star";
    case Objective::symmpo: return "symmpo";
    case Objective::symmpo_wo_pair: return "symmpo_wo_pair";
    case Objective::symmpo_wo_margin: return "symmpo_wo_margin";
    case Objective::symmpo_wo_ancpo: return "symmpo_wo_ancpo";
  }
  return "?";
}

Objective objective_from_string(const std::string& name) {
  for (Objective o : {Objective::dpo, Objective::vco, Objective::vco_star, Objective::symmpo,
                      Objective::symmpo_wo_pair, Objective::symmpo_wo_margin,
                      Objective::symmpo_wo_ancpo})
    if (name == to_string(o)) return o;
  throw config_error("unknown objective: " + name);
}

const char* to_string(Optimizer optimizer) {
  return optimizer == Optimizer::adam ? "adam" : "sgd";
}

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw config_error("unknown optimizer: " + name);
}

TrainConfig TrainConfig::canonical() const {
  TrainConfig c = *this;
  switch (c.objective) {
    case Objective::symmpo_wo_pair:
      c.objective = Objective::symmpo;
      c.hyper.lambda = 0.0;
      break;
    case Objective::symmpo_wo_margin:
      c.objective = Objective::symmpo;
      c.hyper.gamma = 0.0;
      break;
    case Objective::symmpo_wo_ancpo:
      c.objective = Objective::symmpo;
      c.hyper.eta = 0.0;
      break;
    default: break;
  }
  if (c.objective == Objective::symmpo && c.hyper.lambda == 0.0 && c.hyper.gamma == 0.0 &&
      c.hyper.eta == 0.0)
    c.objective = Objective::dpo;

  // zero out knobs the resolved objective never reads
  const bool composite = c.objective == Objective::symmpo;
  if (!composite) {
    c.hyper.lambda = 0.0;
    c.hyper.gamma = 0.0;
    c.hyper.eta = 0.0;
    c.hyper.delta = 0.0;
    c.hyper.margin_uses_beta = false;
  }
  if (c.objective != Objective::vco_star) c.reward_scale = 0.0;
  return c;
}

namespace {

LossResult eval_objective(const TrainConfig& config, Batch batch, const PolicyParams& params,
                          const PolicyParams& ref) {
  switch (config.objective) {
    case Objective::dpo: return loss_dpo_m(batch, params, ref, config.hyper);
    case Objective::vco: return loss_vco(batch, params, ref, config.hyper);
    case Objective::vco_star:
      return loss_vco_star(batch, params, ref, GroundTruthReward{config.reward_scale},
                           config.hyper);
    default: return loss_symmpo(batch, params, ref, config.hyper);
  }
}

struct AdamState {
  Matrix m;
  Matrix v;
  long t = 0;
};

void apply_update(const TrainConfig& config, PolicyParams& params, const GradMatrix& grad,
                  AdamState& adam) {
  const double lr = config.hyper.lr;
  if (config.optimizer == Optimizer::sgd) {
    params.W.add_scaled(-lr, grad);
    return;
  }
  adam.t += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  for (size_t i = 0; i < grad.size(); ++i) {
    const double g = grad.data[i];
    adam.m.data[i] = b1 * adam.m.data[i] + (1.0 - b1) * g;
    adam.v.data[i] = b2 * adam.v.data[i] + (1.0 - b2) * g * g;
    const double mhat = adam.m.data[i] / bc1;
    const double vhat = adam.v.data[i] / bc2;
    params.W.data[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
  }
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& raw_config,
                  const PolicyParams* init_params) {
  const TrainConfig config = raw_config.canonical();
  config.hyper.validate();

  const std::vector<SymmetricSample> train_split = dataset.split(false);
  const std::vector<SymmetricSample> heldout_split = dataset.split(true);
  if (train_split.empty()) throw usage_error("dataset has no training samples");
  if (static_cast<size_t>(config.hyper.batch_size) > train_split.size())
    throw usage_error("batch_size exceeds the training split size");

  TrainResult result;
  result.params = init_params ? *init_params : PolicyParams::zeros(dataset.config);
  if (result.params.d_img != dataset.config.d_img ||
      result.params.n_prompts != dataset.config.n_prompts ||
      result.params.catalog != dataset.config.catalog_size())
    throw config_error("initial parameters do not match the dataset geometry");
  const PolicyParams ref = result.params;  // reference frozen at initialization

  const HyperParams& hp = config.hyper;
  const size_t n = train_split.size();
  const size_t batch = static_cast<size_t>(hp.batch_size);
  const size_t steps_per_epoch = (n + batch - 1) / batch;

  AdamState adam;
  if (config.optimizer == Optimizer::adam) {
    adam.m = Matrix(result.params.W.rows, result.params.W.cols);
    adam.v = Matrix(result.params.W.rows, result.params.W.cols);
  }

  int last_eval_step = -1;
  auto run_eval = [&](int step) {
    if (heldout_split.empty() || step == last_eval_step) return;
    EvalRecord rec;
    rec.step = step;
    const HallucinationMetrics hm = evaluate_hallucination_rate(result.params, heldout_split);
    rec.hallucination_rate = hm.response_rate;
    rec.mention_rate = hm.mention_rate;
    rec.contrastive_accuracy =
        evaluate_contrastive_accuracy(result.params, ref, heldout_split, hp);
    result.log.evals.push_back(rec);
    last_eval_step = step;
  };

  run_eval(0);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<SymmetricSample> scratch(batch);

  int step = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    // fresh seeded permutation each epoch
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(stream_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) {
      const size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(start + batch, n);
      scratch.clear();
      for (size_t i = start; i < end; ++i) scratch.push_back(train_split[order[i]]);

      const LossResult loss =
          eval_objective(config, Batch(scratch.data(), scratch.size()), result.params, ref);
      const double grad_norm = std::sqrt(loss.grad.frobenius_norm_sq());

      ++step;
      StepRecord rec;
      rec.step = step;
      rec.loss_total = loss.value.total;
      rec.components = loss.value.components;
      rec.grad_norm = grad_norm;
      result.log.steps.push_back(rec);

      if (!std::isfinite(loss.value.total) || !std::isfinite(grad_norm)) {
        result.aborted = true;
        result.log.abort_reason = "non-finite loss or gradient";
        result.log.abort_step = step;
        return result;
      }

      apply_update(config, result.params, loss.grad, adam);

      if (config.eval_every > 0 && step % config.eval_every == 0) run_eval(step);
    }
  }
  run_eval(step);
  return result;
}

HallucinationMetrics evaluate_hallucination_rate(const PolicyParams& params,
                                                 std::span<const SymmetricSample> split) {
  if (split.empty()) throw usage_error("empty evaluation split");
  HallucinationMetrics m;
  for (const SymmetricSample& s : split) {
    const ResponseId predicted = argmax_response(params, s.image, s.prompt);
    const ResponseId correct = preferred_response(s.image, s.prompt);
    const int q = static_cast<int>(s.prompt.queried_positions.size());
    const int wrong = std::popcount(static_cast<unsigned>(predicted ^ correct));
    if (wrong > 0) m.response_rate += 1.0;
    m.mention_rate += static_cast<double>(wrong) / static_cast<double>(q);
  }
  m.response_rate /= static_cast<double>(split.size());
  m.mention_rate /= static_cast<double>(split.size());
  return m;
}

double evaluate_contrastive_accuracy(const PolicyParams& params, const PolicyParams& ref_params,
                                     std::span<const SymmetricSample> split,
                                     const HyperParams& hp) {
  if (split.empty()) throw usage_error("empty evaluation split");
  size_t hits = 0;
  for (const SymmetricSample& s : split) {
    const double bt_m =
        bt_probability(hp.beta * log_ratio(params, ref_params, s.image, s.prompt, s.y_w),
                       hp.beta * log_ratio(params, ref_params, s.image, s.prompt, s.y_w_c));
    const double bt_c =
        bt_probability(hp.beta * log_ratio(params, ref_params, s.image_c, s.prompt, s.y_w_c),
                       hp.beta * log_ratio(params, ref_params, s.image_c, s.prompt, s.y_w));
    if (bt_m > 0.5 && bt_c > 0.5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& raw) {
  const TrainConfig c = raw.canonical();
  nlohmann::ordered_json j;
  j["objective"] = to_string(c.objective);
  j["beta"] = c.hyper.beta;
  j["delta"] = c.hyper.delta;
  j["lambda"] = c.hyper.lambda;
  j["gamma"] = c.hyper.gamma;
  j["eta"] = c.hyper.eta;
  j["lr"] = c.hyper.lr;
  j["epochs"] = c.hyper.epochs;
  j["batch_size"] = c.hyper.batch_size;
  j["margin_uses_beta"] = c.hyper.margin_uses_beta;
  j["optimizer"] = to_string(c.optimizer);
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["shuffle_seed"] = c.shuffle_seed;
  j["eval_every"] = c.eval_every;
  j["reward_scale"] = c.reward_scale;
  return j;
}

std::string train_config_hash(const TrainConfig& config, const std::string& dataset_hash) {
  nlohmann::ordered_json j;
  j["kind"] = "train";
  j["dataset"] = dataset_hash;
  j["train"] = train_config_to_json(config);
  return config_hash(j);
}

void write_metrics_jsonl(const std::string& path, const MetricsLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write " + path);

  size_t ei = 0;
  auto emit_evals_at = [&](int step) {
    while (ei < log.evals.size() && log.evals[ei].step <= step) {
      const EvalRecord& e = log.evals[ei++];
      nlohmann::ordered_json j;
      j["kind"] = "eval";
      j["step"] = e.step;
      j["hallucination_rate"] = e.hallucination_rate;
      j["mention_rate"] = e.mention_rate;
      j["contrastive_accuracy"] = e.contrastive_accuracy;
      out << j.dump() << '\n';
    }
  };

  emit_evals_at(0);
  for (const StepRecord& s : log.steps) {
    nlohmann::ordered_json j;
    j["kind"] = "step";
    j["step"] = s.step;
    j["loss_total"] = s.loss_total;
    for (const auto& [id, v] : s.components) j[to_string(id)] = v;
    j["grad_norm"] = s.grad_norm;
    out << j.dump() << '\n';
    emit_evals_at(s.step);
  }
  emit_evals_at(log.steps.empty() ? 0 : log.steps.back().step);

  if (log.abort_reason) {
    nlohmann::ordered_json j;
    j["kind"] = "abort";
    j["step"] = log.abort_step;
    j["reason"] = *log.abort_reason;
    out << j.dump() << '\n';
  }
}

}  // namespace sympo
