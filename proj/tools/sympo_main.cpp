// sympo: generation, training, verification and reporting for the toy
// preference-optimization lab. Machine-readable output (JSONL/CSV) goes to
// stdout or files; human summaries go to stderr. All randomness flows from
// explicit seed flags, so identical invocations produce byte-identical
// artifacts.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sympo/confighash.hpp"
#include "sympo/datagen.hpp"
#include "sympo/domain.hpp"
#include "sympo/errors.hpp"
#include "sympo/kernels.hpp"
#include "sympo/objectives.hpp"
#include "sympo/partition.hpp"
#include "sympo/policy.hpp"
#include "sympo/trainer.hpp"
#include "sympo/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct WorldFlags {
  sympo::WorldConfig config;
  double heldout_frac = 0.1;
  std::string mode = "similar";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--seed", config.seed, "world seed")->capture_default_str();
    cmd->add_option("--d-img", config.d_img, "image attribute count")->capture_default_str();
    cmd->add_option("--n-prompts", config.n_prompts, "number of prompts")->capture_default_str();
    cmd->add_option("--q", config.q, "assertions per prompt")->capture_default_str();
    cmd->add_option("--n-images", config.n_images, "number of images")->capture_default_str();
    cmd->add_option("--flip-count", config.flip_count, "hallucination bit flips")
        ->capture_default_str();
    cmd->add_option("--contrastive-mode", mode, "similar|black|cropped|noisy|synthetic")
        ->capture_default_str();
    cmd->add_option("--noise-sigma", config.noise_sigma, "gaussian noise sigma (noisy mode)")
        ->capture_default_str();
    cmd->add_option("--heldout-frac", heldout_frac, "held-out fraction")->capture_default_str();
  }

  sympo::WorldConfig resolve() const {
    sympo::WorldConfig c = config;
    c.contrastive_mode = sympo::contrastive_mode_from_string(mode);
    return c;
  }
};

struct TrainFlags {
  std::string objective = "symmpo";
  std::string ablate;
  std::string optimizer = "sgd";
  sympo::HyperParams hyper;
  std::uint64_t shuffle_seed = 0;
  int eval_every = 0;
  double reward_scale = 1.0;
  bool paper_defaults = false;
  std::string ref_checkpoint;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--objective", objective,
                    "dpo|vco|vco_star|symmpo|symmpo_wo_{pair,margin,ancpo}")
        ->capture_default_str();
    cmd->add_option("--ablate", ablate, "drop one symmpo component: pair|margin|ancpo");
    cmd->add_option("--beta", hyper.beta, "KL strength")->capture_default_str();
    cmd->add_option("--delta", hyper.delta, "anchor")->capture_default_str();
    cmd->add_option("--lambda", hyper.lambda, "pair weight")->capture_default_str();
    cmd->add_option("--gamma", hyper.gamma, "margin weight")->capture_default_str();
    cmd->add_option("--eta", hyper.eta, "anchor weight")->capture_default_str();
    cmd->add_option("--lr", hyper.lr, "learning rate (toy default)")->capture_default_str();
    cmd->add_option("--epochs", hyper.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch-size", hyper.batch_size, "mini-batch size")->capture_default_str();
    cmd->add_flag("--margin-uses-beta", hyper.margin_uses_beta,
                  "scale the margin gap by beta (off: printed definition)");
    cmd->add_option("--optimizer", optimizer, "sgd|adam")->capture_default_str();
    cmd->add_option("--shuffle-seed", shuffle_seed, "epoch shuffle seed")->capture_default_str();
    cmd->add_option("--eval-every", eval_every, "evaluate every N steps (0: start/end only)")
        ->capture_default_str();
    cmd->add_option("--reward-scale", reward_scale, "ground-truth reward scale (vco_star)")
        ->capture_default_str();
    cmd->add_flag("--paper-defaults", paper_defaults,
                  "use lr=5e-6 (does not converge at toy scale)");
    cmd->add_option("--ref-checkpoint", ref_checkpoint,
                    "initialize policy and reference from a checkpoint");
  }

  sympo::TrainConfig resolve() const {
    sympo::TrainConfig c;
    if (!ablate.empty()) {
      if (objective != "symmpo")
        throw sympo::config_error("--ablate applies to the symmpo objective only");
      c.objective = sympo::objective_from_string("symmpo_wo_" + ablate);
    } else {
      c.objective = sympo::objective_from_string(objective);
    }
    c.hyper = hyper;
    if (paper_defaults) c.hyper.lr = 5e-6;
    c.optimizer = sympo::optimizer_from_string(optimizer);
    c.shuffle_seed = shuffle_seed;
    c.eval_every = eval_every;
    c.reward_scale = reward_scale;
    return c;
  }
};

std::string json_num(double v) { return ordered_json(v).dump(); }

sympo::PolicyParams load_params_or_zeros(const std::string& path,
                                         const sympo::WorldConfig& world) {
  if (path.empty()) return sympo::PolicyParams::zeros(world);
  return sympo::load_checkpoint(path);
}

int cmd_gen_data(const WorldFlags& flags, const std::string& out_dir) {
  const sympo::WorldConfig config = flags.resolve();
  config.validate();
  const sympo::Dataset ds = sympo::build_preference_dataset(config, flags.heldout_frac);
  sympo::save_dataset(out_dir, ds);
  size_t heldout = 0;
  for (auto h : ds.heldout) heldout += h;
  std::cerr << "gen-data: " << ds.samples.size() << " samples (" << heldout << " held out, "
            << ds.dropped << " dropped, " << ds.neighbor_interventions
            << " neighbor interventions) -> " << out_dir << " [" << sympo::dataset_config_hash(ds)
            << "]\n";
  return 0;
}

struct TrainOutputs {
  ordered_json summary;
};

TrainOutputs run_training(const sympo::Dataset& ds, const sympo::TrainConfig& config,
                          const std::string& ref_checkpoint, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::optional<sympo::PolicyParams> init;
  if (!ref_checkpoint.empty()) init = sympo::load_checkpoint(ref_checkpoint);

  const sympo::TrainResult result = sympo::train(ds, config, init ? &*init : nullptr);

  const std::string hash = sympo::train_config_hash(config, sympo::dataset_config_hash(ds));
  sympo::save_checkpoint((fs::path(out_dir) / "checkpoint.symp").string(), result.params);
  sympo::write_metrics_jsonl((fs::path(out_dir) / "metrics.jsonl").string(), result.log);

  ordered_json summary;
  summary["config_hash"] = hash;
  summary["objective"] = sympo::to_string(config.canonical().objective);
  summary["steps"] = result.log.steps.size();
  if (!result.log.steps.empty())
    summary["final_loss"] = result.log.steps.back().loss_total;
  else
    summary["final_loss"] = nullptr;
  if (!result.log.evals.empty()) {
    const auto& e = result.log.evals.back();
    summary["hallucination_rate"] = e.hallucination_rate;
    summary["mention_rate"] = e.mention_rate;
    summary["contrastive_accuracy"] = e.contrastive_accuracy;
  } else {
    summary["hallucination_rate"] = nullptr;
    summary["mention_rate"] = nullptr;
    summary["contrastive_accuracy"] = nullptr;
  }
  summary["aborted"] = result.aborted;
  if (result.aborted) summary["abort_reason"] = *result.log.abort_reason;

  std::ofstream out(fs::path(out_dir) / "summary.json", std::ios::binary | std::ios::trunc);
  out << summary.dump(2) << '\n';
  return TrainOutputs{summary};
}

int cmd_train(const TrainFlags& flags, const std::string& data_dir, const std::string& out_dir) {
  const sympo::Dataset ds = sympo::load_dataset(data_dir);
  const sympo::TrainConfig config = flags.resolve();
  const TrainOutputs outputs = run_training(ds, config, flags.ref_checkpoint, out_dir);
  std::cout << outputs.summary.dump() << '\n';
  if (outputs.summary["aborted"].get<bool>()) {
    std::cerr << "train: aborted: " << outputs.summary["abort_reason"].get<std::string>() << '\n';
    return 1;
  }
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& checkpoint,
             const std::string& ref_checkpoint, double beta, const std::string& split) {
  const sympo::Dataset ds = sympo::load_dataset(data_dir);
  const sympo::PolicyParams params = sympo::load_checkpoint(checkpoint);
  const sympo::PolicyParams ref = load_params_or_zeros(ref_checkpoint, ds.config);

  std::vector<sympo::SymmetricSample> samples;
  if (split == "heldout")
    samples = ds.split(true);
  else if (split == "train")
    samples = ds.split(false);
  else if (split == "all")
    samples = ds.samples;
  else
    throw sympo::config_error("unknown split: " + split);
  if (samples.empty()) throw sympo::usage_error("selected split is empty");

  sympo::HyperParams hp;
  hp.beta = beta;
  const auto hm = sympo::evaluate_hallucination_rate(params, samples);
  ordered_json j;
  j["split"] = split;
  j["n"] = samples.size();
  j["hallucination_rate"] = hm.response_rate;
  j["mention_rate"] = hm.mention_rate;
  j["contrastive_accuracy"] = sympo::evaluate_contrastive_accuracy(params, ref, samples, hp);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_gradcheck(const sympo::verify::BatteryConfig& config, const std::string& out_path) {
  const sympo::verify::BatteryResult result = sympo::verify::run_gradcheck_battery(config);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw sympo::config_error("cannot write " + out_path);
    out = &file;
  }
  for (const auto& r : result.reports) {
    ordered_json j;
    j["loss"] = sympo::to_string(r.loss_id);
    j["instance"] = r.instance;
    j["max_rel_err"] = r.max_rel_err;
    j["worst_row"] = r.worst_row;
    j["worst_col"] = r.worst_col;
    j["passed"] = r.passed;
    *out << j.dump() << '\n';
  }
  std::cerr << "gradcheck: " << result.reports.size() << " checks, "
            << (result.all_passed ? "all passed" : "FAILURES") << " (tolerance "
            << json_num(config.tolerance) << ")\n";
  return result.all_passed ? 0 : 1;
}

int cmd_partition_report(const std::string& data_dir, const std::string& checkpoint,
                         const std::string& ref_checkpoint, double reward_scale, double beta,
                         const std::string& out_path) {
  const sympo::Dataset ds = sympo::load_dataset(data_dir);
  if (ds.samples.empty()) throw sympo::usage_error("dataset is empty");
  const sympo::PolicyParams params = load_params_or_zeros(checkpoint, ds.config);
  const sympo::PolicyParams ref = load_params_or_zeros(ref_checkpoint, ds.config);

  sympo::HyperParams hp;
  hp.beta = beta;
  const sympo::GroundTruthReward reward{reward_scale};
  const auto reports = sympo::compare_vco_gradients(
      sympo::Batch(ds.samples.data(), ds.samples.size()), params, ref, reward, hp);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw sympo::config_error("cannot write " + out_path);
    out = &file;
  }
  double c_min = 0.0, c_max = 0.0;
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    ordered_json j;
    j["u"] = r.u;
    j["c"] = r.c;
    j["coef_star"] = r.coef_star;
    j["coef_plain"] = r.coef_plain;
    j["loss_vco"] = r.loss_vco;
    j["loss_vco_star"] = r.loss_vco_star;
    *out << j.dump() << '\n';
    c_min = i == 0 ? r.c : std::min(c_min, r.c);
    c_max = i == 0 ? r.c : std::max(c_max, r.c);
  }

  // c histogram on stderr
  constexpr int kBins = 10;
  std::vector<size_t> bins(kBins, 0);
  const double width = (c_max - c_min) / kBins;
  for (const auto& r : reports) {
    int b = width > 0.0 ? static_cast<int>((r.c - c_min) / width) : 0;
    bins[static_cast<size_t>(std::clamp(b, 0, kBins - 1))]++;
  }
  std::cerr << "partition-report: " << reports.size() << " samples, c in ["
            << json_num(c_min) << ", " << json_num(c_max) << "]\n";
  for (int b = 0; b < kBins; ++b)
    std::cerr << "  c bin " << b << " [" << json_num(c_min + b * width) << ", "
              << json_num(c_min + (b + 1) * width) << "): " << bins[static_cast<size_t>(b)]
              << '\n';
  return 0;
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::string tok;
  std::istringstream ss(csv);
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw sympo::config_error("empty grid: " + csv);
  return out;
}

int cmd_sweep(const WorldFlags& world_flags, const TrainFlags& train_flags,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& lr_grid, const std::string& lambda_grid,
              const std::string& gamma_grid, const std::string& mode_grid, bool paper_grids) {
  if (!data_dir.empty() && !mode_grid.empty())
    throw sympo::config_error("--mode-grid regenerates data per cell; drop --data");

  const sympo::TrainConfig base = train_flags.resolve();
  std::vector<double> lrs{base.hyper.lr};
  std::vector<double> lambdas{base.hyper.lambda};
  std::vector<double> gammas{base.hyper.gamma};
  if (paper_grids) {
    lrs = {5e-5, 5e-6, 5e-7};
    lambdas = {0.1, 0.3, 0.5, 0.7, 0.9};
    gammas = {1e-2, 1e-3, 1e-4, 1e-5};
  }
  if (!lr_grid.empty()) lrs = parse_grid(lr_grid);
  if (!lambda_grid.empty()) lambdas = parse_grid(lambda_grid);
  if (!gamma_grid.empty()) gammas = parse_grid(gamma_grid);
  std::vector<std::string> modes;
  if (!mode_grid.empty()) {
    std::string tok;
    std::istringstream ss(mode_grid);
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) modes.push_back(tok);
    if (modes.empty()) throw sympo::config_error("empty mode grid");
  }

  fs::create_directories(out_dir);

  // datasets: one shared, or one per contrastive mode, generated on demand
  auto dataset_for = [&](const std::string& mode) -> fs::path {
    if (!data_dir.empty()) return data_dir;
    sympo::WorldConfig wc = world_flags.resolve();
    if (!mode.empty()) wc.contrastive_mode = sympo::contrastive_mode_from_string(mode);
    const fs::path dir =
        fs::path(out_dir) / ("data-" + std::string(sympo::to_string(wc.contrastive_mode)));
    if (!fs::exists(dir / "meta.json")) {
      wc.validate();
      sympo::save_dataset(dir.string(),
                          sympo::build_preference_dataset(wc, world_flags.heldout_frac));
    }
    return dir;
  };

  struct Row {
    std::string cell;
    std::string loss, rate, acc;
  };
  std::vector<Row> rows;

  const std::vector<std::string> mode_axis = modes.empty() ? std::vector<std::string>{""} : modes;
  for (const std::string& mode : mode_axis) {
    const fs::path data = dataset_for(mode);
    const sympo::Dataset ds = sympo::load_dataset(data.string());
    const std::string ds_hash = sympo::dataset_config_hash(ds);
    for (double lr : lrs) {
      for (double lambda : lambdas) {
        for (double gamma : gammas) {
          sympo::TrainConfig cell_config = base;
          cell_config.hyper.lr = lr;
          cell_config.hyper.lambda = lambda;
          cell_config.hyper.gamma = gamma;

          std::string cell;
          if (!mode.empty()) cell += "mode=" + mode + ",";
          cell += "lr=" + json_num(lr) + ",lambda=" + json_num(lambda) +
                  ",gamma=" + json_num(gamma);

          const std::string hash = sympo::train_config_hash(cell_config, ds_hash);
          const fs::path cell_dir = fs::path(out_dir) / "cells" / hash;
          const fs::path summary_path = cell_dir / "summary.json";
          ordered_json summary;
          if (fs::exists(summary_path)) {
            std::ifstream in(summary_path, std::ios::binary);
            in >> summary;  // completed cell: reuse, do not recompute
          } else {
            summary =
                run_training(ds, cell_config, train_flags.ref_checkpoint, cell_dir.string())
                    .summary;
          }
          Row row;
          row.cell = cell;
          row.loss = summary["final_loss"].is_null() ? "" : summary["final_loss"].dump();
          row.rate = summary["hallucination_rate"].is_null()
                         ? ""
                         : summary["hallucination_rate"].dump();
          row.acc = summary["contrastive_accuracy"].is_null()
                        ? ""
                        : summary["contrastive_accuracy"].dump();
          rows.push_back(row);
          std::cerr << "sweep: " << cell << " [" << hash << "] done\n";
        }
      }
    }
  }

  std::ofstream csv(fs::path(out_dir) / "sweep.csv", std::ios::binary | std::ios::trunc);
  csv << "cell,loss,hallucination_rate,contrastive_accuracy\n";
  for (const Row& r : rows)
    csv << '"' << r.cell << "\"," << r.loss << ',' << r.rate << ',' << r.acc << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy lab for symmetric multimodal preference optimization"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic preference dataset");
  WorldFlags gen_world;
  std::string gen_out;
  gen_world.add_to(gen);
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train the toy policy");
  TrainFlags train_flags;
  std::string train_data, train_out;
  train_flags.add_to(train);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_ref, eval_split = "heldout";
  double eval_beta = 0.1;
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  eval->add_option("--ref-checkpoint", eval_ref, "reference checkpoint (default: W=0)");
  eval->add_option("--beta", eval_beta, "beta for contrastive accuracy")->capture_default_str();
  eval->add_option("--split", eval_split, "heldout|train|all")->capture_default_str();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient battery");
  sympo::verify::BatteryConfig battery;
  std::string gradcheck_loss, gradcheck_out;
  gradcheck->add_option("--seed", battery.seed, "battery seed")->capture_default_str();
  gradcheck->add_option("--instances", battery.instances, "instances per loss")
      ->capture_default_str();
  gradcheck->add_option("--tolerance", battery.tolerance, "max relative error")
      ->capture_default_str();
  gradcheck->add_option("--h", battery.h, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--loss", gradcheck_loss,
                        "restrict to one loss (dpo_m|vco|vco_star|pair|margin|ancpo|symmpo)");
  gradcheck->add_option("--out", gradcheck_out, "report file (default stdout)");

  // partition-report
  auto* partition = app.add_subcommand("partition-report", "per-sample partition analysis");
  std::string part_data, part_ckpt, part_ref, part_out;
  double part_scale = 1.0, part_beta = 0.1;
  partition->add_option("--data", part_data, "dataset directory")->required();
  partition->add_option("--checkpoint", part_ckpt, "policy checkpoint (default: W=0)");
  partition->add_option("--ref-checkpoint", part_ref, "reference checkpoint (default: W=0)");
  partition->add_option("--reward-scale", part_scale, "ground-truth reward scale")
      ->capture_default_str();
  partition->add_option("--beta", part_beta, "beta")->capture_default_str();
  partition->add_option("--out", part_out, "report file (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid sweep with resumable cells");
  WorldFlags sweep_world;
  TrainFlags sweep_train;
  std::string sweep_data, sweep_out, lr_grid, lambda_grid, gamma_grid, mode_grid;
  bool paper_grids = false;
  sweep_world.add_to(sweep);
  sweep_train.add_to(sweep);
  sweep->add_option("--data", sweep_data, "pre-generated dataset directory");
  sweep->add_option("--out", sweep_out, "sweep output directory")->required();
  sweep->add_option("--lr-grid", lr_grid, "comma-separated lr values");
  sweep->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
  sweep->add_option("--gamma-grid", gamma_grid, "comma-separated gamma values");
  sweep->add_option("--mode-grid", mode_grid, "comma-separated contrastive modes");
  sweep->add_flag("--paper-grids", paper_grids,
                  "lr {5e-5,5e-6,5e-7}, lambda {0.1..0.9}, gamma {1e-2..1e-5}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_world, gen_out);
    if (train->parsed()) return cmd_train(train_flags, train_data, train_out);
    if (eval->parsed())
      return cmd_eval(eval_data, eval_ckpt, eval_ref, eval_beta, eval_split);
    if (gradcheck->parsed()) {
      if (!gradcheck_loss.empty()) {
        for (sympo::LossId id :
             {sympo::LossId::dpo_m, sympo::LossId::vco, sympo::LossId::vco_star,
              sympo::LossId::pair, sympo::LossId::margin, sympo::LossId::ancpo,
              sympo::LossId::symmpo})
          if (gradcheck_loss == sympo::to_string(id)) battery.only = id;
        if (!battery.only)
          throw sympo::config_error("unknown loss filter: " + gradcheck_loss);
      }
      return cmd_gradcheck(battery, gradcheck_out);
    }
    if (partition->parsed())
      return cmd_partition_report(part_data, part_ckpt, part_ref, part_scale, part_beta,
                                  part_out);
    if (sweep->parsed())
      return cmd_sweep(sweep_world, sweep_train, sweep_data, sweep_out, lr_grid, lambda_grid,
                       gamma_grid, mode_grid, paper_grids);
  } catch (const sympo::config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sympo::usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sympo::generation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
