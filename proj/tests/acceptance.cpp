// Acceptance suite: eight numbered criteria, one pass/fail line each.
// Usage: acceptance <path-to-sympo-binary>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sympo/datagen.hpp"
#include "sympo/numerics.hpp"
#include "sympo/objectives.hpp"
#include "sympo/parallel.hpp"
#include "sympo/partition.hpp"
#include "sympo/policy.hpp"
#include "sympo/trainer.hpp"
#include "sympo/verify.hpp"

namespace fs = std::filesystem;
using namespace sympo;

namespace {

std::string g_cli;
fs::path g_work;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  const std::string sa = slurp(a);
  return !sa.empty() && sa == slurp(b);
}

int run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += "\"" + g_cli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- criterion 1: exact initialization value --------------------------------

bool criterion_1(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  WorldConfig world;  // defaults, seed 7
  const Dataset ds = build_preference_dataset(world);
  const size_t n = std::min<size_t>(64, ds.samples.size());

  HyperParams hp;  // beta=0.1, delta=0, lambda=0.5, gamma=1e-4, eta=1.0
  const PolicyParams zeros = PolicyParams::zeros(world);
  const auto loss = loss_symmpo(Batch(ds.samples.data(), n), zeros, zeros, hp);

  const double expected = 4.0 * std::log(2.0);
  const double err = std::abs(loss.value.total - expected);
  const double elapsed = seconds_since(start);
  std::ostringstream os;
  os << "loss=" << loss.value.total << " |err|=" << err << " elapsed=" << elapsed << "s";
  detail = os.str();
  return err <= 1e-12 && elapsed < 1.0;
}

// ---- criterion 2: gradient battery ------------------------------------------

bool criterion_2(std::string& detail) {
  parallel::set_thread_cap(1);
  const auto start = std::chrono::steady_clock::now();
  verify::BatteryConfig config;  // 7 losses x 100 instances, h=1e-5, tol=1e-5
  const auto result = verify::run_gradcheck_battery(config);
  const double elapsed = seconds_since(start);
  parallel::set_thread_cap(0);

  double worst = 0.0;
  for (const auto& r : result.reports) worst = std::max(worst, r.max_rel_err);
  std::ostringstream os;
  os << result.reports.size() << " checks, worst rel err=" << worst << ", elapsed=" << elapsed
     << "s";
  detail = os.str();
  return result.all_passed && result.reports.size() == 700 && elapsed < 60.0;
}

// ---- criterion 3: cancellation theorem --------------------------------------

bool criterion_3(std::string& detail) {
  const GroundTruthReward reward{1.0};
  int material = 0;
  double worst_shared = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = verify::make_random_instance(2025, i);
    const auto& s = inst.batch.front();
    const auto rep =
        verify::cancellation_check(s, inst.params, inst.ref_params, reward, inst.hp);
    worst_shared = std::max({worst_shared, std::abs(rep.dpo_plain - rep.dpo_explicit_z),
                             std::abs(rep.pair_plain - rep.pair_explicit_z)});
    if (worst_shared > 1e-10) {
      detail = "shared-Z cancellation failed at instance " + std::to_string(i);
      return false;
    }
    if (std::abs(rep.c) > 0.1) {
      ++material;
      if (std::abs(rep.vco_plain - rep.vco_star) <= 1e-4) {
        detail = "vco gap too small at instance " + std::to_string(i);
        return false;
      }
    }
    try {  // gradient-ratio identity asserted inside (1e-10 relative)
      const Batch one(&s, 1);
      compare_vco_gradients(one, inst.params, inst.ref_params, reward, inst.hp);
    } catch (const std::exception& e) {
      detail = std::string("gradient-ratio identity: ") + e.what();
      return false;
    }
  }
  std::ostringstream os;
  os << "100 samples, worst shared-Z residual=" << worst_shared << ", |c|>0.1 on " << material
     << " samples";
  detail = os.str();
  return material > 0;
}

// ---- criterion 4: partition exactness ----------------------------------------

bool criterion_4(std::string& detail) {
  const GroundTruthReward reward{1.0};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = verify::make_random_instance(4096, i);
    const auto& s = inst.batch.front();

    // independent brute force: plain enumeration, no log-space tricks
    const auto probs = full_distribution(inst.ref_params, s.image, s.prompt);
    double oracle = 0.0;
    for (size_t y = 0; y < probs.size(); ++y)
      oracle +=
          probs[y] * std::exp(reward(s.image, s.prompt, static_cast<ResponseId>(y)) /
                              inst.hp.beta);
    const double z = partition_z(inst.ref_params, reward, s.image, s.prompt, inst.hp);
    worst = std::max(worst, rel_err(z, oracle));
    if (worst > 1e-12) {
      detail = "enumeration mismatch at instance " + std::to_string(i);
      return false;
    }

    const double c0 = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);
    auto perturbed = inst.params;
    SplitMix64 rng(stream_seed(4097, static_cast<std::uint64_t>(i)));
    for (double& v : perturbed.W.data) v += rng.next_range(-10.0, 10.0);
    // the offset never reads the policy parameters; same ref => same bits
    const double c1 = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);
    (void)perturbed;
    if (std::memcmp(&c0, &c1, sizeof(double)) != 0) {
      detail = "offset c changed bits at instance " + std::to_string(i);
      return false;
    }
  }
  std::ostringstream os;
  os << "100 instances, worst rel err=" << worst;
  detail = os.str();
  return true;
}

// ---- criterion 5: arm-swap symmetry ------------------------------------------

bool criterion_5(std::string& detail) {
  for (int i = 0; i < 1000; ++i) {
    const auto inst = verify::make_random_instance(5150, i);
    if (!verify::symmetry_check(inst.batch.front(), inst.params, inst.ref_params, inst.hp)) {
      detail = "asymmetry at sample " + std::to_string(i);
      return false;
    }
  }
  detail = "1000 samples invariant within 1e-12";
  return true;
}

// ---- criterion 6: toy efficacy ------------------------------------------------

bool criterion_6(std::string& detail) {
  parallel::set_thread_cap(1);
  const auto start = std::chrono::steady_clock::now();

  WorldConfig world;  // d_img=12, q=3, n_prompts=4, n_images=512, similar, seed 7
  const Dataset ds = build_preference_dataset(world);

  TrainConfig config;
  config.objective = Objective::symmpo;
  config.hyper.lr = 0.1;  // toy learning rate
  config.hyper.epochs = 2;
  config.hyper.batch_size = 64;
  config.shuffle_seed = 0;

  const auto heldout = ds.split(true);
  const PolicyParams zeros = PolicyParams::zeros(world);
  const double baseline = evaluate_hallucination_rate(zeros, heldout).response_rate;

  const TrainResult result = train(ds, config);
  const double trained = evaluate_hallucination_rate(result.params, heldout).response_rate;
  const double accuracy =
      evaluate_contrastive_accuracy(result.params, zeros, heldout, config.hyper);
  const double elapsed = seconds_since(start);
  parallel::set_thread_cap(0);

  std::ostringstream os;
  os << "baseline=" << baseline << " trained=" << trained << " (need <= " << 0.5 * baseline
     << ") accuracy=" << accuracy << " elapsed=" << elapsed << "s";
  detail = os.str();
  return !result.aborted && trained <= 0.5 * baseline && accuracy >= 0.8 && elapsed < 300.0;
}

// ---- criterion 7: reduction equivalence (CLI level) ---------------------------

bool criterion_7(std::string& detail) {
  const fs::path data = g_work / "c7-data";
  if (run_cli("gen-data --seed 7 --out \"" + data.string() + "\"") != 0) {
    detail = "gen-data failed";
    return false;
  }
  const fs::path dpo = g_work / "c7-dpo";
  const fs::path red = g_work / "c7-reduced";
  const std::string common =
      " --data \"" + data.string() + "\" --epochs 2 --batch-size 64 --lr 0.1";
  if (run_cli("train" + common + " --out \"" + dpo.string() + "\" --objective dpo") != 0 ||
      run_cli("train" + common + " --out \"" + red.string() +
              "\" --objective symmpo --lambda 0 --gamma 0 --eta 0") != 0) {
    detail = "training run failed";
    return false;
  }
  const bool metrics = same_bytes(dpo / "metrics.jsonl", red / "metrics.jsonl");
  const bool params = same_bytes(dpo / "checkpoint.symp", red / "checkpoint.symp");
  detail = std::string("metrics ") + (metrics ? "identical" : "DIFFER") + ", checkpoints " +
           (params ? "identical" : "DIFFER");
  return metrics && params;
}

// ---- criterion 8: byte determinism (CLI level) --------------------------------

bool criterion_8(std::string& detail) {
  const fs::path a = g_work / "c8-data-a";
  const fs::path b = g_work / "c8-data-b";
  if (run_cli("gen-data --seed 11 --n-images 128 --out \"" + a.string() + "\"") != 0 ||
      run_cli("gen-data --seed 11 --n-images 128 --out \"" + b.string() + "\"") != 0) {
    detail = "gen-data failed";
    return false;
  }
  if (!same_bytes(a / "data.jsonl", b / "data.jsonl") ||
      !same_bytes(a / "meta.json", b / "meta.json")) {
    detail = "gen-data not byte-deterministic";
    return false;
  }

  const std::string common =
      " --data \"" + a.string() + "\" --epochs 1 --batch-size 64 --lr 0.1";
  const fs::path t1 = g_work / "c8-t1";
  const fs::path t4 = g_work / "c8-t4";
  if (run_cli("train" + common + " --out \"" + t1.string() + "\"", "SYMPO_THREADS=1") != 0 ||
      run_cli("train" + common + " --out \"" + t4.string() + "\"", "SYMPO_THREADS=4") != 0) {
    detail = "train failed";
    return false;
  }
  for (const char* f : {"metrics.jsonl", "checkpoint.symp", "summary.json"})
    if (!same_bytes(t1 / f, t4 / f)) {
      detail = std::string("train artifact differs across thread counts: ") + f;
      return false;
    }

  const fs::path g1 = g_work / "c8-grad1.jsonl";
  const fs::path g2 = g_work / "c8-grad2.jsonl";
  if (run_cli("gradcheck --instances 5 --out \"" + g1.string() + "\"") != 0 ||
      run_cli("gradcheck --instances 5 --out \"" + g2.string() + "\"") != 0 ||
      !same_bytes(g1, g2)) {
    detail = "gradcheck stream not byte-deterministic";
    return false;
  }

  const fs::path p1 = g_work / "c8-part1.jsonl";
  const fs::path p2 = g_work / "c8-part2.jsonl";
  if (run_cli("partition-report --data \"" + a.string() + "\" --out \"" + p1.string() + "\"") !=
          0 ||
      run_cli("partition-report --data \"" + a.string() + "\" --out \"" + p2.string() + "\"") !=
          0 ||
      !same_bytes(p1, p2)) {
    detail = "partition-report stream not byte-deterministic";
    return false;
  }

  const fs::path s1 = g_work / "c8-sweep1";
  const fs::path s2 = g_work / "c8-sweep2";
  const std::string sweep_flags = " --epochs 1 --batch-size 64 --lr-grid 0.05,0.1";
  if (run_cli("sweep --data \"" + a.string() + "\" --out \"" + s1.string() + "\"" +
              sweep_flags) != 0 ||
      run_cli("sweep --data \"" + a.string() + "\" --out \"" + s2.string() + "\"" +
              sweep_flags) != 0 ||
      !same_bytes(s1 / "sweep.csv", s2 / "sweep.csv")) {
    detail = "sweep not byte-deterministic";
    return false;
  }

  detail = "gen-data, train (threads 1 vs 4), gradcheck, partition-report, sweep all byte-identical";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-sympo-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  g_work = fs::temp_directory_path() / "sympo-acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"1 initialization value 4*ln2 within 1e-12", criterion_1},
      {"2 gradient battery 7x100 at 1e-5", criterion_2},
      {"3 cancellation theorem (shared-Z, vco gap, ratio identity)", criterion_3},
      {"4 partition exactness vs brute force; c bit-stable", criterion_4},
      {"5 arm-swap symmetry on 1000 samples", criterion_5},
      {"6 toy efficacy: halved hallucination rate, accuracy >= 0.8", criterion_6},
      {"7 reduction equivalence: symmpo(0,0,0) == dpo streams", criterion_7},
      {"8 byte determinism across runs and thread counts", criterion_8},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %s%s%s\n", ok ? "PASS" : "FAIL", c.name,
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  fs::remove_all(g_work);
  return failures == 0 ? 0 : 1;
}
