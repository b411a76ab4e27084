#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sympo/numerics.hpp"
#include "sympo/partition.hpp"
#include "sympo/policy.hpp"
#include "sympo/rng.hpp"
#include "sympo/verify.hpp"

using namespace sympo;

namespace {

// brute-force oracle: plain sum over the catalog, no log-space tricks
double brute_force_z(const PolicyParams& ref, const GroundTruthReward& reward,
                     const ImageFeat& image, const Prompt& prompt, const HyperParams& hp) {
  const auto probs = full_distribution(ref, image, prompt);
  double z = 0.0;
  for (size_t y = 0; y < probs.size(); ++y)
    z += probs[y] * std::exp(reward(image, prompt, static_cast<ResponseId>(y)) / hp.beta);
  return z;
}

}  // namespace

TEST_CASE("ground-truth reward: bounded, preferred response is the unique maximizer") {
  const auto inst = verify::make_random_instance(640, 0);
  const auto& s = inst.batch.front();
  const int q = static_cast<int>(s.prompt.queried_positions.size());
  const GroundTruthReward reward{2.5};

  ResponseId best = 0;
  for (ResponseId y = 0; y < inst.params.catalog; ++y) {
    const double r = reward(s.image, s.prompt, y);
    CHECK(std::abs(r) <= 2.5 * q + 1e-12);
    if (r > reward(s.image, s.prompt, best)) best = y;
  }
  CHECK(reward(s.image, s.prompt, best) == 2.5 * q);
  int maximizers = 0;
  for (ResponseId y = 0; y < inst.params.catalog; ++y)
    if (reward(s.image, s.prompt, y) == 2.5 * q) ++maximizers;
  CHECK(maximizers == 1);
}

TEST_CASE("partition_z: unit at zero reward, constant rewards factor out") {
  const auto inst = verify::make_random_instance(641, 1);
  const auto& s = inst.batch.front();

  CHECK(partition_z(inst.ref_params, GroundTruthReward{0.0}, s.image, s.prompt, inst.hp) == 1.0);

  const double kappa = 0.73;
  const double log_z = log_partition_z_of(
      inst.ref_params, [&](ResponseId) { return kappa; }, s.image, s.prompt, inst.hp);
  CHECK(std::abs(log_z - kappa / inst.hp.beta) <= 1e-12);
}

TEST_CASE("partition_z matches brute-force enumeration") {
  for (int i = 0; i < 100; ++i) {
    const auto inst = verify::make_random_instance(642, i);
    const auto& s = inst.batch.front();
    const GroundTruthReward reward{1.0};
    const double z = partition_z(inst.ref_params, reward, s.image, s.prompt, inst.hp);
    const double oracle = brute_force_z(inst.ref_params, reward, s.image, s.prompt, inst.hp);
    CHECK(z > 0.0);
    CHECK(rel_err(z, oracle) <= 1e-12);
  }
}

TEST_CASE("offset_c: zero on identical images or zero reward; matches two partition calls") {
  const auto inst = verify::make_random_instance(643, 2);
  const auto& s = inst.batch.front();
  const GroundTruthReward reward{1.0};

  CHECK(offset_c(inst.ref_params, reward, s.image, s.image, s.prompt, inst.hp) == 0.0);
  CHECK(offset_c(inst.ref_params, GroundTruthReward{0.0}, s.image, s.image_c, s.prompt,
                 inst.hp) == 0.0);

  const double c = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);
  const double direct =
      inst.hp.beta *
      (std::log(partition_z(inst.ref_params, reward, s.image, s.prompt, inst.hp)) -
       std::log(partition_z(inst.ref_params, reward, s.image_c, s.prompt, inst.hp)));
  CHECK(std::abs(c - direct) <= 1e-10 * std::max(1.0, std::abs(c)));
}

TEST_CASE("offset_c is bit-identical across policy parameter perturbations") {
  const auto inst = verify::make_random_instance(644, 3);
  const auto& s = inst.batch.front();
  const GroundTruthReward reward{1.0};
  const double before = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);

  auto perturbed = inst;
  SplitMix64 rng(9);
  for (double& v : perturbed.params.W.data) v += rng.next_range(-5.0, 5.0);
  // the policy parameters do not even appear in the computation
  const double after =
      offset_c(perturbed.ref_params, reward, s.image, s.image_c, s.prompt, perturbed.hp);
  CHECK(before == after);
}

TEST_CASE("loss_vco_star: reduces to loss_vco at zero reward; ln 2 at u=0, c=0") {
  const auto inst = verify::make_random_instance(645, 4);
  const Batch b(inst.batch.data(), inst.batch.size());

  const auto star0 = loss_vco_star(b, inst.params, inst.ref_params, GroundTruthReward{0.0},
                                   inst.hp);
  const auto plain = loss_vco(b, inst.params, inst.ref_params, inst.hp);
  CHECK(star0.value.total == plain.value.total);
  CHECK(star0.grad.data == plain.grad.data);

  const auto at_ref = loss_vco_star(b, inst.ref_params, inst.ref_params, GroundTruthReward{0.0},
                                    inst.hp);
  CHECK(std::abs(at_ref.value.total - std::log(2.0)) <= 1e-15);
}

TEST_CASE("loss_vco_star at params==ref equals mean of -log sigma(c)") {
  const auto inst = verify::make_random_instance(646, 5);
  const GroundTruthReward reward{1.0};
  const auto& s = inst.batch.front();
  const Batch one(&s, 1);
  const double c = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);
  const auto r = loss_vco_star(one, inst.ref_params, inst.ref_params, reward, inst.hp);
  CHECK(std::abs(r.value.total - neg_log_sigmoid(c)) <= 1e-12);
}

TEST_CASE("loss_vco_star gradient: matches finite differences and the ratio identity") {
  for (int i = 0; i < 10; ++i) {
    const auto inst = verify::make_random_instance(647, i);
    const GroundTruthReward reward{1.0};
    const Batch b(inst.batch.data(), inst.batch.size());

    const auto analytic = loss_vco_star(b, inst.params, inst.ref_params, reward, inst.hp);
    const auto numeric = verify::finite_diff_grad(
        [&](const PolicyParams& p) {
          return loss_vco_star(b, p, inst.ref_params, reward, inst.hp).value.total;
        },
        inst.params, 1e-5);
    for (size_t k = 0; k < numeric.size(); ++k)
      CHECK(rel_err(analytic.grad.data[k], numeric.data[k]) <= 1e-5);

    // gradient = -sigma(-(u+c)) du/dtheta assembled from independent pieces
    const auto& s = inst.batch.front();
    const Batch one(&s, 1);
    const double u =
        inst.hp.beta * (log_ratio(inst.params, inst.ref_params, s.image, s.prompt, s.y_w) -
                        log_ratio(inst.params, inst.ref_params, s.image_c, s.prompt, s.y_w));
    const double c = offset_c(inst.ref_params, reward, s.image, s.image_c, s.prompt, inst.hp);
    GradMatrix du = log_prob_grad(inst.params, s.image, s.prompt, s.y_w);
    du.add_scaled(-1.0, log_prob_grad(inst.params, s.image_c, s.prompt, s.y_w));
    for (double& v : du.data) v *= inst.hp.beta;
    const auto single = loss_vco_star(one, inst.params, inst.ref_params, reward, inst.hp);
    for (size_t k = 0; k < du.size(); ++k) {
      const double expected = -sigmoid(-(u + c)) * du.data[k];
      CHECK(std::abs(single.grad.data[k] - expected) <= 1e-10);
    }
  }
}

TEST_CASE("gradient_coefficients: exact values and saturation") {
  auto [star0, plain0] = gradient_coefficients(0.0, 0.0);
  CHECK(star0 == 0.5);
  CHECK(plain0 == 0.5);

  auto [star, plain] = gradient_coefficients(0.0, 0.5);
  CHECK(std::abs(star - 1.0 / (1.0 + std::exp(0.5))) <= 1e-15);
  CHECK(std::abs(star - 0.377541) <= 1e-6);
  CHECK(plain == 0.5);

  auto [sat_star, sat_plain] = gradient_coefficients(0.3, 30.0);
  CHECK(sat_star <= 1e-12);
  CHECK(sat_plain == sigmoid(-0.3));
}

TEST_CASE("compare_vco_gradients: zero-reward batch has c=0 and equal coefficients") {
  const auto inst = verify::make_random_instance(648, 6);
  const Batch b(inst.batch.data(), inst.batch.size());
  const auto reports =
      compare_vco_gradients(b, inst.params, inst.ref_params, GroundTruthReward{0.0}, inst.hp);
  REQUIRE(reports.size() == inst.batch.size());
  for (const auto& r : reports) {
    CHECK(r.c == 0.0);
    CHECK(r.coef_star == r.coef_plain);
    CHECK(r.loss_vco == r.loss_vco_star);
    CHECK(r.z_w == 1.0);
    CHECK(r.z_l == 1.0);
  }
}

TEST_CASE("compare_vco_gradients: report invariants and loss gap on random batches") {
  int nonzero_c = 0;
  for (int i = 0; i < 20; ++i) {
    const auto inst = verify::make_random_instance(649, i);
    const GroundTruthReward reward{1.0};
    const Batch b(inst.batch.data(), inst.batch.size());
    const auto reports = compare_vco_gradients(b, inst.params, inst.ref_params, reward, inst.hp);
    for (const auto& r : reports) {
      CHECK(r.z_w > 0.0);
      CHECK(r.z_l > 0.0);
      CHECK(std::abs(r.c - inst.hp.beta * (std::log(r.z_w) - std::log(r.z_l))) <=
            1e-9 * std::max(1.0, std::abs(r.c)));
      CHECK(r.coef_star == sigmoid(-(r.u + r.c)));
      CHECK(r.coef_plain == sigmoid(-r.u));
      if (std::abs(r.c) > 1e-6) {
        CHECK(std::abs(r.loss_vco - r.loss_vco_star) > 0.0);
        ++nonzero_c;
      }
    }
  }
  CHECK(nonzero_c > 0);  // the property must not hold vacuously
}
