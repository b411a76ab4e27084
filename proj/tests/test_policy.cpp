#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sympo/errors.hpp"
#include "sympo/numerics.hpp"
#include "sympo/policy.hpp"
#include "sympo/rng.hpp"
#include "sympo/verify.hpp"

using namespace sympo;

namespace {

WorldConfig tiny_world(int d_img, int n_prompts, int q) {
  WorldConfig w;
  w.d_img = d_img;
  w.n_prompts = n_prompts;
  w.q = q;
  w.n_images = 2;
  w.flip_count = 1;
  return w;
}

PolicyParams random_params(const WorldConfig& w, std::uint64_t seed, double bound = 2.0) {
  PolicyParams p = PolicyParams::zeros(w);
  SplitMix64 rng(seed);
  for (double& v : p.W.data) v = rng.next_range(-bound, bound);
  return p;
}

Prompt prompt_over(int id, std::vector<int> positions) {
  Prompt p;
  p.id = id;
  p.queried_positions = std::move(positions);
  return p;
}

}  // namespace

TEST_CASE("context_features concatenates image, one-hot prompt, bias") {
  const WorldConfig w = tiny_world(2, 2, 1);
  const auto f0 = context_features({0.0, 0.0}, prompt_over(0, {0}), w);
  CHECK(f0.values == std::vector<double>{0, 0, 1, 0, 1});
  const auto f1 = context_features({1.0, 1.0}, prompt_over(1, {0}), w);
  CHECK(f1.values == std::vector<double>{1, 1, 0, 1, 1});

  // distinct prompts differ exactly in the one-hot block
  const auto a = context_features({1.0, 0.0}, prompt_over(0, {0}), w);
  const auto b = context_features({1.0, 0.0}, prompt_over(1, {0}), w);
  int diffs = 0;
  for (size_t i = 0; i < a.values.size(); ++i)
    if (a.values[i] != b.values[i]) ++diffs;
  CHECK(diffs == 2);
  CHECK(a.values[0] == b.values[0]);
  CHECK(a.values.back() == b.values.back());

  CHECK_THROWS_AS(context_features({0.0}, prompt_over(0, {0}), w), config_error);
  CHECK_THROWS_AS(context_features({0.0, 0.0}, prompt_over(7, {0}), w), config_error);
}

TEST_CASE("log_prob: uniform at W=0, single-outcome catalog, hand-built softmax") {
  const WorldConfig w = tiny_world(2, 2, 2);
  const PolicyParams zeros = PolicyParams::zeros(w);
  const Prompt p = prompt_over(0, {0, 1});
  for (ResponseId y = 0; y < 4; ++y)
    CHECK(std::abs(log_prob(zeros, {1.0, 0.0}, p, y) + std::log(4.0)) <= 1e-15);

  // K = 1 catalog: the only response has probability one
  PolicyParams single;
  single.d_img = 1;
  single.n_prompts = 1;
  single.catalog = 1;
  single.W = Matrix(3, 1);
  single.W(0, 0) = 0.7;
  CHECK(log_prob(single, {1.0}, prompt_over(0, {0}), 0) == 0.0);

  // logits (0, ln 3) -> softmax (1/4, 3/4)
  PolicyParams two;
  two.d_img = 1;
  two.n_prompts = 1;
  two.catalog = 2;
  two.W = Matrix(3, 2);
  two.W(2, 1) = std::log(3.0);  // bias row
  const double lp1 = log_prob(two, {0.0}, prompt_over(0, {0}), 1);
  CHECK(std::abs(lp1 - std::log(0.75)) <= 1e-15);
  CHECK(lp1 <= 0.0);
}

TEST_CASE("log_prob is invariant under a uniform logit shift") {
  const WorldConfig w = tiny_world(3, 2, 2);
  const Prompt p = prompt_over(1, {0, 2});
  const ImageFeat img{1.0, 0.0, 1.0};
  const PolicyParams params = random_params(w, 99);
  const FeatureVector f = context_features(img, p, w);

  PolicyParams shifted = params;
  const double s = 0.37;
  for (size_t i = 0; i < shifted.W.rows; ++i)
    for (size_t j = 0; j < shifted.W.cols; ++j) shifted.W(i, j) += f.values[i] * s;

  for (ResponseId y = 0; y < 4; ++y)
    CHECK(std::abs(log_prob(params, img, p, y) - log_prob(shifted, img, p, y)) <= 1e-12);
}

TEST_CASE("full_distribution normalizes; argmax matches the max logit") {
  const WorldConfig w = tiny_world(4, 3, 3);
  const Prompt p = prompt_over(2, {0, 1, 3});
  SplitMix64 rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const PolicyParams params = random_params(w, rng.next());
    ImageFeat img(4);
    for (double& v : img) v = rng.next_bool(0.5) ? 1.0 : 0.0;

    const auto probs = full_distribution(params, img, p);
    double total = 0.0;
    for (double q : probs) {
      CHECK(q >= 0.0);
      total += q;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);

    const SoftmaxState st = eval_softmax(params, img, p);
    const ResponseId am = argmax_response(params, img, p);
    for (size_t j = 0; j < st.logits.size(); ++j)
      CHECK(st.logits[static_cast<size_t>(am)] >= st.logits[j]);
  }
}

TEST_CASE("argmax tie-break picks the lowest index and ignores logit shifts") {
  const WorldConfig w = tiny_world(2, 1, 2);
  const Prompt p = prompt_over(0, {0, 1});
  const PolicyParams zeros = PolicyParams::zeros(w);
  CHECK(argmax_response(zeros, {1.0, 1.0}, p) == 0);

  PolicyParams two;
  two.d_img = 1;
  two.n_prompts = 1;
  two.catalog = 2;
  two.W = Matrix(3, 2);
  two.W(2, 1) = 5.0;
  CHECK(argmax_response(two, {0.0}, prompt_over(0, {0})) == 1);
  two.W(2, 0) += 2.5;  // uniform shift over responses
  two.W(2, 1) += 2.5;
  CHECK(argmax_response(two, {0.0}, prompt_over(0, {0})) == 1);
}

TEST_CASE("log_prob_grad: uniform case, column-sum identity, finite differences") {
  const WorldConfig w = tiny_world(2, 2, 1);
  const Prompt p = prompt_over(0, {1});
  const ImageFeat img{1.0, 0.0};
  const PolicyParams zeros = PolicyParams::zeros(w);
  const FeatureVector f = context_features(img, p, w);

  const GradMatrix g = log_prob_grad(zeros, img, p, 0);
  for (size_t i = 0; i < g.rows; ++i) {
    CHECK(g(i, 0) == doctest::Approx(f.values[i] * 0.5).epsilon(1e-15));
    CHECK(g(i, 1) == doctest::Approx(-f.values[i] * 0.5).epsilon(1e-15));
  }

  const WorldConfig w2 = tiny_world(5, 3, 3);
  const Prompt p2 = prompt_over(1, {0, 2, 4});
  SplitMix64 rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    const PolicyParams params = random_params(w2, rng.next());
    ImageFeat im(5);
    for (double& v : im) v = rng.next_bool(0.5) ? 1.0 : 0.0;
    const ResponseId y = static_cast<ResponseId>(rng.next_below(8));

    const GradMatrix analytic = log_prob_grad(params, im, p2, y);
    // columns sum to the zero vector (softmax identity)
    for (size_t i = 0; i < analytic.rows; ++i) {
      double row_sum = 0.0;
      for (size_t j = 0; j < analytic.cols; ++j) row_sum += analytic(i, j);
      CHECK(std::abs(row_sum) <= 1e-12);
    }

    const GradMatrix numeric = verify::finite_diff_grad(
        [&](const PolicyParams& q) { return log_prob(q, im, p2, y); }, params, 1e-5);
    for (size_t i = 0; i < analytic.size(); ++i)
      CHECK(rel_err(analytic.data[i], numeric.data[i]) <= 1e-6);
  }
}

TEST_CASE("checkpoint round-trip is bit-identical; malformed files are rejected") {
  const WorldConfig w = tiny_world(3, 2, 2);
  const PolicyParams params = random_params(w, 4242);
  const auto path =
      (std::filesystem::temp_directory_path() / "sympo_policy_test.symp").string();

  save_checkpoint(path, params);
  const PolicyParams back = load_checkpoint(path);
  CHECK(back.d_img == params.d_img);
  CHECK(back.n_prompts == params.n_prompts);
  CHECK(back.catalog == params.catalog);
  CHECK(back.W.data == params.W.data);

  {
    std::FILE* fp = std::fopen(path.c_str(), "r+b");
    REQUIRE(fp);
    std::fputc('X', fp);  // corrupt the magic
    std::fclose(fp);
  }
  CHECK_THROWS_AS(load_checkpoint(path), config_error);

  save_checkpoint(path, params);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_checkpoint(path), config_error);
  std::filesystem::remove(path);
}

TEST_CASE("non-finite parameters raise a numeric error") {
  const WorldConfig w = tiny_world(2, 1, 1);
  PolicyParams p = PolicyParams::zeros(w);
  p.W(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(log_prob(p, {1.0, 0.0}, prompt_over(0, {0}), 0), numeric_error);
}
