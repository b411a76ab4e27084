#pragma once

#include <string>
#include <vector>

#include "sympo/domain.hpp"
#include "sympo/matrix.hpp"

// Log-linear softmax policy over the finite response catalog:
//   logits = W^T [image || one_hot(prompt) || 1],  pi(y) = softmax(logits)[y].
// Everything is exact and closed-form, including parameter gradients; a
// frozen copy of the parameters serves as the reference model.

namespace sympo {

struct PolicyParams {
  Matrix W;  // feature_dim x catalog_size
  int d_img = 0;
  int n_prompts = 0;
  int catalog = 0;

  int feature_dim() const { return d_img + n_prompts + 1; }
  int num_assertions() const;  // q = log2(catalog)

  static PolicyParams zeros(const WorldConfig& world);
};

struct FeatureVector {
  std::vector<double> values;  // length feature_dim
};

// [image || one_hot(prompt) || 1]; throws config_error on dimension mismatch.
FeatureVector context_features(const ImageFeat& image, const Prompt& prompt,
                               const WorldConfig& world);

// Cached logits + normalizer for one conditioning under one parameter set.
struct SoftmaxState {
  FeatureVector features;
  std::vector<double> logits;
  double lse = 0.0;

  double log_prob(ResponseId y) const { return logits[static_cast<size_t>(y)] - lse; }
  std::vector<double> probs() const;
};

SoftmaxState eval_softmax(const PolicyParams& params, const ImageFeat& image,
                          const Prompt& prompt);

// log pi(y | image, prompt); always <= 0. Throws numeric_error if the
// parameters produce non-finite logits.
double log_prob(const PolicyParams& params, const ImageFeat& image, const Prompt& prompt,
                ResponseId y);

// d log pi(y)/dW; column j equals features * (1[j==y] - pi(j)).
GradMatrix log_prob_grad(const PolicyParams& params, const ImageFeat& image,
                         const Prompt& prompt, ResponseId y);

// Exact catalog distribution; entries sum to 1.
std::vector<double> full_distribution(const PolicyParams& params, const ImageFeat& image,
                                      const Prompt& prompt);

// Lowest index among maximizing logits.
ResponseId argmax_response(const PolicyParams& params, const ImageFeat& image,
                           const Prompt& prompt);

// Checkpoint file: magic "SYMP", version byte 1, then u32 LE {d, K,
// n_prompts, d_img}, then d*K float64 LE in row-major order.
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace sympo
