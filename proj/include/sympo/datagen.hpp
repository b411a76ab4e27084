#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sympo/domain.hpp"
#include "sympo/rng.hpp"

// Synthetic hallucination grid-world: binary attribute images, prompts that
// query q attributes each, preferred/hallucinated response pairs, and five
// contrastive-image constructions (nearest neighbor, black, cropped, noisy,
// lossy reconstruction).
//
// All randomness flows from WorldConfig.seed through documented SplitMix64
// substreams: stream 0 draws the images, stream 1 the prompt positions, and
// stream 2+k drives sample k (= image_index * n_prompts + prompt_index),
// which draws, in order: the held-out split coin, the hallucination flips,
// then any contrastive-image randomness. Datasets are therefore
// byte-reproducible and any sample can be regenerated in isolation.

namespace sympo {

struct World {
  WorldConfig config;
  std::vector<ImageFeat> images;
  std::vector<Prompt> prompts;
};

// n_images i.i.d. Bernoulli(0.5) attribute vectors; prompt positions are
// disjoint slices of a seeded permutation when n_prompts*q <= d_img, random
// q-subsets otherwise.
World generate_world(const WorldConfig& config);

// Bit t of the id = round(image[queried_positions[t]]).
ResponseId preferred_response(const ImageFeat& image, const Prompt& prompt);

// Preferred response with exactly flip_count distinct assertion bits
// flipped (uniformly chosen); never equals the preferred response.
ResponseId hallucinated_response(const ImageFeat& image, const Prompt& prompt, int flip_count,
                                 SplitMix64& rng);

// Cosine similarity; 0 when either vector has zero norm. Always computed
// with the scalar kernels so dataset bytes do not depend on SIMD dispatch.
double cosine_similarity(const ImageFeat& a, const ImageFeat& b);

// Index of the most cosine-similar other image; ties break to the lowest
// index. Requires at least two images.
int nearest_neighbor(const std::vector<ImageFeat>& images, int idx);

// All other indices ordered by (cosine desc, index asc).
std::vector<int> neighbor_ranking(const std::vector<ImageFeat>& images, int idx);

// Non-similar contrastive constructions (similar mode is resolved against
// the image pool by the dataset builder):
//   black:     zero vector
//   cropped:   a random contiguous block of floor(d_img/2) positions kept,
//              the other ceil(d_img/2) zeroed
//   noisy:     attributes + N(0, sigma^2), clamped to [0,1]
//   synthetic: attributes rounded, then max(1, d_img/4) random positions
//              zeroed (lossy caption-style reconstruction)
ImageFeat contrastive_image(const ImageFeat& image, ContrastiveMode mode,
                            const WorldConfig& config, SplitMix64& rng);

struct Dataset {
  WorldConfig config;
  std::vector<SymmetricSample> samples;
  std::vector<std::uint8_t> heldout;  // parallel to samples
  double heldout_frac = 0.1;
  int dropped = 0;                 // samples abandoned after 8 attempts
  int neighbor_interventions = 0;  // similar-mode picks past the top neighbor

  std::vector<SymmetricSample> split(bool heldout_split) const;
};

// One sample per (image, prompt), ascending by image then prompt. Samples
// whose contrastive preferred response collides with y_w are retried up to
// 8 times (next-nearest neighbor in similar mode, re-rolled rng otherwise)
// and then dropped. Throws generation_error if more than half the grid is
// dropped.
Dataset build_preference_dataset(const WorldConfig& config, double heldout_frac = 0.1);

nlohmann::ordered_json world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const nlohmann::json& j);

// dir/data.jsonl (one sample per line) + dir/meta.json (config hash, full
// world config, drop counts, held-out indices).
void save_dataset(const std::string& dir, const Dataset& dataset);
Dataset load_dataset(const std::string& dir);

// Stable digest of the canonical world config + generation knobs.
std::string dataset_config_hash(const Dataset& dataset);

}  // namespace sympo
