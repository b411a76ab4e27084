#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Core value types shared by every module. All of them are immutable in
// practice (built once, then read), so they are safe to share across threads.

namespace sympo {

enum class ContrastiveMode { similar, black, cropped, noisy, synthetic };

const char* to_string(ContrastiveMode mode);
ContrastiveMode contrastive_mode_from_string(const std::string& name);

// World geometry plus generation knobs. Every response catalog has
// K = 2^q entries; a response id is read as a q-bit assertion vector over
// the prompt's queried attribute positions.
struct WorldConfig {
  int d_img = 12;
  int n_prompts = 4;
  int q = 3;
  int n_images = 512;
  int flip_count = 1;
  ContrastiveMode contrastive_mode = ContrastiveMode::similar;
  double noise_sigma = 0.8;
  std::uint64_t seed = 7;

  int catalog_size() const { return 1 << q; }
  // [image attributes || one-hot prompt || bias]
  int feature_dim() const { return d_img + n_prompts + 1; }

  void validate() const;  // throws config_error on bad geometry
};

// Attribute vector in [0,1]^d_img; clean images are binary.
using ImageFeat = std::vector<double>;

struct Prompt {
  int id = 0;
  std::vector<int> queried_positions;  // strictly increasing, size q
};

// Index into the prompt's enumerated response catalog; bit t asserts the
// value of queried_positions[t].
using ResponseId = int;

// One training record: the shared prompt, the original and contrastive
// images, and the three responses (preferred, hallucinated, and the
// contrastive image's preferred response).
struct SymmetricSample {
  Prompt prompt;
  ImageFeat image;
  ImageFeat image_c;
  ResponseId y_w = 0;
  ResponseId y_l = 0;
  ResponseId y_w_c = 0;
  int neighbor_id = -1;  // source image index in similar mode, -1 otherwise
};

// Scalar knobs of the loss family plus optimizer basics.
struct HyperParams {
  double beta = 0.1;
  double delta = 0.0;
  double lambda = 0.5;
  double gamma = 1e-4;
  double eta = 1.0;
  double lr = 0.1;
  int epochs = 2;
  int batch_size = 64;
  // The printed margin definition omits beta from the log-ratio gap; this
  // flag records that choice and allows the scaled variant.
  bool margin_uses_beta = false;

  void validate() const;  // throws config_error
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Pure: lists every violated invariant, never throws.
ValidationReport validate_sample(const SymmetricSample& sample, const WorldConfig& world);

// One sample per line, LF-terminated, UTF-8:
// {"prompt":..,"queried":[..],"image":[..],"image_c":[..],"y_w":..,"y_l":..,
//  "y_w_c":..,"neighbor_id":..}
// Doubles are written in shortest round-trip form, so decode/encode is
// byte-identical.
std::string encode_sample(const SymmetricSample& sample);
SymmetricSample decode_sample(const std::string& line);

}  // namespace sympo
