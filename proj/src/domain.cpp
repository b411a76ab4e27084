#include "sympo/domain.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "sympo/errors.hpp"

namespace sympo {

const char* to_string(ContrastiveMode mode) {
  switch (mode) {
    case ContrastiveMode::similar: return "similar";
    case ContrastiveMode::black: return "black";
    case ContrastiveMode::cropped: return "cropped";
    case ContrastiveMode::noisy: return "noisy";
    case ContrastiveMode::synthetic: return "synthetic";
  }
  return "similar";
}

ContrastiveMode contrastive_mode_from_string(const std::string& name) {
  if (name == "similar") return ContrastiveMode::similar;
  if (name == "black") return ContrastiveMode::black;
  if (name == "cropped") return ContrastiveMode::cropped;
  if (name == "noisy") return ContrastiveMode::noisy;
  if (name == "synthetic") return ContrastiveMode::synthetic;
  throw config_error("unknown contrastive mode: " + name);
}

void WorldConfig::validate() const {
  if (d_img < 1) throw config_error("d_img must be >= 1");
  if (n_prompts < 1) throw config_error("n_prompts must be >= 1");
  if (q < 1 || q > d_img) throw config_error("q must satisfy 1 <= q <= d_img");
  if (catalog_size() > 64) throw config_error("2^q must be <= 64");
  if (n_images < 2) throw config_error("n_images must be >= 2");
  if (flip_count < 1 || flip_count > q)
    throw config_error("flip_count must be in [1, q]");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
    throw config_error("noise_sigma must be finite and >= 0");
}

void HyperParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw config_error("beta must be positive and finite");
  for (double v : {delta, lambda, gamma, eta, lr})
    if (!std::isfinite(v)) throw config_error("hyperparameters must be finite");
  if (lambda < 0.0 || gamma < 0.0 || eta < 0.0)
    throw config_error("lambda, gamma, eta must be nonnegative");
  if (lr < 0.0) throw config_error("lr must be nonnegative");
  if (epochs < 0) throw config_error("epochs must be >= 0");
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
}

namespace {

void check_image(const ImageFeat& img, const WorldConfig& world, const char* name,
                 std::vector<std::string>& out) {
  if (static_cast<int>(img.size()) != world.d_img) {
    out.push_back(std::string(name) + " length mismatch");
    return;
  }
  for (double v : img) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      out.push_back(std::string(name) + " entry outside [0,1]");
      break;
    }
  }
}

}  // namespace

ValidationReport validate_sample(const SymmetricSample& sample, const WorldConfig& world) {
  ValidationReport report;
  auto& v = report.violations;

  check_image(sample.image, world, "image", v);
  check_image(sample.image_c, world, "image_c", v);

  const Prompt& p = sample.prompt;
  if (p.id < 0 || p.id >= world.n_prompts) v.push_back("prompt id out of range");
  if (static_cast<int>(p.queried_positions.size()) != world.q) {
    v.push_back("queried positions count mismatch");
  } else {
    int prev = -1;
    for (int pos : p.queried_positions) {
      if (pos < 0 || pos >= world.d_img) {
        v.push_back("queried position out of range");
        break;
      }
      if (pos <= prev) {
        v.push_back("queried positions not strictly increasing");
        break;
      }
      prev = pos;
    }
  }

  const int K = world.catalog_size();
  for (ResponseId y : {sample.y_w, sample.y_l, sample.y_w_c})
    if (y < 0 || y >= K) {
      v.push_back("response out of catalog");
      break;
    }
  if (sample.y_w == sample.y_l) v.push_back("degenerate preference pair");
  if (sample.y_w == sample.y_w_c) v.push_back("degenerate symmetric pair");

  return report;
}

std::string encode_sample(const SymmetricSample& sample) {
  nlohmann::ordered_json j;
  j["prompt"] = sample.prompt.id;
  j["queried"] = sample.prompt.queried_positions;
  j["image"] = sample.image;
  j["image_c"] = sample.image_c;
  j["y_w"] = sample.y_w;
  j["y_l"] = sample.y_l;
  j["y_w_c"] = sample.y_w_c;
  j["neighbor_id"] = sample.neighbor_id;
  return j.dump();
}

SymmetricSample decode_sample(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  SymmetricSample s;
  s.prompt.id = j.at("prompt").get<int>();
  s.prompt.queried_positions = j.at("queried").get<std::vector<int>>();
  s.image = j.at("image").get<std::vector<double>>();
  s.image_c = j.at("image_c").get<std::vector<double>>();
  s.y_w = j.at("y_w").get<int>();
  s.y_l = j.at("y_l").get<int>();
  s.y_w_c = j.at("y_w_c").get<int>();
  s.neighbor_id = j.at("neighbor_id").get<int>();
  return s;
}

}  // namespace sympo
