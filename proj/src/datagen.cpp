#include "sympo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sympo/confighash.hpp"
#include "sympo/errors.hpp"
#include "sympo/kernels.hpp"

namespace sympo {

namespace {

constexpr std::uint64_t kImagesStream = 0;
constexpr std::uint64_t kPromptsStream = 1;
constexpr std::uint64_t kSampleStreamBase = 2;

// partial Fisher-Yates: first `take` entries of a seeded permutation of [0,n)
std::vector<int> draw_distinct(int n, int take, SplitMix64& rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int t = 0; t < take; ++t) {
    const int j = t + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - t)));
    std::swap(idx[static_cast<size_t>(t)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(take));
  return idx;
}

bool attr_bit(double v) { return v >= 0.5; }

}  // namespace

World generate_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;

  SplitMix64 img_rng(stream_seed(config.seed, kImagesStream));
  world.images.resize(static_cast<size_t>(config.n_images));
  for (auto& img : world.images) {
    img.resize(static_cast<size_t>(config.d_img));
    for (double& v : img) v = img_rng.next_bool(0.5) ? 1.0 : 0.0;
  }

  SplitMix64 prompt_rng(stream_seed(config.seed, kPromptsStream));
  world.prompts.resize(static_cast<size_t>(config.n_prompts));
  if (config.n_prompts * config.q <= config.d_img) {
    // disjoint query sets: consecutive slices of one seeded permutation
    std::vector<int> perm = draw_distinct(config.d_img, config.d_img, prompt_rng);
    for (int p = 0; p < config.n_prompts; ++p) {
      auto& prompt = world.prompts[static_cast<size_t>(p)];
      prompt.id = p;
      prompt.queried_positions.assign(perm.begin() + p * config.q,
                                      perm.begin() + (p + 1) * config.q);
      std::sort(prompt.queried_positions.begin(), prompt.queried_positions.end());
    }
  } else {
    for (int p = 0; p < config.n_prompts; ++p) {
      auto& prompt = world.prompts[static_cast<size_t>(p)];
      prompt.id = p;
      prompt.queried_positions = draw_distinct(config.d_img, config.q, prompt_rng);
      std::sort(prompt.queried_positions.begin(), prompt.queried_positions.end());
    }
  }
  return world;
}

ResponseId preferred_response(const ImageFeat& image, const Prompt& prompt) {
  ResponseId id = 0;
  for (size_t t = 0; t < prompt.queried_positions.size(); ++t)
    if (attr_bit(image[static_cast<size_t>(prompt.queried_positions[t])]))
      id |= 1 << t;
  return id;
}

ResponseId hallucinated_response(const ImageFeat& image, const Prompt& prompt, int flip_count,
                                 SplitMix64& rng) {
  const int q = static_cast<int>(prompt.queried_positions.size());
  if (flip_count < 1 || flip_count > q)
    throw usage_error("flip_count must be in [1, q]");
  ResponseId id = preferred_response(image, prompt);
  for (int t : draw_distinct(q, flip_count, rng)) id ^= 1 << t;
  return id;
}

double cosine_similarity(const ImageFeat& a, const ImageFeat& b) {
  const auto& ops = kernels::scalar_ops();
  const double na = ops.dot(a.data(), a.data(), a.size());
  const double nb = ops.dot(b.data(), b.data(), b.size());
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ops.dot(a.data(), b.data(), a.size()) / std::sqrt(na * nb);
}

int nearest_neighbor(const std::vector<ImageFeat>& images, int idx) {
  if (images.size() < 2) throw usage_error("nearest neighbor needs at least two images");
  int best = -1;
  double best_sim = 0.0;
  for (int j = 0; j < static_cast<int>(images.size()); ++j) {
    if (j == idx) continue;
    const double sim = cosine_similarity(images[static_cast<size_t>(idx)],
                                         images[static_cast<size_t>(j)]);
    if (best < 0 || sim > best_sim) {
      best = j;
      best_sim = sim;
    }
  }
  return best;
}

std::vector<int> neighbor_ranking(const std::vector<ImageFeat>& images, int idx) {
  if (images.size() < 2) throw usage_error("nearest neighbor needs at least two images");
  std::vector<std::pair<double, int>> scored;
  scored.reserve(images.size() - 1);
  for (int j = 0; j < static_cast<int>(images.size()); ++j) {
    if (j == idx) continue;
    scored.emplace_back(
        cosine_similarity(images[static_cast<size_t>(idx)], images[static_cast<size_t>(j)]), j);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> ranked;
  ranked.reserve(scored.size());
  for (const auto& [sim, j] : scored) ranked.push_back(j);
  return ranked;
}

ImageFeat contrastive_image(const ImageFeat& image, ContrastiveMode mode,
                            const WorldConfig& config, SplitMix64& rng) {
  const int d = static_cast<int>(image.size());
  switch (mode) {
    case ContrastiveMode::black:
      return ImageFeat(image.size(), 0.0);
    case ContrastiveMode::cropped: {
      const int keep = d / 2;  // zeroes exactly ceil(d/2) positions
      const int start = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(d - keep + 1)));
      ImageFeat out(image.size(), 0.0);
      for (int i = start; i < start + keep; ++i)
        out[static_cast<size_t>(i)] = image[static_cast<size_t>(i)];
      return out;
    }
    case ContrastiveMode::noisy: {
      ImageFeat out(image.size());
      for (size_t i = 0; i < image.size(); ++i) {
        const double v = image[i] + config.noise_sigma * rng.next_gaussian();
        out[i] = std::clamp(v, 0.0, 1.0);
      }
      return out;
    }
    case ContrastiveMode::synthetic: {
      // caption-style lossy reconstruction: round, then drop k attributes
      ImageFeat out(image.size());
      for (size_t i = 0; i < image.size(); ++i) out[i] = attr_bit(image[i]) ? 1.0 : 0.0;
      const int k = std::max(1, d / 4);
      for (int i : draw_distinct(d, k, rng)) out[static_cast<size_t>(i)] = 0.0;
      return out;
    }
    case ContrastiveMode::similar:
      throw usage_error("similar mode is resolved against the image pool, not per image");
  }
  throw usage_error("unknown contrastive mode");
}

std::vector<SymmetricSample> Dataset::split(bool heldout_split) const {
  std::vector<SymmetricSample> out;
  for (size_t i = 0; i < samples.size(); ++i)
    if (static_cast<bool>(heldout[i]) == heldout_split) out.push_back(samples[i]);
  return out;
}

Dataset build_preference_dataset(const WorldConfig& config, double heldout_frac) {
  if (heldout_frac < 0.0 || heldout_frac >= 1.0)
    throw config_error("heldout_frac must be in [0, 1)");
  const World world = generate_world(config);

  Dataset ds;
  ds.config = config;
  ds.heldout_frac = heldout_frac;

  constexpr int kMaxAttempts = 8;
  const bool similar = config.contrastive_mode == ContrastiveMode::similar;

  // neighbor rankings computed lazily, once per image
  std::vector<std::vector<int>> rankings(similar ? world.images.size() : 0);

  const int total = config.n_images * config.n_prompts;
  for (int img_idx = 0; img_idx < config.n_images; ++img_idx) {
    for (int p_idx = 0; p_idx < config.n_prompts; ++p_idx) {
      const std::uint64_t k =
          static_cast<std::uint64_t>(img_idx) * static_cast<std::uint64_t>(config.n_prompts) +
          static_cast<std::uint64_t>(p_idx);
      SplitMix64 rng(stream_seed(config.seed, kSampleStreamBase + k));
      const bool heldout = rng.next_bool(heldout_frac);

      const ImageFeat& image = world.images[static_cast<size_t>(img_idx)];
      const Prompt& prompt = world.prompts[static_cast<size_t>(p_idx)];

      SymmetricSample s;
      s.prompt = prompt;
      s.image = image;
      s.y_w = preferred_response(image, prompt);
      s.y_l = hallucinated_response(image, prompt, config.flip_count, rng);

      bool ok = false;
      if (similar) {
        auto& ranked = rankings[static_cast<size_t>(img_idx)];
        if (ranked.empty()) ranked = neighbor_ranking(world.images, img_idx);
        const int tries = std::min<int>(kMaxAttempts, static_cast<int>(ranked.size()));
        for (int a = 0; a < tries; ++a) {
          const int cand = ranked[static_cast<size_t>(a)];
          const ImageFeat& cand_img = world.images[static_cast<size_t>(cand)];
          const ResponseId y_w_c = preferred_response(cand_img, prompt);
          if (y_w_c != s.y_w) {
            s.image_c = cand_img;
            s.y_w_c = y_w_c;
            s.neighbor_id = cand;
            if (a > 0) ++ds.neighbor_interventions;
            ok = true;
            break;
          }
        }
      } else {
        for (int a = 0; a < kMaxAttempts; ++a) {
          ImageFeat cand = contrastive_image(image, config.contrastive_mode, config, rng);
          const ResponseId y_w_c = preferred_response(cand, prompt);
          if (y_w_c != s.y_w) {
            s.image_c = std::move(cand);
            s.y_w_c = y_w_c;
            s.neighbor_id = -1;
            ok = true;
            break;
          }
        }
      }

      if (!ok) {
        ++ds.dropped;
        continue;
      }
      ds.samples.push_back(std::move(s));
      ds.heldout.push_back(heldout ? 1 : 0);
    }
  }

  if (ds.dropped * 2 > total)
    throw generation_error("dropped more than half of the sample grid; world too degenerate");
  return ds;
}

nlohmann::ordered_json world_config_to_json(const WorldConfig& config) {
  nlohmann::ordered_json j;
  j["d_img"] = config.d_img;
  j["n_prompts"] = config.n_prompts;
  j["q"] = config.q;
  j["n_images"] = config.n_images;
  j["flip_count"] = config.flip_count;
  j["contrastive_mode"] = to_string(config.contrastive_mode);
  j["noise_sigma"] = config.noise_sigma;
  j["seed"] = config.seed;
  return j;
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig c;
  c.d_img = j.at("d_img").get<int>();
  c.n_prompts = j.at("n_prompts").get<int>();
  c.q = j.at("q").get<int>();
  c.n_images = j.at("n_images").get<int>();
  c.flip_count = j.at("flip_count").get<int>();
  c.contrastive_mode = contrastive_mode_from_string(j.at("contrastive_mode").get<std::string>());
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string dataset_config_hash(const Dataset& dataset) {
  nlohmann::ordered_json j;
  j["kind"] = "dataset";
  j["world"] = world_config_to_json(dataset.config);
  j["heldout_frac"] = dataset.heldout_frac;
  return config_hash(j);
}

void save_dataset(const std::string& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  const auto data_path = std::filesystem::path(dir) / "data.jsonl";
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write " + data_path.string());
  for (const auto& s : dataset.samples) out << encode_sample(s) << '\n';
  out.close();
  if (!out) throw config_error("short write on " + data_path.string());

  nlohmann::ordered_json meta;
  meta["config_hash"] = dataset_config_hash(dataset);
  meta["world"] = world_config_to_json(dataset.config);
  meta["heldout_frac"] = dataset.heldout_frac;
  meta["n_samples"] = dataset.samples.size();
  meta["dropped"] = dataset.dropped;
  meta["neighbor_interventions"] = dataset.neighbor_interventions;
  std::vector<size_t> heldout_indices;
  for (size_t i = 0; i < dataset.heldout.size(); ++i)
    if (dataset.heldout[i]) heldout_indices.push_back(i);
  meta["heldout_indices"] = heldout_indices;

  const auto meta_path = std::filesystem::path(dir) / "meta.json";
  std::ofstream meta_out(meta_path, std::ios::binary | std::ios::trunc);
  if (!meta_out) throw config_error("cannot write " + meta_path.string());
  meta_out << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  const auto meta_path = std::filesystem::path(dir) / "meta.json";
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw config_error("cannot open " + meta_path.string());
  nlohmann::json meta;
  meta_in >> meta;

  Dataset ds;
  ds.config = world_config_from_json(meta.at("world"));
  ds.heldout_frac = meta.at("heldout_frac").get<double>();
  ds.dropped = meta.at("dropped").get<int>();
  ds.neighbor_interventions = meta.at("neighbor_interventions").get<int>();

  const auto data_path = std::filesystem::path(dir) / "data.jsonl";
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw config_error("cannot open " + data_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.samples.push_back(decode_sample(line));
  }

  ds.heldout.assign(ds.samples.size(), 0);
  for (const auto& idx : meta.at("heldout_indices")) {
    const size_t i = idx.get<size_t>();
    if (i >= ds.heldout.size()) throw config_error("held-out index out of range in meta.json");
    ds.heldout[i] = 1;
  }

  // reject malformed records up front (degenerate pairs included)
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const ValidationReport report = validate_sample(ds.samples[i], ds.config);
    if (!report.ok())
      throw config_error("invalid sample at line " + std::to_string(i + 1) + ": " +
                         report.violations.front());
  }
  return ds;
}

}  // namespace sympo
