#include "sympo/policy.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sympo/errors.hpp"
#include "sympo/kernels.hpp"

namespace sympo {

int PolicyParams::num_assertions() const {
  return std::countr_zero(static_cast<unsigned>(catalog));
}

PolicyParams PolicyParams::zeros(const WorldConfig& world) {
  world.validate();
  PolicyParams p;
  p.d_img = world.d_img;
  p.n_prompts = world.n_prompts;
  p.catalog = world.catalog_size();
  p.W = Matrix(static_cast<size_t>(p.feature_dim()), static_cast<size_t>(p.catalog));
  return p;
}

namespace {

FeatureVector build_features(const ImageFeat& image, int prompt_id, int d_img, int n_prompts) {
  if (static_cast<int>(image.size()) != d_img)
    throw config_error("image length does not match d_img");
  if (prompt_id < 0 || prompt_id >= n_prompts)
    throw config_error("prompt id out of range");
  FeatureVector f;
  f.values.assign(static_cast<size_t>(d_img + n_prompts + 1), 0.0);
  std::copy(image.begin(), image.end(), f.values.begin());
  f.values[static_cast<size_t>(d_img + prompt_id)] = 1.0;
  f.values.back() = 1.0;
  return f;
}

}  // namespace

FeatureVector context_features(const ImageFeat& image, const Prompt& prompt,
                               const WorldConfig& world) {
  return build_features(image, prompt.id, world.d_img, world.n_prompts);
}

std::vector<double> SoftmaxState::probs() const {
  std::vector<double> p(logits.size());
  for (size_t j = 0; j < logits.size(); ++j) p[j] = std::exp(logits[j] - lse);
  return p;
}

SoftmaxState eval_softmax(const PolicyParams& params, const ImageFeat& image,
                          const Prompt& prompt) {
  SoftmaxState st;
  st.features = build_features(image, prompt.id, params.d_img, params.n_prompts);
  const size_t d = params.W.rows;
  const size_t K = params.W.cols;
  if (st.features.values.size() != d)
    throw config_error("parameter shape does not match world geometry");

  st.logits.assign(K, 0.0);
  // logits = W^T f, accumulated row by row so each row is one axpy.
  for (size_t i = 0; i < d; ++i) {
    const double fi = st.features.values[i];
    if (fi != 0.0) kernels::axpy(fi, params.W.row(i), st.logits.data(), K);
  }
  st.lse = kernels::logsumexp(st.logits.data(), K);
  if (!std::isfinite(st.lse)) throw numeric_error("non-finite logits");
  return st;
}

double log_prob(const PolicyParams& params, const ImageFeat& image, const Prompt& prompt,
                ResponseId y) {
  if (y < 0 || y >= params.catalog) throw usage_error("response id out of catalog");
  return eval_softmax(params, image, prompt).log_prob(y);
}

GradMatrix log_prob_grad(const PolicyParams& params, const ImageFeat& image,
                         const Prompt& prompt, ResponseId y) {
  if (y < 0 || y >= params.catalog) throw usage_error("response id out of catalog");
  const SoftmaxState st = eval_softmax(params, image, prompt);
  std::vector<double> coef = st.probs();
  for (double& c : coef) c = -c;
  coef[static_cast<size_t>(y)] += 1.0;

  GradMatrix g(params.W.rows, params.W.cols);
  for (size_t i = 0; i < g.rows; ++i) {
    const double fi = st.features.values[i];
    if (fi != 0.0) kernels::axpy(fi, coef.data(), g.row(i), g.cols);
  }
  return g;
}

std::vector<double> full_distribution(const PolicyParams& params, const ImageFeat& image,
                                      const Prompt& prompt) {
  return eval_softmax(params, image, prompt).probs();
}

ResponseId argmax_response(const PolicyParams& params, const ImageFeat& image,
                           const Prompt& prompt) {
  const SoftmaxState st = eval_softmax(params, image, prompt);
  size_t best = 0;
  for (size_t j = 1; j < st.logits.size(); ++j)
    if (st.logits[j] > st.logits[best]) best = j;
  return static_cast<ResponseId>(best);
}

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'P'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(params.W.rows));
  put_u32(out, static_cast<std::uint32_t>(params.W.cols));
  put_u32(out, static_cast<std::uint32_t>(params.n_prompts));
  put_u32(out, static_cast<std::uint32_t>(params.d_img));
  out.write(reinterpret_cast<const char*>(params.W.data.data()),
            static_cast<std::streamsize>(params.W.data.size() * sizeof(double)));
  if (!out) throw config_error("short write on checkpoint: " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw config_error("bad checkpoint magic: " + path);
  const int version = in.get();
  if (version != kVersion) throw config_error("unsupported checkpoint version");

  const std::uint32_t d = get_u32(in);
  const std::uint32_t K = get_u32(in);
  const std::uint32_t n_prompts = get_u32(in);
  const std::uint32_t d_img = get_u32(in);
  if (!in || K == 0 || std::popcount(K) != 1 || d != d_img + n_prompts + 1)
    throw config_error("inconsistent checkpoint header");

  PolicyParams p;
  p.d_img = static_cast<int>(d_img);
  p.n_prompts = static_cast<int>(n_prompts);
  p.catalog = static_cast<int>(K);
  p.W = Matrix(d, K);
  in.read(reinterpret_cast<char*>(p.W.data.data()),
          static_cast<std::streamsize>(p.W.data.size() * sizeof(double)));
  if (!in) throw config_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace sympo
