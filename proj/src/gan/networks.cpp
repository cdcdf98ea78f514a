#include "r2i/gan/networks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace r2i::gan {

using nn::Var;

namespace {

constexpr int kMinChannels = 8;
constexpr int kDiscCondWidth = 32;
constexpr int kDiscHidden = 64;

int log2_exact(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

Var leaky(const Var& x) { return nn::leaky_relu(x, 0.2f); }

void require_shape(const Var& v, int rows, int cols, const char* what) {
  const auto& s = v.shape();
  if (s.size() != 2 || s[0] != rows || s[1] != cols)
    throw std::invalid_argument(std::string(what) + " has shape " + nn::shape_str(s) + ", expected [" +
                                std::to_string(rows) + ", " + std::to_string(cols) + "]");
}

}  // namespace

double sigmoid(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

Generator::Generator(const GanConfig& config, nn::ParameterSet& params, std::mt19937_64& rng) : config_(config) {
  validate(config);
  const int s = config.base_scale;
  const int ups = log2_exact(s / 4);
  trunk_channels_ = config.gen_width * (s / 4);
  ca_ = nn::Linear(params, "g.ca", config.embedding_dim, 2 * config.ca_dim, rng);
  fc_ = nn::Linear(params, "g.fc", config.z_dim + config.ca_dim, trunk_channels_ * 16, rng);
  int ch = trunk_channels_;
  for (int i = 0; i < ups; ++i) {
    int next = std::max(ch / 2, kMinChannels);
    trunk_.emplace_back(params, "g.trunk" + std::to_string(i), ch, next, 3, 1, 1, rng);
    ch = next;
  }
  head0_ = nn::Conv2d(params, "g.head0", ch, 3, 3, 1, 1, rng);
  for (int k = 0; k < 2; ++k) {
    const std::string p = "g.stage" + std::to_string(k + 1);
    const int next = std::max(ch / 2, kMinChannels);
    Stage& st = stages_[k];
    st.cond_proj = nn::Linear(params, p + ".cond", config.ca_dim, config.cond_channels, rng);
    st.joint = nn::Conv2d(params, p + ".joint", ch + config.cond_channels, ch, 3, 1, 1, rng);
    st.res_a = nn::Conv2d(params, p + ".res_a", ch, ch, 3, 1, 1, rng);
    st.res_b = nn::Conv2d(params, p + ".res_b", ch, ch, 3, 1, 1, rng);
    st.up = nn::Conv2d(params, p + ".up", ch, next, 3, 1, 1, rng);
    st.head = nn::Conv2d(params, p + ".head", next, 3, 3, 1, 1, rng);
    ch = next;
  }
}

Generator::Output Generator::forward(const Var& z, const Var& condition, const Var& eps) const {
  const int b = z.shape().at(0);
  require_shape(z, b, config_.z_dim, "noise");
  require_shape(condition, b, config_.embedding_dim, "condition");
  require_shape(eps, b, config_.ca_dim, "conditioning noise");

  Output out;
  Var stats = ca_(condition);
  out.mu = nn::slice_cols(stats, 0, config_.ca_dim);
  out.log_sigma = nn::slice_cols(stats, config_.ca_dim, config_.ca_dim);
  Var c = nn::add(out.mu, nn::mul(nn::exp(out.log_sigma), eps));

  Var h = leaky(fc_(nn::concat({z, c})));
  h = nn::reshape(h, {b, trunk_channels_, 4, 4});
  for (const auto& conv : trunk_) h = leaky(conv(nn::upsample_nearest2x(h)));
  out.images[0] = nn::tanh(head0_(h));

  for (int k = 0; k < 2; ++k) {
    const Stage& st = stages_[k];
    const int side = h.shape()[2];
    Var cmap = nn::broadcast_spatial(st.cond_proj(c), side, side);
    h = leaky(st.joint(nn::concat({h, cmap})));
    h = leaky(nn::add(h, st.res_b(leaky(st.res_a(h)))));
    h = leaky(st.up(nn::upsample_nearest2x(h)));
    out.images[k + 1] = nn::tanh(st.head(h));
  }
  return out;
}

Discriminator::Discriminator(const GanConfig& config, int scale_index, nn::ParameterSet& params,
                             std::mt19937_64& rng) {
  validate(config);
  if (scale_index < 0 || scale_index > 2) throw std::invalid_argument("scale index must be 0, 1 or 2");
  side_ = config.base_scale << scale_index;
  const std::string p = "d" + std::to_string(scale_index);
  const int layers = log2_exact(side_ / 4);
  int in = 3, out = config.disc_width;
  for (int i = 0; i < layers; ++i) {
    convs_.emplace_back(params, p + ".conv" + std::to_string(i), in, out, 4, 2, 1, rng);
    in = out;
    out = std::min(out * 2, config.disc_width * 8);
  }
  const int feat = in * 16;
  uncond_ = nn::Linear(params, p + ".uncond", feat, 1, rng);
  cond_proj_ = nn::Linear(params, p + ".cond_proj", config.ca_dim, kDiscCondWidth, rng);
  joint_ = nn::Linear(params, p + ".joint", feat + kDiscCondWidth, kDiscHidden, rng);
  cond_out_ = nn::Linear(params, p + ".cond_out", kDiscHidden, 1, rng);
}

Var Discriminator::features(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != side_ || s[3] != side_)
    throw std::invalid_argument("discriminator for side " + std::to_string(side_) + " got images of shape " +
                                nn::shape_str(s));
  Var h = x;
  for (const auto& conv : convs_) h = leaky(conv(h));
  return nn::reshape(h, {s[0], static_cast<int>(h.value().size() / s[0])});
}

Var Discriminator::uncond_logit(const Var& features) const { return uncond_(features); }

Var Discriminator::cond_logit(const Var& features, const Var& c) const {
  Var cp = leaky(cond_proj_(c));
  return cond_out_(leaky(joint_(nn::concat({features, cp}))));
}

GanModel::GanModel(const GanConfig& c) : config(c) {
  validate(c);
  std::mt19937_64 rng(c.seed ^ 0x6a09e667f3bcc909ull);
  generator = Generator(c, g_params, rng);
  for (int k = 0; k < 3; ++k) discriminators[k] = Discriminator(c, k, d_params, rng);
}

std::array<nn::Tensor, 3> GanModel::generate(const nn::Tensor& z, const nn::Tensor& condition,
                                             const nn::Tensor& eps) const {
  nn::NoGradGuard guard;
  auto out = generator.forward(Var::constant(z), Var::constant(condition), Var::constant(eps));
  return {out.images[0].value(), out.images[1].value(), out.images[2].value()};
}

Discrimination GanModel::discriminate(int scale_index, const nn::Tensor& images, const nn::Tensor& c) const {
  if (scale_index < 0 || scale_index > 2) throw std::invalid_argument("scale index must be 0, 1 or 2");
  nn::NoGradGuard guard;
  const auto& d = discriminators[scale_index];
  Var f = d.features(Var::constant(images));
  Var cv = Var::constant(c);
  require_shape(cv, images.shape[0], config.ca_dim, "discriminator condition");
  Discrimination out;
  const Var u = d.uncond_logit(f), c2 = d.cond_logit(f, cv);
  for (float v : u.data()) out.uncond.push_back(sigmoid(v));
  for (float v : c2.data()) out.cond.push_back(sigmoid(v));
  return out;
}

nn::Tensor condition_batch(const std::vector<const std::vector<float>*>& embeddings, int dim) {
  if (embeddings.empty()) throw std::invalid_argument("condition_batch needs at least one embedding");
  nn::Tensor out({static_cast<int>(embeddings.size()), dim});
  const double target = std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto& e = *embeddings[i];
    if (static_cast<int>(e.size()) != dim)
      throw std::invalid_argument("embedding has dimension " + std::to_string(e.size()) + ", expected " +
                                  std::to_string(dim));
    double norm = 0.0;
    for (float v : e) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (!std::isfinite(norm) || norm == 0.0)
      throw std::invalid_argument("embedding row " + std::to_string(i) + " has zero or non-finite norm");
    for (int j = 0; j < dim; ++j)
      out.data[i * static_cast<std::size_t>(dim) + j] = static_cast<float>(e[j] * (target / norm));
  }
  return out;
}

}  // namespace r2i::gan
