#pragma once

#include <array>
#include <random>
#include <vector>

#include "r2i/gan/config.hpp"
#include "r2i/nn/layers.hpp"

namespace r2i::gan {

/// Tree generator: a shared trunk up to the base scale and two refinement
/// stages, each doubling the resolution. Every branch ends in a tanh head.
class Generator {
 public:
  struct Output {
    std::array<nn::Var, 3> images;  // [B,3,s,s], [B,3,2s,2s], [B,3,4s,4s]
    nn::Var mu;                     // [B, ca_dim]
    nn::Var log_sigma;              // [B, ca_dim]
  };

  Generator() = default;
  Generator(const GanConfig& config, nn::ParameterSet& params, std::mt19937_64& rng);

  /// z [B, z_dim], condition [B, embedding_dim], eps [B, ca_dim].
  Output forward(const nn::Var& z, const nn::Var& condition, const nn::Var& eps) const;

 private:
  struct Stage {
    nn::Linear cond_proj;
    nn::Conv2d joint;
    nn::Conv2d res_a;
    nn::Conv2d res_b;
    nn::Conv2d up;
    nn::Conv2d head;
  };

  GanConfig config_;
  nn::Linear ca_;
  nn::Linear fc_;
  int trunk_channels_ = 0;
  std::vector<nn::Conv2d> trunk_;
  nn::Conv2d head0_;
  std::array<Stage, 2> stages_;
};

/// Discriminator for one scale with an unconditional and a conditional
/// logit sharing a convolutional feature extractor.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const GanConfig& config, int scale_index, nn::ParameterSet& params, std::mt19937_64& rng);

  int side() const { return side_; }
  /// x [B,3,side,side] -> [B, F]. Throws on any other spatial size.
  nn::Var features(const nn::Var& x) const;
  nn::Var uncond_logit(const nn::Var& features) const;
  /// c [B, ca_dim]
  nn::Var cond_logit(const nn::Var& features, const nn::Var& c) const;

 private:
  int side_ = 0;
  std::vector<nn::Conv2d> convs_;
  nn::Linear uncond_;
  nn::Linear cond_proj_;
  nn::Linear joint_;
  nn::Linear cond_out_;
};

struct Discrimination {
  std::vector<double> uncond;  // probabilities in (0,1)
  std::vector<double> cond;
};

/// Parameters of both networks, split so each optimizer owns one set.
struct GanModel {
  GanConfig config;
  nn::ParameterSet g_params;
  nn::ParameterSet d_params;
  Generator generator;
  std::array<Discriminator, 3> discriminators;

  explicit GanModel(const GanConfig& c);
  GanModel(const GanModel&) = delete;
  GanModel& operator=(const GanModel&) = delete;

  /// Inference only. Shapes as Generator::forward.
  std::array<nn::Tensor, 3> generate(const nn::Tensor& z, const nn::Tensor& condition, const nn::Tensor& eps) const;
  Discrimination discriminate(int scale_index, const nn::Tensor& images, const nn::Tensor& c) const;
};

double sigmoid(double logit);

/// Rows of `embeddings` rescaled to norm sqrt(dim) -> [B, dim]. Throws on a
/// dimension mismatch or a zero / non-finite row.
nn::Tensor condition_batch(const std::vector<const std::vector<float>*>& embeddings, int dim);

}  // namespace r2i::gan
