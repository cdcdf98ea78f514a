#pragma once

#include <random>
#include <span>
#include <vector>

#include "r2i/gan/config.hpp"

namespace r2i::gan {

/// Discriminator probabilities for one scale. The conditional vectors may be
/// empty, in which case only the unconditional head contributes.
struct DScores {
  std::vector<double> uncond_real;
  std::vector<double> uncond_fake;
  std::vector<double> cond_real;
  std::vector<double> cond_fake;
  std::vector<double> cond_wrong;  // real image paired with another sample's condition
};

struct DLoss {
  std::vector<double> per_scale;
  double total = 0.0;
  std::vector<DScores> grad;  // dLoss/dscore, same layout as the input
};

/// Per scale: -(mean log D(x) + mean log(1 - D(G))) for the unconditional
/// head, plus -(mean log D(x,c) + 0.5 (mean log(1 - D(G,c)) + mean log(1 - D(x,c'))))
/// for the conditional head. Scores are clamped to [eps, 1 - eps] inside logs.
DLoss discriminator_loss(const std::vector<DScores>& scales, double eps = 1e-7);

struct GScores {
  std::vector<double> uncond_fake;
  std::vector<double> cond_fake;  // may be empty
};

struct GLoss {
  std::vector<double> per_scale;
  double adversarial = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
  std::vector<GScores> grad;
};

/// Non-saturating: -mean log D(G) per head. Minimax: mean log(1 - D(G)).
/// Summed over heads and scales, plus kl_term.
GLoss generator_loss(const std::vector<GScores>& scales, double kl_term, GeneratorLossForm form,
                     double eps = 1e-7);

/// 1/2 sum(mu^2 + exp(2 ls) - 1 - 2 ls)
double kl_divergence(std::span<const double> mu, std::span<const double> log_sigma);

struct CaLatent {
  std::vector<double> mu;
  std::vector<double> log_sigma;
  std::vector<double> sample;
  double kl = 0.0;
};

/// Reparameterized sample from N(mu, sigma^2) with the given noise.
CaLatent ca_sample(std::span<const double> mu, std::span<const double> log_sigma, std::span<const double> eps);

/// Standard-normal draws, row-major [batch, dim].
std::vector<float> sample_noise(int batch, int dim, std::mt19937_64& rng);

}  // namespace r2i::gan
