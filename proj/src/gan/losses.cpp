#include "r2i/gan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace r2i::gan {

namespace {

// Mean of log(clamp(p)) over a vector and its gradient w.r.t. each p.
double mean_log(const std::vector<double>& p, double eps, double coeff, std::vector<double>& grad) {
  grad.assign(p.size(), 0.0);
  if (p.empty()) return 0.0;
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double q = std::clamp(p[i], eps, 1.0 - eps);
    sum += std::log(q);
    if (p[i] > eps && p[i] < 1.0 - eps) grad[i] = coeff / (q * n);
  }
  return sum / n;
}

double mean_log1m(const std::vector<double>& p, double eps, double coeff, std::vector<double>& grad) {
  grad.assign(p.size(), 0.0);
  if (p.empty()) return 0.0;
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double q = std::clamp(1.0 - p[i], eps, 1.0 - eps);
    sum += std::log(q);
    if (p[i] > eps && p[i] < 1.0 - eps) grad[i] = -coeff / (q * n);
  }
  return sum / n;
}

void check_scores(const std::vector<double>& p, const char* what) {
  for (double v : p)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument(std::string(what) + " score outside [0,1]: " + std::to_string(v));
}

}  // namespace

DLoss discriminator_loss(const std::vector<DScores>& scales, double eps) {
  if (scales.empty()) throw std::invalid_argument("discriminator_loss needs at least one scale");
  DLoss out;
  for (const auto& s : scales) {
    check_scores(s.uncond_real, "real");
    check_scores(s.uncond_fake, "fake");
    check_scores(s.cond_real, "conditional real");
    check_scores(s.cond_fake, "conditional fake");
    check_scores(s.cond_wrong, "mismatched");
    if (s.uncond_real.empty() || s.uncond_fake.empty())
      throw std::invalid_argument("discriminator_loss needs real and fake scores");
    DScores g;
    double loss = -(mean_log(s.uncond_real, eps, -1.0, g.uncond_real) +
                    mean_log1m(s.uncond_fake, eps, -1.0, g.uncond_fake));
    const bool conditional = !s.cond_real.empty();
    if (conditional) {
      if (s.cond_fake.empty()) throw std::invalid_argument("conditional head needs fake scores");
      if (s.cond_wrong.empty()) {
        loss -= mean_log(s.cond_real, eps, -1.0, g.cond_real) + mean_log1m(s.cond_fake, eps, -1.0, g.cond_fake);
      } else {
        loss -= mean_log(s.cond_real, eps, -1.0, g.cond_real) +
                0.5 * (mean_log1m(s.cond_fake, eps, -0.5, g.cond_fake) +
                       mean_log1m(s.cond_wrong, eps, -0.5, g.cond_wrong));
      }
    }
    out.per_scale.push_back(loss);
    out.total += loss;
    out.grad.push_back(std::move(g));
  }
  return out;
}

GLoss generator_loss(const std::vector<GScores>& scales, double kl_term, GeneratorLossForm form, double eps) {
  if (scales.empty()) throw std::invalid_argument("generator_loss needs at least one scale");
  if (!std::isfinite(kl_term)) throw std::invalid_argument("non-finite KL term");
  GLoss out;
  const bool ns = form == GeneratorLossForm::kNonSaturating;
  auto head = [&](const std::vector<double>& p, std::vector<double>& g) {
    return ns ? -mean_log(p, eps, -1.0, g) : mean_log1m(p, eps, 1.0, g);
  };
  for (const auto& s : scales) {
    check_scores(s.uncond_fake, "fake");
    check_scores(s.cond_fake, "conditional fake");
    if (s.uncond_fake.empty()) throw std::invalid_argument("generator_loss needs fake scores");
    GScores g;
    double loss = head(s.uncond_fake, g.uncond_fake) + head(s.cond_fake, g.cond_fake);
    out.per_scale.push_back(loss);
    out.adversarial += loss;
    out.grad.push_back(std::move(g));
  }
  out.kl_term = kl_term;
  out.total = out.adversarial + kl_term;
  return out;
}

double kl_divergence(std::span<const double> mu, std::span<const double> log_sigma) {
  if (mu.size() != log_sigma.size()) throw std::invalid_argument("mu and log_sigma differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    kl += mu[i] * mu[i] + std::exp(2.0 * log_sigma[i]) - 1.0 - 2.0 * log_sigma[i];
  return 0.5 * kl;
}

CaLatent ca_sample(std::span<const double> mu, std::span<const double> log_sigma, std::span<const double> eps) {
  if (mu.size() != log_sigma.size() || mu.size() != eps.size())
    throw std::invalid_argument("ca_sample: mu, log_sigma and eps must have equal size");
  CaLatent out;
  out.mu.assign(mu.begin(), mu.end());
  out.log_sigma.assign(log_sigma.begin(), log_sigma.end());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(log_sigma[i]))
      throw std::invalid_argument("non-finite conditioning parameters at index " + std::to_string(i));
    out.sample.push_back(mu[i] + std::exp(log_sigma[i]) * eps[i]);
  }
  out.kl = kl_divergence(mu, log_sigma);
  return out;
}

std::vector<float> sample_noise(int batch, int dim, std::mt19937_64& rng) {
  if (batch < 1 || dim < 1) throw std::invalid_argument("sample_noise needs batch >= 1 and dim >= 1");
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> out(static_cast<std::size_t>(batch) * dim);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace r2i::gan
