#pragma once

// Reference implementations written independently of the library code.
// They favour the most literal formulation over speed.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "r2i/eval/msssim.hpp"

namespace r2i::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* base = std::getenv("R2I_TEST_TMP");
  std::filesystem::path p = base ? base : (std::filesystem::temp_directory_path() / "r2i_tests");
  p /= name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// ---- inception score ---------------------------------------------------------

/// exp(E_x KL(p(y|x) || p(y))) per shard, with the same seeded partition as
/// the library (iota, shuffle, consecutive shards, remainder dropped).
inline std::vector<double> oracle_inception_shards(const std::vector<std::vector<double>>& post, int splits,
                                                   std::mt19937_64 rng) {
  std::vector<std::size_t> order(post.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t shard = post.size() / splits;
  std::vector<double> out;
  for (int s = 0; s < splits; ++s) {
    std::vector<std::vector<double>> part;
    for (std::size_t i = 0; i < shard; ++i) part.push_back(post[order[s * shard + i]]);
    const std::size_t c = part[0].size();
    std::vector<double> py(c, 0.0);
    for (const auto& p : part)
      for (std::size_t k = 0; k < c; ++k) py[k] += p[k] / static_cast<double>(part.size());
    double mean_kl = 0.0;
    for (const auto& p : part) {
      double kl = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        if (p[k] > 0.0) kl += p[k] * std::log(p[k] / py[k]);
      mean_kl += kl / static_cast<double>(part.size());
    }
    out.push_back(std::exp(mean_kl));
  }
  return out;
}

inline std::vector<std::vector<double>> random_posteriors(int n, int classes, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(classes));
  for (auto& p : out) {
    double s = 0.0;
    for (auto& v : p) s += v = g(rng) + 1e-6;
    for (auto& v : p) v /= s;
  }
  return out;
}

// ---- MS-SSIM -----------------------------------------------------------------

/// Direct two-dimensional window sums, two-pass moments, 2x2 mean pyramid.
inline double oracle_ms_ssim(const eval::GrayImage& a0, const eval::GrayImage& b0) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> w1(win);
  double norm = 0.0;
  for (int i = 0; i < win; ++i) norm += w1[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (sigma * sigma));
  for (auto& v : w1) v /= norm;
  const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int levels = 0;
  for (int m = 5; m >= 1; --m)
    if (std::min(a0.width, a0.height) >= (1 << (m - 1)) * win) {
      levels = m;
      break;
    }
  double wsum = 0.0;
  for (int m = 0; m < levels; ++m) wsum += weights[m];
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  auto shrink = [](const eval::GrayImage& g) {
    eval::GrayImage d{g.width / 2, g.height / 2, {}};
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x)
        d.pixels.push_back((g.at(2 * x, 2 * y) + g.at(2 * x + 1, 2 * y) + g.at(2 * x, 2 * y + 1) +
                            g.at(2 * x + 1, 2 * y + 1)) /
                           4.0);
    return d;
  };

  eval::GrayImage a = a0, b = b0;
  double result = 1.0;
  for (int m = 0; m < levels; ++m) {
    double cs_acc = 0.0, l_acc = 0.0;
    int count = 0;
    for (int y = 0; y + win <= a.height; ++y)
      for (int x = 0; x + win <= a.width; ++x) {
        double mx = 0.0, my = 0.0;
        for (int j = 0; j < win; ++j)
          for (int i = 0; i < win; ++i) {
            mx += w1[i] * w1[j] * a.at(x + i, y + j);
            my += w1[i] * w1[j] * b.at(x + i, y + j);
          }
        double vx = 0.0, vy = 0.0, cxy = 0.0;
        for (int j = 0; j < win; ++j)
          for (int i = 0; i < win; ++i) {
            const double dx = a.at(x + i, y + j) - mx, dy = b.at(x + i, y + j) - my;
            vx += w1[i] * w1[j] * dx * dx;
            vy += w1[i] * w1[j] * dy * dy;
            cxy += w1[i] * w1[j] * dx * dy;
          }
        cs_acc += (2 * cxy + c2) / (vx + vy + c2);
        l_acc += (2 * mx * my + c1) / (mx * mx + my * my + c1) * (2 * cxy + c2) / (vx + vy + c2);
        ++count;
      }
    const double term = (m == levels - 1 ? l_acc : cs_acc) / count;
    result *= std::pow(std::max(0.0, term), weights[m] / wsum);
    a = shrink(a);
    b = shrink(b);
  }
  return result;
}

inline eval::GrayImage random_gray(int w, int h, std::mt19937_64& rng, double smooth = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  eval::GrayImage g{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  const double fx = u(rng) * 0.5, fy = u(rng) * 0.5, ph = u(rng) * 6.28;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g.pixels[y * w + x] = smooth * (0.5 + 0.5 * std::sin(fx * x + fy * y + ph)) + (1.0 - smooth) * u(rng);
  return g;
}

// ---- conditioning augmentation ----------------------------------------------

/// KL(N(mu, sigma^2) || N(0, 1)) summed over dimensions, in terms of sigma.
inline double oracle_kl(const std::vector<double>& mu, const std::vector<double>& log_sigma) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double sigma = std::exp(log_sigma[i]);
    kl += -std::log(sigma) + (sigma * sigma + mu[i] * mu[i]) / 2.0 - 0.5;
  }
  return kl;
}

// ---- discriminator loss --------------------------------------------------------

/// Scalar loop over one scale: unconditional pair term plus conditional term
/// with the wrong-pair half weight.
inline double oracle_d_loss_scale(const std::vector<double>& ur, const std::vector<double>& uf,
                                  const std::vector<double>& cr, const std::vector<double>& cf,
                                  const std::vector<double>& cw) {
  auto mean_log = [](const std::vector<double>& v, bool complement) {
    double s = 0.0;
    for (double p : v) s += std::log(complement ? 1.0 - p : p);
    return s / static_cast<double>(v.size());
  };
  double loss = -(mean_log(ur, false) + mean_log(uf, true));
  if (!cr.empty()) loss += -(mean_log(cr, false) + 0.5 * (mean_log(cf, true) + mean_log(cw, true)));
  return loss;
}

// ---- finite differences --------------------------------------------------------

/// Central differences of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double n = std::sqrt(std::max(na, nb));
  return n == 0.0 ? 0.0 : std::sqrt(d) / n;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& b) {
  std::vector<double> out;
  for (const auto& r : b) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline std::vector<std::vector<double>> unflatten(const std::vector<double>& v, std::size_t rows) {
  const std::size_t cols = v.size() / rows;
  std::vector<std::vector<double>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r].assign(v.begin() + r * cols, v.begin() + (r + 1) * cols);
  return out;
}

}  // namespace r2i::test
