#pragma once

#include <array>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/data/image.hpp"
#include "r2i/nn/tensor.hpp"

namespace r2i::eval {

/// Single-channel image with values in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// BT.601 luma of an RGB image mapped to [0,1].
GrayImage luminance(const data::RgbImage& img);
/// Same for a [3,H,W] tensor in [-1,1].
GrayImage luminance(const nn::Tensor& chw);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Normalized 1-D Gaussian taps (window 11, sigma 1.5).
std::array<double, kSsimWindow> gaussian_taps();

/// Largest M <= 5 with min(width, height) >= 2^(M-1) * 11; 0 if even one
/// scale does not fit.
int ms_ssim_scale_count(int width, int height);

/// Per-image pyramid with window statistics that do not depend on the other
/// image; lets many pairs share the per-image work.
struct MsSsimPyramid {
  struct Level {
    GrayImage image;
    std::vector<double> mean;    // Gaussian-weighted local mean (valid region)
    std::vector<double> second;  // Gaussian-weighted local E[x^2]
    int out_w = 0;
    int out_h = 0;
  };
  std::vector<Level> levels;
};

MsSsimPyramid prepare_ms_ssim(const GrayImage& img, int scales);

/// Standard multi-scale SSIM: contrast-structure terms at every scale,
/// luminance only at the coarsest, negative terms clamped to 0, weights
/// renormalized when fewer than 5 scales fit (with a logged warning).
/// Symmetric in (a, b) bit for bit.
double ms_ssim(const GrayImage& a, const GrayImage& b);
double ms_ssim(const MsSsimPyramid& a, const MsSsimPyramid& b);

struct MsSsimResult {
  double mean = 0.0;
  long long pair_count = 0;
  int sample_count = 0;
  int scales = 0;

  bool operator==(const MsSsimResult&) const = default;
};

nlohmann::json to_json(const MsSsimResult& r);
MsSsimResult ms_ssim_result_from_json(const nlohmann::json& j);

/// Samples n_sample images without replacement and averages MS-SSIM over
/// every unordered pair (summed in a fixed order).
MsSsimResult diversity_score(const std::vector<GrayImage>& images, int n_sample, std::mt19937_64& rng);

}  // namespace r2i::eval
