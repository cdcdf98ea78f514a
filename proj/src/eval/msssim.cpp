#include "r2i/eval/msssim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "r2i/util/log.hpp"

namespace r2i::eval {

GrayImage luminance(const data::RgbImage& img) {
  GrayImage g{img.width, img.height, std::vector<double>(static_cast<std::size_t>(img.width) * img.height)};
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const auto* p = &img.pixels[i * 3];
    g.pixels[i] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
  }
  return g;
}

GrayImage luminance(const nn::Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw std::invalid_argument("luminance expects a [3,H,W] tensor");
  const int h = chw.dim(1), w = chw.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  GrayImage g{w, h, std::vector<double>(plane)};
  for (std::size_t i = 0; i < plane; ++i) {
    double r = (chw.data[i] + 1.0) * 0.5, gr = (chw.data[plane + i] + 1.0) * 0.5, b = (chw.data[2 * plane + i] + 1.0) * 0.5;
    g.pixels[i] = std::clamp(0.299 * r + 0.587 * gr + 0.114 * b, 0.0, 1.0);
  }
  return g;
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> t{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    double x = i - kSsimWindow / 2;
    t[i] = std::exp(-(x * x) / (2.0 * kSsimSigma * kSsimSigma));
    sum += t[i];
  }
  for (auto& v : t) v /= sum;
  return t;
}

int ms_ssim_scale_count(int width, int height) {
  const int side = std::min(width, height);
  int m = 0;
  while (m < 5 && side >= (1 << m) * kSsimWindow) ++m;
  return m;
}

namespace {

// Separable Gaussian filter, valid region only.
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h) {
  static const auto taps = gaussian_taps();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      const double* row = &img[static_cast<std::size_t>(y) * w + x];
      for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * row[k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += taps[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

GrayImage downsample(const GrayImage& g) {
  GrayImage d{g.width / 2, g.height / 2, {}};
  d.pixels.resize(static_cast<std::size_t>(d.width) * d.height);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      d.pixels[static_cast<std::size_t>(y) * d.width + x] =
          0.25 * (g.at(2 * x, 2 * y) + g.at(2 * x + 1, 2 * y) + g.at(2 * x, 2 * y + 1) + g.at(2 * x + 1, 2 * y + 1));
  return d;
}

void warn_reduced(int scales, int w, int h) {
  log::warn({{"metric", "ms-ssim"},
             {"msg", "image too small for 5 scales, weights renormalized"},
             {"scales", scales},
             {"width", w},
             {"height", h}});
}

}  // namespace

MsSsimPyramid prepare_ms_ssim(const GrayImage& img, int scales) {
  if (scales < 1 || scales > 5) throw std::invalid_argument("MS-SSIM scale count must be in [1,5]");
  if (ms_ssim_scale_count(img.width, img.height) < scales)
    throw std::invalid_argument("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                " too small for " + std::to_string(scales) + " MS-SSIM scales");
  MsSsimPyramid p;
  GrayImage cur = img;
  for (int s = 0; s < scales; ++s) {
    MsSsimPyramid::Level lv;
    lv.out_w = cur.width - kSsimWindow + 1;
    lv.out_h = cur.height - kSsimWindow + 1;
    lv.mean = filter_valid(cur.pixels, cur.width, cur.height);
    std::vector<double> sq(cur.pixels.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = cur.pixels[i] * cur.pixels[i];
    lv.second = filter_valid(sq, cur.width, cur.height);
    GrayImage next = s + 1 < scales ? downsample(cur) : GrayImage{};
    lv.image = std::move(cur);
    p.levels.push_back(std::move(lv));
    cur = std::move(next);
  }
  return p;
}

double ms_ssim(const MsSsimPyramid& a, const MsSsimPyramid& b) {
  if (a.levels.size() != b.levels.size() || a.levels.empty())
    throw std::invalid_argument("MS-SSIM pyramids differ in depth");
  const int m = static_cast<int>(a.levels.size());
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  double wsum = 0.0;
  for (int s = 0; s < m; ++s) wsum += kMsSsimWeights[s];
  double result = 1.0;
  for (int s = 0; s < m; ++s) {
    const auto& la = a.levels[s];
    const auto& lb = b.levels[s];
    if (la.image.width != lb.image.width || la.image.height != lb.image.height)
      throw std::invalid_argument("MS-SSIM images differ in size");
    std::vector<double> prod(la.image.pixels.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = la.image.pixels[i] * lb.image.pixels[i];
    const auto cross = filter_valid(prod, la.image.width, la.image.height);
    double cs_sum = 0.0, ssim_sum = 0.0;
    const bool coarsest = s == m - 1;
    for (std::size_t i = 0; i < cross.size(); ++i) {
      const double ma = la.mean[i], mb = lb.mean[i];
      const double va = la.second[i] - ma * ma, vb = lb.second[i] - mb * mb;
      const double cov = cross[i] - ma * mb;
      const double cs = (2.0 * cov + c2) / ((va + vb) + c2);
      cs_sum += cs;
      if (coarsest) ssim_sum += cs * ((2.0 * ma * mb + c1) / ((ma * ma + mb * mb) + c1));
    }
    const double n = static_cast<double>(cross.size());
    const double term = coarsest ? ssim_sum / n : cs_sum / n;
    result *= std::pow(std::max(term, 0.0), kMsSsimWeights[s] / wsum);
  }
  return result;
}

double ms_ssim(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("MS-SSIM images differ in size");
  const int m = ms_ssim_scale_count(a.width, a.height);
  if (m == 0)
    throw std::invalid_argument("image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " smaller than the 11-pixel window");
  if (m < 5) warn_reduced(m, a.width, a.height);
  return ms_ssim(prepare_ms_ssim(a, m), prepare_ms_ssim(b, m));
}

nlohmann::json to_json(const MsSsimResult& r) {
  return {{"mean", r.mean}, {"pair_count", r.pair_count}, {"sample_count", r.sample_count}, {"scales", r.scales}};
}

MsSsimResult ms_ssim_result_from_json(const nlohmann::json& j) {
  MsSsimResult r;
  r.mean = j.at("mean").get<double>();
  r.pair_count = j.at("pair_count").get<long long>();
  r.sample_count = j.at("sample_count").get<int>();
  r.scales = j.value("scales", 0);
  return r;
}

MsSsimResult diversity_score(const std::vector<GrayImage>& images, int n_sample, std::mt19937_64& rng) {
  if (n_sample < 2) throw std::invalid_argument("n_sample must be >= 2");
  if (images.size() < static_cast<std::size_t>(n_sample))
    throw std::invalid_argument("diversity score needs " + std::to_string(n_sample) + " images, only " +
                                std::to_string(images.size()) + " available");
  const int w = images.front().width, h = images.front().height;
  for (const auto& im : images)
    if (im.width != w || im.height != h) throw std::invalid_argument("diversity score images differ in size");
  const int m = ms_ssim_scale_count(w, h);
  if (m == 0) throw std::invalid_argument("images smaller than the 11-pixel window");
  if (m < 5) warn_reduced(m, w, h);

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<MsSsimPyramid> pyr;
  for (int i = 0; i < n_sample; ++i) pyr.push_back(prepare_ms_ssim(images[order[i]], m));

  MsSsimResult r;
  r.sample_count = n_sample;
  r.scales = m;
  double sum = 0.0;
  for (int i = 0; i < n_sample; ++i)
    for (int j = i + 1; j < n_sample; ++j) {
      sum += ms_ssim(pyr[i], pyr[j]);
      ++r.pair_count;
    }
  r.mean = sum / static_cast<double>(r.pair_count);
  return r;
}

}  // namespace r2i::eval
