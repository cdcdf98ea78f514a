#include "r2i/data/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace r2i::data {

RgbImage to_rgb(const RawImage& raw) {
  if (raw.channels != 1 && raw.channels != 3 && raw.channels != 4)
    throw std::invalid_argument("unsupported channel count " + std::to_string(raw.channels));
  if (raw.pixels.size() != static_cast<std::size_t>(raw.width) * raw.height * raw.channels)
    throw std::invalid_argument("image pixel buffer does not match its dimensions");
  RgbImage out{raw.width, raw.height, {}};
  out.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height * 3);
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = raw.pixels.data() + i * raw.channels;
    std::uint8_t* dst = out.pixels.data() + i * 3;
    if (raw.channels == 1) {
      dst[0] = dst[1] = dst[2] = src[0];
    } else {
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return out;
}

RawImage decode_image_file(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw std::runtime_error("cannot decode image " + path);
  if (m.depth() != CV_8U) {
    cv::Mat tmp;
    m.convertTo(tmp, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 255.0);
    m = tmp;
  }
  int ch = m.channels();
  if (ch == 3) {
    cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  } else if (ch == 4) {
    cv::cvtColor(m, m, cv::COLOR_BGRA2RGBA);
  } else if (ch != 1) {
    throw std::runtime_error("unsupported channel count in " + path);
  }
  if (!m.isContinuous()) m = m.clone();
  RawImage raw{m.cols, m.rows, ch, {}};
  raw.pixels.assign(m.data, m.data + static_cast<std::size_t>(m.cols) * m.rows * ch);
  return raw;
}

void write_png(const std::string& path, const RgbImage& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("cannot write image " + path);
}

std::uint8_t unit_to_pixel(float v) {
  float p = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(p, 0.0f, 255.0f));
}

nn::Tensor to_tensor(const RgbImage& img) {
  const int h = img.height, w = img.width;
  nn::Tensor t({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        t.data[(static_cast<std::size_t>(c) * h + y) * w + x] = pixel_to_unit(img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c]);
  return t;
}

RgbImage from_tensor(const nn::Tensor& chw) {
  if (chw.rank() != 3 || chw.shape[0] != 3) throw std::invalid_argument("expected [3,H,W] tensor, got " + nn::shape_str(chw.shape));
  const int h = chw.shape[1], w = chw.shape[2];
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = unit_to_pixel(chw.data[(static_cast<std::size_t>(c) * h + y) * w + x]);
  return img;
}

MultiScaleImage dequantize(const QuantizedMultiScale& q) {
  MultiScaleImage m;
  m.base_scale = q.base_scale;
  for (int i = 0; i < 3; ++i) m.scales[i] = to_tensor(q.scales[i]);
  return m;
}

RgbImage downsample2x(const RgbImage& img) {
  if (img.width % 2 || img.height % 2) throw std::invalid_argument("downsample2x needs even dimensions");
  RgbImage out{img.width / 2, img.height / 2, {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) { return static_cast<int>(img.pixels[(static_cast<std::size_t>(yy) * img.width + xx) * 3 + c]); };
        int sum = at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1);
        out.pixels[(static_cast<std::size_t>(y) * out.width + x) * 3 + c] = static_cast<std::uint8_t>((sum + 2) / 4);
      }
  return out;
}

int staging_side(int base_scale) { return static_cast<int>(std::lround(4.25 * base_scale)); }

QuantizedMultiScale preprocess_image_quantized(const RawImage& raw, int base_scale, bool train_mode,
                                               std::mt19937_64& rng, PreprocessTrace* trace) {
  if (base_scale < 1) throw std::invalid_argument("base_scale must be positive");
  if (raw.width <= 1 || raw.height <= 1)
    throw std::invalid_argument("degenerate image of size " + std::to_string(raw.width) + "x" + std::to_string(raw.height));
  RgbImage rgb = to_rgb(raw);

  const int staging = staging_side(base_scale);
  const int crop = 4 * base_scale;
  const double scale = static_cast<double>(staging) / std::min(rgb.width, rgb.height);
  int new_w = std::max(crop, static_cast<int>(std::lround(rgb.width * scale)));
  int new_h = std::max(crop, static_cast<int>(std::lround(rgb.height * scale)));
  cv::Mat src(rgb.height, rgb.width, CV_8UC3, rgb.pixels.data());
  cv::Mat resized;
  cv::resize(src, resized, cv::Size(new_w, new_h), 0, 0, scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);

  PreprocessTrace t;
  if (train_mode) {
    std::uniform_int_distribution<int> dx(0, new_w - crop);
    std::uniform_int_distribution<int> dy(0, new_h - crop);
    t.crop_x = dx(rng);
    t.crop_y = dy(rng);
    t.flipped = std::bernoulli_distribution(0.5)(rng);
  } else {
    t.crop_x = (new_w - crop) / 2;
    t.crop_y = (new_h - crop) / 2;
  }
  if (trace) *trace = t;

  RgbImage top{crop, crop, std::vector<std::uint8_t>(static_cast<std::size_t>(crop) * crop * 3)};
  for (int y = 0; y < crop; ++y) {
    const std::uint8_t* row = resized.ptr<std::uint8_t>(t.crop_y + y);
    for (int x = 0; x < crop; ++x) {
      int sx = t.crop_x + (t.flipped ? crop - 1 - x : x);
      std::copy_n(row + sx * 3, 3, top.pixels.data() + (static_cast<std::size_t>(y) * crop + x) * 3);
    }
  }
  QuantizedMultiScale q;
  q.base_scale = base_scale;
  q.scales[2] = std::move(top);
  q.scales[1] = downsample2x(q.scales[2]);
  q.scales[0] = downsample2x(q.scales[1]);
  return q;
}

MultiScaleImage preprocess_image(const RawImage& raw, int base_scale, bool train_mode, std::mt19937_64& rng,
                                 PreprocessTrace* trace) {
  return dequantize(preprocess_image_quantized(raw, base_scale, train_mode, rng, trace));
}

}  // namespace r2i::data
