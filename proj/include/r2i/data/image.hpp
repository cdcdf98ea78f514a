#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "r2i/nn/tensor.hpp"

namespace r2i::data {

/// Decoded 8-bit image with 1, 3 or 4 interleaved channels (gray, RGB, RGBA).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
};

/// 8-bit interleaved RGB.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const RgbImage&) const = default;
};

/// Gray is replicated, alpha is dropped.
RgbImage to_rgb(const RawImage& raw);

RawImage decode_image_file(const std::string& path);
void write_png(const std::string& path, const RgbImage& img);

/// Three square RGB images of side (s, 2s, 4s), quantized to 8 bits.
struct QuantizedMultiScale {
  int base_scale = 0;
  std::array<RgbImage, 3> scales;

  bool operator==(const QuantizedMultiScale&) const = default;
};

/// Three float tensors [3, S, S] with S in (s, 2s, 4s) and values in [-1, 1].
struct MultiScaleImage {
  int base_scale = 0;
  std::array<nn::Tensor, 3> scales;

  bool operator==(const MultiScaleImage&) const = default;
};

inline float pixel_to_unit(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
std::uint8_t unit_to_pixel(float v);

/// RGB HWC bytes -> [3, H, W] tensor in [-1, 1].
nn::Tensor to_tensor(const RgbImage& img);
/// [3, H, W] tensor in [-1, 1] -> RGB bytes (clamped, rounded).
RgbImage from_tensor(const nn::Tensor& chw);

MultiScaleImage dequantize(const QuantizedMultiScale& q);

/// 2x2 box filter with round-half-up.
RgbImage downsample2x(const RgbImage& img);

/// Side of the square the shorter image side is resized to before cropping.
int staging_side(int base_scale);

struct PreprocessTrace {
  int crop_x = 0;
  int crop_y = 0;
  bool flipped = false;
};

/// Resizes the shorter side to staging_side(base), crops a 4*base square
/// (random offset in train mode, centered otherwise), flips horizontally with
/// probability 1/2 in train mode, then box-downsamples to 2*base and base.
QuantizedMultiScale preprocess_image_quantized(const RawImage& raw, int base_scale, bool train_mode,
                                               std::mt19937_64& rng, PreprocessTrace* trace = nullptr);

MultiScaleImage preprocess_image(const RawImage& raw, int base_scale, bool train_mode, std::mt19937_64& rng,
                                 PreprocessTrace* trace = nullptr);

}  // namespace r2i::data
