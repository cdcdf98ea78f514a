#include "r2i/eval/image_dir.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <stdexcept>

namespace r2i::eval {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("image directory not found: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<NamedImage> load_image_dir(const std::string& dir, int side) {
  std::vector<NamedImage> all;
  for (const auto& p : image_files(dir)) {
    auto rgb = data::to_rgb(data::decode_image_file(p.string()));
    if (rgb.width != rgb.height) continue;
    all.push_back({p.stem().string(), std::move(rgb)});
  }
  if (side == 0)
    for (const auto& im : all) side = std::max(side, im.image.width);
  std::vector<NamedImage> out;
  for (auto& im : all)
    if (im.image.width == side) out.push_back(std::move(im));
  if (out.empty()) throw std::runtime_error("no square images of side " + std::to_string(side) + " in " + dir);
  return out;
}

std::optional<std::string> find_image_for_id(const std::string& dir, const std::string& id) {
  for (const auto& p : image_files(dir)) {
    const auto stem = p.stem().string();
    if (stem == id || stem.rfind(id + "_", 0) == 0) return p.string();
  }
  return std::nullopt;
}

}  // namespace r2i::eval
