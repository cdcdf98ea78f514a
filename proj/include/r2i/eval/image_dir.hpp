#pragma once

#include <optional>
#include <string>
#include <vector>

#include "r2i/data/image.hpp"

namespace r2i::eval {

struct NamedImage {
  std::string name;  // file stem
  data::RgbImage image;
};

/// Decodes every .png/.jpg/.jpeg in `dir` (sorted by file name) and keeps the
/// square images of side `side`; side 0 picks the largest square side present.
/// Throws when the directory is missing or nothing qualifies.
std::vector<NamedImage> load_image_dir(const std::string& dir, int side = 0);

/// First image file (sorted by name) whose stem is `id` or starts with `id_`.
std::optional<std::string> find_image_for_id(const std::string& dir, const std::string& id);

}  // namespace r2i::eval
