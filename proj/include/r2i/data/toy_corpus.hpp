#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "r2i/data/image.hpp"
#include "r2i/data/recipe.hpp"

namespace r2i::data {

/// Synthetic two-class corpus: class 0 recipes use red ingredients and come
/// with red-dominant images, class 1 recipes use blue ingredients and
/// blue-dominant images. Titles share no words with the recipe body.
struct ToyCorpus {
  std::vector<Recipe> recipes;
  std::map<std::string, RawImage> images;  // keyed by image ref
};

ToyCorpus make_toy_corpus(int n_recipes, std::uint64_t seed, int image_width = 80, int image_height = 72);

/// Writes `<dir>/recipes.jsonl` and `<dir>/images/<ref>`.
void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir);

}  // namespace r2i::data
