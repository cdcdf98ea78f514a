#include "r2i/data/toy_corpus.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <random>

namespace r2i::data {

namespace {

const std::vector<std::string> kRedIngredients = {"tomato", "strawberry", "red pepper", "raspberry",
                                                  "cherry", "beet",       "red onion",  "watermelon"};
const std::vector<std::string> kBlueIngredients = {"blueberry", "blackberry", "plum",    "blue cheese",
                                                   "purple cabbage", "elderberry", "acai", "purple grape"};
const std::vector<std::string> kShared = {"salt", "sugar", "water", "lemon juice"};
const std::vector<std::string> kVerbs = {"chop", "mix", "simmer", "stir", "bake", "blend", "season", "serve"};
const std::vector<std::string> kTitleWords = {"grandma", "sunday", "classic", "midnight", "rustic", "famous"};

RawImage paint(int w, int h, int cls, std::mt19937_64& rng) {
  RawImage img{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  std::uniform_int_distribution<int> jitter(-20, 20);
  // Dominant channel high, the others low; a few lighter blobs for texture.
  std::array<int, 3> base = cls == 0 ? std::array<int, 3>{210, 50, 45} : std::array<int, 3>{40, 60, 205};
  for (auto& b : base) b += jitter(rng);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  struct Blob { double cx, cy, r; int delta; };
  std::vector<Blob> blobs;
  for (int i = 0; i < 3; ++i)
    blobs.push_back({pos(rng) * w, pos(rng) * h, 4.0 + pos(rng) * 10.0, std::uniform_int_distribution<int>(-40, 40)(rng)});
  std::uniform_int_distribution<int> noise(-6, 6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int delta = 0;
      for (const auto& b : blobs)
        if ((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) < b.r * b.r) delta += b.delta;
      for (int c = 0; c < 3; ++c) {
        int v = base[c] + delta + noise(rng);
        img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
    }
  return img;
}

}  // namespace

ToyCorpus make_toy_corpus(int n_recipes, std::uint64_t seed, int image_width, int image_height) {
  std::mt19937_64 rng(seed);
  ToyCorpus corpus;
  for (int i = 0; i < n_recipes; ++i) {
    const int cls = i % 2;
    const auto& pool = cls == 0 ? kRedIngredients : kBlueIngredients;
    std::vector<std::string> ingr = pool;
    std::shuffle(ingr.begin(), ingr.end(), rng);
    ingr.resize(3);
    ingr.push_back(kShared[i % kShared.size()]);

    std::vector<std::string> steps;
    for (int s = 0; s < 3; ++s) {
      const auto& verb = kVerbs[(i + s * 3) % kVerbs.size()];
      steps.push_back(verb + " the " + ingr[s] + " with the " + ingr[(s + 1) % ingr.size()] + ".");
    }
    Recipe r;
    r.id = "toy" + std::to_string(i);
    r.title = kTitleWords[i % kTitleWords.size()] + " " + kTitleWords[(i + 1) % kTitleWords.size()] + " delight";
    r.ingredients = std::move(ingr);
    r.instructions = std::move(steps);
    r.image_refs = {r.id + ".png"};
    r.class_label = cls;
    corpus.images[r.image_refs[0]] = paint(image_width, image_height, cls, rng);
    corpus.recipes.push_back(std::move(r));
  }
  return corpus;
}

void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  write_recipe_records((fs::path(dir) / "recipes.jsonl").string(), corpus.recipes);
  for (const auto& [ref, img] : corpus.images) write_png((fs::path(dir) / "images" / ref).string(), to_rgb(img));
}

}  // namespace r2i::data
