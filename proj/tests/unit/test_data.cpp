#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "oracles.hpp"
#include "r2i/data/packed.hpp"
#include "r2i/data/recipe.hpp"
#include "r2i/data/toy_corpus.hpp"
#include "r2i/data/vocabulary.hpp"
#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

using namespace r2i;
using namespace r2i::data;

namespace {

RawImage gradient_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RawImage img{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

Recipe make_recipe(int i) {
  Recipe r;
  r.id = "r" + std::to_string(i);
  r.title = "title " + std::to_string(i);
  r.ingredients = {"Flour " + std::to_string(i % 7), "2 eggs", "salt"};
  r.instructions = {"Mix flour and eggs.", "Bake for " + std::to_string(i) + " minutes."};
  r.image_refs = {r.id + ".png"};
  r.class_label = i % 3;
  return r;
}

}  // namespace

TEST_CASE("whitespace normalization") {
  CHECK(normalize_whitespace("  a \t b\n\nc  ") == "a b c");
  CHECK(normalize_whitespace("") == "");
}

TEST_CASE("malformed recipe lines are skipped and counted") {
  log::set_stream(nullptr);
  const std::string text =
      R"({"id":"a","title":"T","ingredients":["x"],"instructions":["do x."],"images":["a.png"],"class":1})"
      "\n{not json\n"
      R"({"id":"b","ingredients":[],"instructions":["y."],"images":["b.png"]})"
      "\n"
      R"({"id":"a","ingredients":["x"],"instructions":["do x."],"images":["a.png"]})"
      "\n"
      R"({"id":"c","ingredients":["  two   words "],"instructions":["y."],"images":["c.png"]})"
      "\n";
  auto res = parse_recipe_lines(text);
  log::set_stream(&std::cerr);
  REQUIRE(res.recipes.size() == 2);
  CHECK(res.skipped == 3);
  REQUIRE(res.warnings.size() == 3);
  CHECK(res.warnings[0].find("line 2") != std::string::npos);
  CHECK(res.warnings[2].find("duplicate") != std::string::npos);
  CHECK(res.recipes[0].class_label == 1);
  CHECK(res.recipes[1].ingredients[0] == "two words");
  CHECK_FALSE(res.recipes[1].class_label.has_value());
}

TEST_CASE("recipe json round trip") {
  auto r = make_recipe(4);
  auto back = recipe_from_json(recipe_to_json(r));
  REQUIRE(back);
  CHECK(*back == r);
}

TEST_CASE("unreadable recipe file names the path") {
  CHECK_THROWS_WITH(parse_recipe_records("/nonexistent/recipes.jsonl"), doctest::Contains("/nonexistent/recipes.jsonl"));
}

TEST_CASE("vocabulary ignores titles and orders by count") {
  Recipe r;
  r.id = "x";
  r.title = "zebra zebra zebra";
  r.ingredients = {"Red Onion", "salt"};
  r.instructions = {"Chop the onion.", "Salt the onion!"};
  r.image_refs = {"x.png"};
  auto v = build_vocabulary({r}, 1);
  CHECK_FALSE(v.contains("zebra"));
  CHECK(v.contains("red_onion"));
  // onion, salt (ingredient + word) and the occur twice; ties break by token
  CHECK(v.token(2) == "onion");
  CHECK(v.token(3) == "salt");
  CHECK(v.token(4) == "the");
  CHECK(v.id("missing") == Vocabulary::kUnk);

  auto v2 = build_vocabulary({r}, 2);
  CHECK(v2.size() == 5);
}

TEST_CASE("tokenization pads and truncates") {
  Recipe r = make_recipe(1);
  r.instructions = {"one two three four five", "six"};
  Vocabulary v = build_vocabulary({r}, 1);
  TokenLimits lim{2, 3, 2};
  auto t = tokenize_recipe(r, v, lim);
  CHECK(t.ingredients.size() == 2);
  REQUIRE(t.instructions.size() == 6);
  CHECK(t.instructions[0] == v.id("one"));
  CHECK(t.instructions[1] == v.id("two"));
  CHECK(t.instructions[2] == v.id("six"));
  CHECK(t.instructions[3] == Vocabulary::kPad);
  CHECK(t.instructions[4] == Vocabulary::kPad);
}

TEST_CASE("preprocessing produces three square scales") {
  std::mt19937_64 rng(1);
  auto raw = gradient_image(90, 70, 3);
  PreprocessTrace tr;
  auto q = preprocess_image_quantized(raw, 8, true, rng, &tr);
  CHECK(q.scales[0].width == 8);
  CHECK(q.scales[1].width == 16);
  CHECK(q.scales[2].width == 32);
  CHECK(q.scales[2].height == 32);
  CHECK(q.scales[1] == downsample2x(q.scales[2]));
  CHECK(q.scales[0] == downsample2x(q.scales[1]));

  SUBCASE("eval mode is centered and deterministic") {
    std::mt19937_64 a(5), b(6);
    PreprocessTrace ta, tb;
    auto qa = preprocess_image_quantized(raw, 8, false, a, &ta);
    auto qb = preprocess_image_quantized(raw, 8, false, b, &tb);
    CHECK(qa == qb);
    CHECK_FALSE(ta.flipped);
  }
  SUBCASE("train mode flips about half the time") {
    std::mt19937_64 g(7);
    int flips = 0;
    for (int i = 0; i < 200; ++i) {
      PreprocessTrace t;
      preprocess_image_quantized(raw, 4, true, g, &t);
      flips += t.flipped;
    }
    CHECK(flips > 70);
    CHECK(flips < 130);
  }
}

TEST_CASE("tensor conversion round trips bytes") {
  auto raw = gradient_image(6, 5, 9);
  auto rgb = to_rgb(raw);
  CHECK(from_tensor(to_tensor(rgb)) == rgb);
  CHECK(pixel_to_unit(0) == -1.0f);
  CHECK(pixel_to_unit(255) == 1.0f);
}

TEST_CASE("pack round trip reproduces 100 records") {
  log::set_stream(nullptr);
  auto dir = test::scratch_dir("pack");
  std::vector<Recipe> recipes;
  std::map<std::string, RawImage> images;
  for (int i = 0; i < 100; ++i) {
    recipes.push_back(make_recipe(i));
    images[recipes.back().image_refs[0]] = gradient_image(40 + i % 5, 36, i);
  }
  auto vocab = build_vocabulary(recipes, 1);
  ImageLookup lookup = [&](const std::string& ref) -> std::optional<RawImage> {
    auto it = images.find(ref);
    return it == images.end() ? std::nullopt : std::optional<RawImage>(it->second);
  };
  PackOptions opt;
  opt.base_scale = 8;
  opt.seed = 11;
  const auto path = (dir / "a.pack").string();
  auto summary = pack_dataset(recipes, lookup, vocab, opt, path);
  log::set_stream(&std::cerr);
  CHECK(summary.count == 100);
  CHECK(summary.num_classes == 3);

  auto ds = PackedDataset::open(path);
  REQUIRE(ds.size() == 100);
  CHECK(ds.vocabulary() == vocab);
  CHECK(ds.base_scale() == 8);
  std::vector<PackedRecord> mapped;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto rec = ds.record(i);
    CHECK(rec.id == recipes[i].id);
    CHECK(rec.title == recipes[i].title);
    CHECK(rec.class_label == *recipes[i].class_label);
    CHECK(rec.tokens == tokenize_recipe(recipes[i], vocab, opt.limits));
    mapped.push_back(std::move(rec));
  }
  std::size_t seen = 0;
  read_packed_sequential(path, [&](std::size_t i, const PackedRecord& r) {
    CHECK(r == mapped[i]);
    ++seen;
  });
  CHECK(seen == 100);

  SUBCASE("repacking is byte identical") {
    const auto path2 = (dir / "b.pack").string();
    log::set_stream(nullptr);
    pack_dataset(recipes, lookup, vocab, opt, path2);
    log::set_stream(&std::cerr);
    CHECK(io::read_file(path) == io::read_file(path2));
  }
  SUBCASE("missing images drop the record") {
    auto partial = recipes;
    partial[3].image_refs = {"nowhere.png"};
    log::set_stream(nullptr);
    auto s = pack_dataset(partial, lookup, vocab, opt, (dir / "c.pack").string());
    log::set_stream(&std::cerr);
    CHECK(s.count == 99);
    CHECK(s.dropped == 1);
  }
  SUBCASE("truncated file is rejected") {
    auto bytes = io::read_file(path);
    bytes.resize(100);
    io::write_file_atomic(path, bytes);
    CHECK_THROWS(PackedDataset::open(path));
  }
  SUBCASE("bad magic is rejected") {
    auto bytes = io::read_file(path);
    bytes[0] = 'X';
    io::write_file_atomic(path, bytes);
    CHECK_THROWS_WITH(PackedDataset::open(path), doctest::Contains("magic"));
  }
}

TEST_CASE("toy corpus colors follow the class") {
  auto c = make_toy_corpus(8, 3);
  REQUIRE(c.recipes.size() == 8);
  for (const auto& r : c.recipes) {
    const auto& img = c.images.at(r.image_refs[0]);
    double red = 0, blue = 0;
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      red += img.pixels[i];
      blue += img.pixels[i + 2];
    }
    if (*r.class_label == 0) CHECK(red > blue);
    else CHECK(blue > red);
    auto words = instruction_words(r.title);
    for (const auto& w : words)
      for (const auto& ing : r.ingredients) CHECK(ingredient_token(ing).find(w) == std::string::npos);
  }
  CHECK(make_toy_corpus(8, 3).recipes == c.recipes);
}
