#include <doctest.h>

#include <cmath>
#include <iostream>
#include <random>

#include "oracles.hpp"
#include "r2i/data/packed.hpp"
#include "r2i/data/toy_corpus.hpp"
#include "r2i/embedding/losses.hpp"
#include "r2i/embedding/trainer.hpp"
#include "r2i/util/log.hpp"

using namespace r2i;
using namespace r2i::embedding;

namespace {

Batch random_batch(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Batch b(rows, std::vector<double>(cols));
  for (auto& r : b)
    for (auto& v : r) v = n(rng);
  return b;
}

std::string toy_pack(const std::string& name, int n = 8) {
  auto dir = test::scratch_dir(name);
  auto corpus = data::make_toy_corpus(n, 5);
  auto vocab = data::build_vocabulary(corpus.recipes, 1);
  data::ImageLookup lookup = [&](const std::string& ref) -> std::optional<data::RawImage> {
    return corpus.images.at(ref);
  };
  data::PackOptions opt;
  opt.base_scale = 8;
  const auto path = (dir / "toy.pack").string();
  data::pack_dataset(corpus.recipes, lookup, vocab, opt, path);
  return path;
}

}  // namespace

TEST_CASE("cosine alignment loss on hand values") {
  Batch r = {{1, 0}, {0, 1}};
  Batch v = {{1, 0}, {0, 1}};
  auto l = cosine_alignment_loss(r, v, 0.1);
  CHECK(l.positive == doctest::Approx(0.0));
  CHECK(l.negative == doctest::Approx(0.0));  // cos = 0 < margin
  Batch v2 = {{0, 1}, {1, 0}};
  auto l2 = cosine_alignment_loss(r, v2, 0.1);
  CHECK(l2.positive == doctest::Approx(1.0));
  CHECK(l2.negative == doctest::Approx(0.9));
  CHECK(l2.value == doctest::Approx(1.9));
  CHECK_THROWS(cosine_alignment_loss({{1, 0}}, {{1, 0}}, 0.1));
}

TEST_CASE("cosine alignment gradient matches finite differences") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_batch(4, 6, rng), v = random_batch(4, 6, rng);
    auto l = cosine_alignment_loss(r, v, 0.1);
    auto fr = [&](const std::vector<double>& x) { return cosine_alignment_loss(test::unflatten(x, 4), v, 0.1).value; };
    auto fv = [&](const std::vector<double>& x) { return cosine_alignment_loss(r, test::unflatten(x, 4), 0.1).value; };
    CHECK(test::relative_error(test::flatten(l.grad_recipe), test::numeric_gradient(fr, test::flatten(r))) < 1e-4);
    CHECK(test::relative_error(test::flatten(l.grad_image), test::numeric_gradient(fv, test::flatten(v))) < 1e-4);
  }
}

TEST_CASE("cross entropy value and gradient") {
  auto ce = softmax_cross_entropy({{0.0, 0.0}}, {1});
  CHECK(ce.value == doctest::Approx(std::log(2.0)));
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_batch(5, 4, rng);
    std::vector<int> y = {0, 1, 2, 3, 1};
    auto c = softmax_cross_entropy(x, y);
    auto f = [&](const std::vector<double>& v) { return softmax_cross_entropy(test::unflatten(v, 5), y).value; };
    CHECK(test::relative_error(test::flatten(c.grad_logits), test::numeric_gradient(f, test::flatten(x))) < 1e-4);
  }
}

TEST_CASE("semantic loss gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto r = random_batch(3, 5, rng), v = random_batch(3, 5, rng), w = random_batch(5, 4, rng);
  std::vector<double> b = {0.1, -0.2, 0.0, 0.3};
  std::vector<int> y = {0, 3, 2};
  auto s = semantic_reg_loss(r, v, y, w, b);
  CHECK(s.value == doctest::Approx(0.5 * (s.recipe_ce + s.image_ce)));
  auto fr = [&](const std::vector<double>& x) { return semantic_reg_loss(test::unflatten(x, 3), v, y, w, b).value; };
  CHECK(test::relative_error(test::flatten(s.grad_recipe), test::numeric_gradient(fr, test::flatten(r))) < 1e-4);
}

TEST_CASE("variant names and default dimensions") {
  CHECK(parse_variant("reg") == Variant::kReg);
  CHECK(parse_variant("NOREG") == Variant::kNoReg);
  CHECK_THROWS(parse_variant("both"));
  CHECK(default_dim(Variant::kNoReg) == 1024);
  CHECK(default_dim(Variant::kReg) == 1048);
}

TEST_CASE("training lowers alignment and exports stable embeddings") {
  log::set_stream(nullptr);
  const auto path = toy_pack("emb_train");
  auto ds = data::PackedDataset::open(path);
  TrainConfig tc;
  tc.variant = Variant::kReg;
  tc.num_classes = 2;
  tc.embedding_dim = 32;
  tc.epochs = 20;
  tc.word_dim = 16;
  tc.ingredient_dim = 32;
  tc.instruction_dim = 32;
  tc.image_width = 4;
  tc.seed = 4;
  auto res = train_embedding(ds, tc);
  log::set_stream(&std::cerr);
  REQUIRE(res.steps.size() == 20);
  CHECK(res.steps.back().alignment < res.steps.front().alignment);
  CHECK(res.model.has_classifier());

  auto table = export_embeddings(res.model, ds);
  CHECK(table.variant == Variant::kReg);
  CHECK(table.dim == 32);
  REQUIRE(table.records.size() == ds.size());

  auto dir = test::scratch_dir("emb_io");
  const auto ckpt = (dir / "m.ckpt").string();
  res.model.save(ckpt);
  auto loaded = EmbeddingModel::load(ckpt);
  CHECK(export_embeddings(loaded, ds) == table);

  const auto emb = (dir / "e.bin").string();
  write_embeddings(emb, table);
  CHECK(read_embeddings(emb) == table);
  CHECK(table.find(table.records[3].id) != nullptr);
  CHECK(table.find("nope") == nullptr);

  SUBCASE("same seed, same trajectory") {
    log::set_stream(nullptr);
    auto again = train_embedding(ds, tc);
    log::set_stream(&std::cerr);
    for (std::size_t i = 0; i < res.steps.size(); ++i) CHECK(again.steps[i].total == res.steps[i].total);
  }
  SUBCASE("recipe embedding ignores the title") {
    auto rec = ds.record(0);
    auto a = loaded.embed_recipe(rec.tokens).vector;
    rec.title = "something else entirely";
    CHECK(loaded.embed_recipe(rec.tokens).vector == a);
  }
}
