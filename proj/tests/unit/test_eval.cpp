#include <doctest.h>

#include <cmath>
#include <iostream>
#include <random>

#include "oracles.hpp"
#include "r2i/data/image.hpp"
#include "r2i/eval/classifier.hpp"
#include "r2i/eval/image_dir.hpp"
#include "r2i/eval/inception.hpp"
#include "r2i/eval/msssim.hpp"
#include "r2i/eval/report.hpp"
#include "r2i/util/log.hpp"

using namespace r2i;
using namespace r2i::eval;

namespace {

struct QuietLog {
  QuietLog() { log::set_stream(nullptr); }
  ~QuietLog() { log::set_stream(&std::cerr); }
};

}  // namespace

TEST_CASE("inception score on uniform and one-hot posteriors") {
  std::mt19937_64 rng(1);
  std::vector<Posterior> uniform(40, Posterior(10, 0.1));
  auto u = inception_score(uniform, 4, rng);
  CHECK(u.mean == 1.0);
  CHECK(u.std == 0.0);

  std::vector<Posterior> onehot;
  for (int i = 0; i < 100; ++i) {
    Posterior p(10, 0.0);
    p[i % 10] = 1.0;
    onehot.push_back(p);
  }
  auto o = inception_score(onehot, 1, rng);
  CHECK(std::abs(o.mean - 10.0) < 1e-9);
}

TEST_CASE("inception score matches the direct oracle") {
  std::mt19937_64 gen(2);
  auto post = test::random_posteriors(103, 7, gen);
  std::mt19937_64 rng(3);
  auto r = inception_score(post, 10, rng);
  auto expect = test::oracle_inception_shards(post, 10, std::mt19937_64(3));
  CHECK(r.num_samples == 100);  // remainder of 3 dropped
  REQUIRE(r.shard_scores.size() == 10);
  double mean = 0;
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(r.shard_scores[i] - expect[i]) < 1e-8);
    mean += expect[i] / 10;
  }
  CHECK(std::abs(r.mean - mean) < 1e-8);
  double var = 0;
  for (double e : expect) var += (e - mean) * (e - mean) / 10;
  CHECK(std::abs(r.std - std::sqrt(var)) < 1e-8);
}

TEST_CASE("inception score input checks") {
  std::mt19937_64 rng(4);
  CHECK_THROWS(inception_score({Posterior{0.5, 0.5}}, 2, rng));
  CHECK_THROWS(normalize_posterior({0.5, 0.3}));
  CHECK_THROWS(normalize_posterior({1.5, -0.5}));
  auto p = normalize_posterior({0.5, 0.5005});
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-15));
  auto r = inception_score(std::vector<Posterior>(10, Posterior{0.2, 0.8}), 2, rng);
  CHECK(inception_result_from_json(to_json(r)) == r);
}

TEST_CASE("ms-ssim reflexive, symmetric and bounded") {
  QuietLog q;
  std::mt19937_64 rng(5);
  auto a = test::random_gray(64, 64, rng, 0.6), b = test::random_gray(64, 64, rng, 0.6);
  CHECK(ms_ssim(a, a) == 1.0);
  CHECK(ms_ssim(a, b) == ms_ssim(b, a));
  const double v = ms_ssim(a, b);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
  for (int i = 0; i < 20; ++i) {
    const int side = 45 + 13 * (i % 5);
    auto x = test::random_gray(side, side, rng, 0.1 * (i % 9)), y = test::random_gray(side, side, rng, 0.5);
    CHECK(ms_ssim(x, x) == 1.0);
    CHECK(ms_ssim(x, y) == ms_ssim(y, x));
  }
  CHECK(ms_ssim_scale_count(64, 64) == 3);
  CHECK(ms_ssim_scale_count(176, 200) == 5);
  CHECK(ms_ssim_scale_count(10, 40) == 0);
  CHECK_THROWS(ms_ssim(test::random_gray(8, 8, rng), test::random_gray(8, 8, rng)));
  CHECK_THROWS(ms_ssim(a, test::random_gray(64, 60, rng)));
}

TEST_CASE("ms-ssim agrees with the direct-window oracle") {
  QuietLog q;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const int side = i % 2 ? 45 : 88;
    auto a = test::random_gray(side, side, rng, 0.7), b = test::random_gray(side, side, rng, 0.7);
    CHECK(std::abs(ms_ssim(a, b) - test::oracle_ms_ssim(a, b)) < 1e-4);
  }
  auto taps = gaussian_taps();
  double s = 0;
  for (double t : taps) s += t;
  CHECK(s == doctest::Approx(1.0));
  CHECK(taps[5] > taps[4]);
}

TEST_CASE("diversity score counts every unordered pair") {
  QuietLog q;
  std::mt19937_64 rng(7);
  std::vector<GrayImage> imgs;
  for (int i = 0; i < 12; ++i) imgs.push_back(test::random_gray(24, 24, rng, 0.5));
  std::mt19937_64 s1(8), s2(8);
  auto r = diversity_score(imgs, 10, s1);
  CHECK(r.pair_count == 45);
  CHECK(r.sample_count == 10);
  CHECK(r.scales == 2);  // 24 >= 2 * 11
  CHECK(diversity_score(imgs, 10, s2) == r);
  CHECK(ms_ssim_result_from_json(to_json(r)) == r);
  std::vector<GrayImage> same(5, imgs[0]);
  CHECK(diversity_score(same, 5, s1).mean == 1.0);
  CHECK_THROWS(diversity_score(imgs, 13, s1));
}

TEST_CASE("luminance mapping") {
  data::RgbImage img{1, 1, {255, 255, 255}};
  CHECK(luminance(img).pixels[0] == doctest::Approx(1.0));
  nn::Tensor t({3, 1, 1}, std::vector<float>{-1, -1, -1});
  CHECK(luminance(t).pixels[0] == doctest::Approx(0.0));
}

TEST_CASE("stand-in classifier learns colors and round trips") {
  QuietLog q;
  std::vector<nn::Tensor> imgs;
  std::vector<int> labels;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> noise(-0.2f, 0.2f);
  for (int i = 0; i < 16; ++i) {
    nn::Tensor t({3, 16, 16});
    const int cls = i % 2;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 256; ++k)
        t.data[c * 256 + k] = (c == 0 ? (cls ? -0.6f : 0.6f) : c == 2 ? (cls ? 0.6f : -0.6f) : 0.0f) + noise(rng);
    imgs.push_back(t);
    labels.push_back(cls);
  }
  StandInClassifier cls({16, 2, 4, 1});
  const double acc = cls.train(imgs, labels, {15, 8, 3e-3f, 1});
  CHECK(acc == 1.0);
  auto post = class_posteriors(imgs, cls);
  for (const auto& p : post) CHECK(p[0] + p[1] == doctest::Approx(1.0));

  auto dir = test::scratch_dir("classifier");
  const auto path = (dir / "c.cls").string();
  cls.set_id("stand-in:test");
  cls.save(path);
  auto back = StandInClassifier::load(path);
  CHECK(back.id() == "stand-in:test");
  CHECK(class_posteriors(imgs, back) == post);
  CHECK_THROWS(class_posteriors({nn::Tensor({3, 8, 8})}, back));
}

TEST_CASE("image directory loading") {
  auto dir = test::scratch_dir("imgdir");
  data::write_png((dir / "b_0_16.png").string(), data::RgbImage{16, 16, std::vector<std::uint8_t>(768, 10)});
  data::write_png((dir / "a_0_32.png").string(), data::RgbImage{32, 32, std::vector<std::uint8_t>(3072, 20)});
  data::write_png((dir / "a_0_16.png").string(), data::RgbImage{16, 16, std::vector<std::uint8_t>(768, 30)});
  auto big = load_image_dir(dir.string());
  REQUIRE(big.size() == 1);
  CHECK(big[0].name == "a_0_32");
  auto small = load_image_dir(dir.string(), 16);
  REQUIRE(small.size() == 2);
  CHECK(small[0].name == "a_0_16");
  CHECK(find_image_for_id(dir.string(), "b").value().find("b_0_16.png") != std::string::npos);
  CHECK_FALSE(find_image_for_id(dir.string(), "c"));
  CHECK_THROWS_WITH(load_image_dir((dir / "none").string()), doctest::Contains("none"));
}

TEST_CASE("report assembly, comparison and rendering") {
  InceptionScoreResult is_reg{3.1, 0.2, 2, 10, 2, "stand-in", {2.9, 3.3}};
  InceptionScoreResult is_noreg{3.4, 0.1, 2, 10, 2, "stand-in", {3.3, 3.5}};
  MsSsimResult ms_reg{0.3, 45, 10, 3}, ms_noreg{0.2, 45, 10, 3};
  ranking::VariantRanking hr;
  hr.question_mean = {2.0, 3.0, 4.0};
  hr.overall = 3.0;

  std::vector<nlohmann::json> docs = {
      {{"kind", "inception_score"}, {"version", 1}, {"variant", "REG"}, {"result", to_json(is_reg)}},
      {{"kind", "inception_score"}, {"version", 1}, {"variant", "NOREG"}, {"result", to_json(is_noreg)}},
      {{"kind", "ms_ssim"}, {"version", 1}, {"variant", "REG"}, {"result", to_json(ms_reg)}},
      {{"kind", "ms_ssim"}, {"version", 1}, {"variant", "NOREG"}, {"result", to_json(ms_noreg)}},
  };
  auto rep = report_from_inputs(docs);
  REQUIRE(rep.variants.size() == 2);
  CHECK(rep.variants[0].variant == "REG");
  CHECK(rep.variants[1].variant == "NOREG");
  CHECK(*rep.variants[0].inception == is_reg);

  auto back = report_from_json(to_json(rep));
  CHECK(back.variants.size() == 2);
  CHECK(*back.variants[1].ms_ssim == ms_noreg);
  auto j = to_json(rep);
  j.erase("version");
  CHECK_THROWS(report_from_json(j));

  CHECK(compare(1.0, 2.0, true) == Better::kSecond);
  CHECK(compare(1.0, 2.0, false) == Better::kFirst);
  CHECK(compare(1.0, 1.0, true) == Better::kNone);
  CHECK(compare(std::nullopt, 2.0, true) == Better::kNone);

  const auto text = render_tables(rep, false);
  CHECK(text.find("**3.40 +- 0.10**") != std::string::npos);
  CHECK(text.find("**0.20**") != std::string::npos);
  CHECK(text.find("absent") != std::string::npos);  // no human ranking given
  CHECK(text.find("Reference") == std::string::npos);
  CHECK(render_tables(rep).find("4.42") != std::string::npos);

  CHECK_THROWS(build_report({}));
  VariantMetrics a{"REG", {}, {}, {}, {}}, b{"REG", {}, {}, {}, {}};
  CHECK_THROWS(build_report({a, b}));
  VariantMetrics c{"OTHER", {}, {}, {}, {}};
  CHECK_THROWS(build_report({c}));
}
