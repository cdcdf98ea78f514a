#include <doctest.h>

#include <cmath>
#include <iostream>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "r2i/gan/losses.hpp"
#include "r2i/gan/networks.hpp"
#include "r2i/gan/trainer.hpp"
#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

using namespace r2i;
using namespace r2i::gan;

namespace {

std::vector<double> uniform_scores(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

GanConfig tiny_config(std::uint64_t seed = 1) {
  GanConfig c;
  c.base_scale = 8;
  c.z_dim = 8;
  c.embedding_dim = 12;
  c.ca_dim = 6;
  c.gen_width = 8;
  c.disc_width = 4;
  c.cond_channels = 4;
  c.seed = seed;
  return c;
}

RealBatch random_batch(const GanConfig& c, int b, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  RealBatch out;
  for (int k = 0; k < 3; ++k) {
    const int s = c.base_scale << k;
    out.images[k] = nn::Tensor({b, 3, s, s});
    for (auto& v : out.images[k].data) v = u(rng);
  }
  std::vector<std::vector<float>> e(b, std::vector<float>(c.embedding_dim));
  std::vector<const std::vector<float>*> ptr;
  for (auto& row : e) {
    for (auto& v : row) v = u(rng);
    ptr.push_back(&row);
  }
  out.conditions = condition_batch(ptr, c.embedding_dim);
  return out;
}

// Flattens/unflattens the five score vectors of every scale.
std::vector<double> pack(const std::vector<DScores>& s) {
  std::vector<double> out;
  for (const auto& x : s)
    for (const auto* v : {&x.uncond_real, &x.uncond_fake, &x.cond_real, &x.cond_fake, &x.cond_wrong})
      out.insert(out.end(), v->begin(), v->end());
  return out;
}

std::vector<DScores> unpack(const std::vector<double>& flat, const std::vector<DScores>& like) {
  auto out = like;
  std::size_t i = 0;
  for (auto& x : out)
    for (auto* v : {&x.uncond_real, &x.uncond_fake, &x.cond_real, &x.cond_fake, &x.cond_wrong})
      for (auto& e : *v) e = flat[i++];
  return out;
}

}  // namespace

TEST_CASE("uninformative scores give 2 ln 2 per pair") {
  const int n = 5;
  std::vector<double> half(n, 0.5);
  auto uncond = discriminator_loss({DScores{half, half, {}, {}, {}}});
  CHECK(uncond.total == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  auto both = discriminator_loss({DScores{half, half, half, half, half}});
  CHECK(both.per_scale[0] == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
  auto g = generator_loss({GScores{half, {}}}, 0.0, GeneratorLossForm::kNonSaturating);
  CHECK(g.total == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("discriminator loss matches the scalar oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DScores> scales;
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) {
      DScores s{uniform_scores(4, rng), uniform_scores(4, rng), uniform_scores(4, rng), uniform_scores(4, rng),
                uniform_scores(4, rng)};
      expect += test::oracle_d_loss_scale(s.uncond_real, s.uncond_fake, s.cond_real, s.cond_fake, s.cond_wrong);
      scales.push_back(s);
    }
    CHECK(std::abs(discriminator_loss(scales).total - expect) < 1e-6);
  }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DScores> ds(3);
    for (auto& s : ds)
      s = {uniform_scores(3, rng), uniform_scores(3, rng), uniform_scores(3, rng), uniform_scores(3, rng),
           uniform_scores(3, rng)};
    auto d = discriminator_loss(ds);
    auto fd = [&](const std::vector<double>& x) { return discriminator_loss(unpack(x, ds)).total; };
    CHECK(test::relative_error(pack(d.grad), test::numeric_gradient(fd, pack(ds))) < 1e-4);

    for (auto form : {GeneratorLossForm::kNonSaturating, GeneratorLossForm::kMinimax}) {
      std::vector<GScores> gs(3);
      for (auto& s : gs) s = {uniform_scores(3, rng), uniform_scores(3, rng)};
      auto g = generator_loss(gs, 0.25, form);
      auto flat = [](const std::vector<GScores>& v) {
        std::vector<double> o;
        for (const auto& s : v) {
          o.insert(o.end(), s.uncond_fake.begin(), s.uncond_fake.end());
          o.insert(o.end(), s.cond_fake.begin(), s.cond_fake.end());
        }
        return o;
      };
      auto fg = [&](const std::vector<double>& x) {
        auto c = gs;
        std::size_t i = 0;
        for (auto& s : c) {
          for (auto& e : s.uncond_fake) e = x[i++];
          for (auto& e : s.cond_fake) e = x[i++];
        }
        return generator_loss(c, 0.25, form).total;
      };
      CHECK(test::relative_error(flat(g.grad), test::numeric_gradient(fg, flat(gs))) < 1e-4);
      CHECK(g.total == doctest::Approx(g.adversarial + 0.25));
    }
  }
}

TEST_CASE("saturated scores stay finite") {
  auto d = discriminator_loss({DScores{{1.0, 0.0}, {0.0, 1.0}, {}, {}, {}}});
  CHECK(std::isfinite(d.total));
  CHECK(d.grad[0].uncond_real[0] == 0.0);
  auto g = generator_loss({GScores{{0.0}, {}}}, 0.0, GeneratorLossForm::kNonSaturating);
  CHECK(std::isfinite(g.total));
}

TEST_CASE("conditioning augmentation KL") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> mu(16), ls(16);
    for (auto& v : mu) v = n(rng);
    for (auto& v : ls) v = 0.5 * n(rng);
    CHECK(std::abs(kl_divergence(mu, ls) - test::oracle_kl(mu, ls)) < 1e-6);
    // d/dmu = mu, d/dls = exp(2 ls) - 1
    std::vector<double> x = mu;
    x.insert(x.end(), ls.begin(), ls.end());
    auto f = [](const std::vector<double>& v) {
      return kl_divergence(std::span(v).first(16), std::span(v).subspan(16));
    };
    std::vector<double> ana = mu;
    for (double l : ls) ana.push_back(std::exp(2 * l) - 1);
    CHECK(test::relative_error(ana, test::numeric_gradient(f, x)) < 1e-4);
  }
  std::vector<double> zero(4, 0.0);
  CHECK(kl_divergence(zero, zero) == 0.0);

  std::vector<double> mu = {1.0, -2.0}, ls = {0.0, std::log(3.0)}, eps = {0.5, -1.0};
  auto s = ca_sample(mu, ls, eps);
  CHECK(s.sample[0] == doctest::Approx(1.5));
  CHECK(s.sample[1] == doctest::Approx(-5.0));
  std::vector<double> bad = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS(ca_sample(bad, ls, eps));
}

TEST_CASE("noise is standard normal") {
  std::mt19937_64 rng(6);
  auto z = sample_noise(1000, 100, rng);
  double m = 0, v = 0;
  for (float x : z) m += x;
  m /= z.size();
  for (float x : z) v += (x - m) * (x - m);
  v /= z.size();
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(validate(c));
  c.base_scale = 12;
  CHECK_THROWS(validate(c));
  c = tiny_config();
  CHECK(gan_config_from_json(to_json(c)) == c);
}

TEST_CASE("network shapes and ranges") {
  auto c = tiny_config();
  GanModel m(c);
  std::mt19937_64 rng(7);
  auto batch = random_batch(c, 3, rng);
  auto z = nn::Tensor({3, c.z_dim}, sample_noise(3, c.z_dim, rng));
  auto eps = nn::Tensor({3, c.ca_dim}, sample_noise(3, c.ca_dim, rng));
  auto imgs = m.generate(z, batch.conditions, eps);
  for (int k = 0; k < 3; ++k) {
    const int s = c.base_scale << k;
    CHECK(imgs[k].shape == nn::Shape{3, 3, s, s});
    for (float v : imgs[k].data) CHECK((v >= -1.0f && v <= 1.0f));
    auto d = m.discriminate(k, imgs[k], nn::Tensor({3, c.ca_dim}));
    for (double p : d.uncond) CHECK_MESSAGE((p > 0.0 && p < 1.0), p);
  }
  CHECK_THROWS(m.discriminators[0].features(nn::Var::constant(imgs[1])));

  std::vector<float> row(c.embedding_dim, 2.0f), zero(c.embedding_dim, 0.0f);
  auto cb = condition_batch({&row}, c.embedding_dim);
  double norm = 0;
  for (float v : cb.data) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(std::sqrt(c.embedding_dim)).epsilon(1e-5));
  CHECK_THROWS(condition_batch({&zero}, c.embedding_dim));
}

TEST_CASE("training steps are finite and reproducible") {
  auto c = tiny_config(9);
  std::mt19937_64 r1(1), r2(1);
  auto b1 = random_batch(c, 4, r1);
  auto b2 = random_batch(c, 4, r2);
  GanState s1(c), s2(c);
  for (int i = 0; i < 5; ++i) {
    auto a = gan_train_step(s1, b1);
    auto b = gan_train_step(s2, b2);
    CHECK(a.all_finite());
    CHECK(a == b);
    CHECK(a.g_total == doctest::Approx(a.g_per_scale[0] + a.g_per_scale[1] + a.g_per_scale[2] + a.kl_term));
  }
  std::mt19937_64 r3(1);
  CHECK_THROWS(gan_train_step(s1, random_batch(c, 1, r3)));

  SUBCASE("non-finite loss aborts before the discriminator update") {
    s1.model.g_params[0].mutable_value().data[0] = std::numeric_limits<float>::quiet_NaN();
    auto before = s1.model.d_params[0].value();
    CHECK_THROWS_AS(gan_train_step(s1, b1), std::runtime_error);
    CHECK(s1.model.d_params[0].value() == before);
  }
}

TEST_CASE("checkpoint resume and bit-identical generation") {
  log::set_stream(nullptr);
  auto dir = test::scratch_dir("gan_ckpt");
  auto c = tiny_config(11);
  std::mt19937_64 rng(2);
  auto batch = random_batch(c, 4, rng);

  GanState straight(c);
  for (int i = 0; i < 4; ++i) gan_train_step(straight, batch);

  GanState first(c);
  for (int i = 0; i < 2; ++i) gan_train_step(first, batch);
  const auto path = (dir / "g.ckpt").string();
  save_gan_checkpoint(first, path);
  auto resumed = load_gan_checkpoint(path);
  CHECK(resumed->step == 2);
  for (int i = 0; i < 2; ++i) gan_train_step(*resumed, batch);
  for (std::size_t i = 0; i < straight.model.g_params.size(); ++i)
    CHECK(resumed->model.g_params[i].value() == straight.model.g_params[i].value());
  for (std::size_t i = 0; i < straight.model.d_params.size(); ++i)
    CHECK(resumed->model.d_params[i].value() == straight.model.d_params[i].value());

  auto loaded = load_gan_checkpoint(path);
  std::mt19937_64 nr(5);
  auto z = nn::Tensor({4, c.z_dim}, sample_noise(4, c.z_dim, nr));
  auto eps = nn::Tensor({4, c.ca_dim}, sample_noise(4, c.ca_dim, nr));
  CHECK(loaded->model.generate(z, batch.conditions, eps) == first.model.generate(z, batch.conditions, eps));

  SUBCASE("corrupted checkpoint is rejected") {
    auto bytes = io::read_file(path);
    bytes[bytes.size() - 20] ^= 1;
    io::write_file_atomic(path, bytes);
    CHECK_THROWS(load_gan_checkpoint(path));
  }
  SUBCASE("generate_for_recipes is seeded and names files") {
    embedding::EmbeddingTable table;
    table.dim = c.embedding_dim;
    std::mt19937_64 er(8);
    std::uniform_real_distribution<float> u(-1, 1);
    for (const char* id : {"a", "b"}) {
      std::vector<float> v(c.embedding_dim);
      for (auto& x : v) x = u(er);
      table.records.push_back({id, v});
    }
    GenerateOptions go;
    go.n_per_recipe = 2;
    go.seed = 3;
    auto g1 = generate_for_recipes(loaded->model, table, go);
    auto g2 = generate_for_recipes(first.model, table, go);
    REQUIRE(g1.size() == 4);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].scales == g2[i].scales);
    CHECK(g1[0].scales != g1[1].scales);
    auto files = write_generated(g1, (dir / "out").string());
    CHECK(files.size() == 12);
    CHECK(files[0].find("a_0_8.png") != std::string::npos);
    go.ids = {"missing"};
    CHECK_THROWS(generate_for_recipes(loaded->model, table, go));
  }
  log::set_stream(&std::cerr);
}
