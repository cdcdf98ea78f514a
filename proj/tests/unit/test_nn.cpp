#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "r2i/nn/checkpoint.hpp"
#include "r2i/nn/layers.hpp"
#include "r2i/nn/optim.hpp"
#include "r2i/util/binary_io.hpp"

using namespace r2i;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(nn::Shape s, std::mt19937_64& rng, float scale = 1.0f) {
  std::normal_distribution<float> n(0.0f, scale);
  Tensor t(s);
  for (auto& v : t.data) v = n(rng);
  return t;
}

// Checks d/dx sum(r * f(x)) for every input of `f` in float with a loose bound.
void check_op(const std::vector<Tensor>& inputs, const std::function<Var(const std::vector<Var>&)>& f,
              double tol = 2e-2) {
  std::mt19937_64 rng(99);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(Var::parameter(t));
  Var out = f(vars);
  std::vector<float> r(out.value().size());
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& v : r) v = n(rng);
  nn::backward({{out, r}});

  auto objective = [&](std::size_t which, const std::vector<double>& x) {
    nn::NoGradGuard ng;
    std::vector<Var> vs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tensor t = inputs[i];
      if (i == which)
        for (std::size_t k = 0; k < t.size(); ++k) t.data[k] = static_cast<float>(x[k]);
      vs.push_back(Var::constant(t));
    }
    Var o = f(vs);
    double s = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) s += static_cast<double>(r[k]) * o.value().data[k];
    return s;
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> x(inputs[i].data.begin(), inputs[i].data.end());
    auto num = test::numeric_gradient([&](const std::vector<double>& v) { return objective(i, v); }, x, 1e-2);
    std::vector<double> ana(vars[i].grad().begin(), vars[i].grad().end());
    CHECK(test::relative_error(ana, num) < tol);
  }
}

}  // namespace

TEST_CASE("elementwise ops backprop") {
  std::mt19937_64 rng(1);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  check_op({a, b}, [](const auto& v) { return nn::mul(nn::add(v[0], v[1]), nn::sub(v[0], v[1])); });
  check_op({a}, [](const auto& v) { return nn::tanh(nn::affine(v[0], 0.5f, 0.1f)); });
  check_op({a}, [](const auto& v) { return nn::sigmoid(nn::exp(nn::affine(v[0], 0.3f, 0.0f))); });
  check_op({a}, [](const auto& v) { return nn::leaky_relu(v[0]); });
}

TEST_CASE("matmul, linear, slicing and concat backprop") {
  std::mt19937_64 rng(2);
  auto x = random_tensor({4, 5}, rng), w = random_tensor({5, 3}, rng), b = random_tensor({3}, rng);
  check_op({x, w}, [](const auto& v) { return nn::matmul(v[0], v[1]); });
  check_op({x, w, b}, [](const auto& v) { return nn::linear(v[0], v[1], v[2]); });
  check_op({x, x}, [](const auto& v) { return nn::concat({v[0], nn::slice_cols(v[1], 1, 3)}); });
  const std::vector<int> rows = {2, 0, 2};
  check_op({x}, [&](const auto& v) { return nn::gather_rows(v[0], rows); });
}

TEST_CASE("convolution, pooling and upsampling backprop") {
  std::mt19937_64 rng(3);
  auto x = random_tensor({2, 3, 6, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng, 0.3f), b = random_tensor({4}, rng);
  check_op({x, w, b}, [](const auto& v) { return nn::conv2d(v[0], v[1], v[2], 1, 1); });
  check_op({x, w, b}, [](const auto& v) { return nn::conv2d(v[0], v[1], v[2], 2, 1); });
  check_op({x}, [](const auto& v) { return nn::avg_pool2x(nn::upsample_nearest2x(v[0])); });
  auto c = random_tensor({2, 3}, rng);
  check_op({c}, [](const auto& v) { return nn::broadcast_spatial(v[0], 2, 3); });
}

TEST_CASE("conv2d matches a direct loop") {
  std::mt19937_64 rng(4);
  auto x = random_tensor({1, 2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  auto y = nn::conv2d(Var::constant(x), Var::constant(w), Var::constant(b), 2, 1).value();
  REQUIRE(y.shape == nn::Shape{1, 3, 3, 3});
  for (int o = 0; o < 3; ++o)
    for (int oy = 0; oy < 3; ++oy)
      for (int ox = 0; ox < 3; ++ox) {
        double s = b.data[o];
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || ix < 0 || iy >= 5 || ix >= 5) continue;
              s += x.data[(c * 5 + iy) * 5 + ix] * w.data[((o * 2 + c) * 3 + ky) * 3 + kx];
            }
        CHECK(y.data[(o * 3 + oy) * 3 + ox] == doctest::Approx(s).epsilon(1e-5));
      }
}

TEST_CASE("gru cell backprop") {
  std::mt19937_64 rng(5);
  nn::ParameterSet ps;
  nn::GruCell cell(ps, "gru", 4, 3, rng);
  auto x = random_tensor({2, 4}, rng), h = random_tensor({2, 3}, rng);
  check_op({x, h}, [&](const auto& v) { return cell(v[0], v[1]); });
}

TEST_CASE("gradients accumulate from several seeds") {
  Var p = Var::parameter(Tensor({2}, std::vector<float>{1.0f, 2.0f}));
  Var y = nn::affine(p, 3.0f, 0.0f);
  nn::backward({{y, {1.0f, 1.0f}}, {p, {0.5f, 0.5f}}});
  CHECK(p.grad()[0] == doctest::Approx(3.5));
  CHECK(p.grad()[1] == doctest::Approx(3.5));
}

TEST_CASE("no-grad guard records nothing") {
  Var p = Var::parameter(Tensor({1}, 1.0f));
  nn::NoGradGuard g;
  Var y = nn::exp(p);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
  nn::ParameterSet ps;
  auto& w = ps.add("w", Tensor({3}, std::vector<float>{1.0f, -1.0f, 0.5f}));
  nn::Adam opt(ps, {0.1f, 0.9f, 0.999f, 1e-8f});
  nn::backward({{w, {2.0f, -3.0f, 0.0f}}});
  opt.step();
  CHECK(w.value().data[0] == doctest::Approx(0.9f));
  CHECK(w.value().data[1] == doctest::Approx(-0.9f));
  CHECK(w.value().data[2] == doctest::Approx(0.5f));
  CHECK(opt.steps() == 1);
}

TEST_CASE("checkpoint round trip") {
  auto dir = test::scratch_dir("ckpt");
  std::mt19937_64 rng(6);
  nn::ParameterSet ps;
  nn::Linear lin(ps, "lin", 4, 3, rng);
  nn::Adam opt(ps, {});
  nn::backward({{lin.weight, std::vector<float>(12, 1.0f)}});
  opt.step();

  nn::Checkpoint ck;
  ck.meta = {{"kind", "test"}, {"step", 7}};
  nn::store_parameters(ck, "P/", ps);
  nn::store_optimizer(ck, "O/", ps, opt);
  const auto path = (dir / "a.ckpt").string();
  nn::write_checkpoint(path, ck);

  auto back = nn::read_checkpoint(path);
  CHECK(back.meta == ck.meta);
  std::mt19937_64 rng2(123);
  nn::ParameterSet ps2;
  nn::Linear lin2(ps2, "lin", 4, 3, rng2);
  nn::Adam opt2(ps2, {});
  nn::load_parameters(back, "P/", ps2);
  nn::load_optimizer(back, "O/", ps2, opt2);
  CHECK(lin2.weight.value() == lin.weight.value());
  CHECK(lin2.bias.value() == lin.bias.value());
  CHECK(opt2.steps() == 1);
  CHECK(opt2.first_moments() == opt.first_moments());
  CHECK(opt2.second_moments() == opt.second_moments());

  SUBCASE("shape mismatch is rejected") {
    nn::ParameterSet ps3;
    nn::Linear lin3(ps3, "lin", 5, 3, rng2);
    CHECK_THROWS(nn::load_parameters(back, "P/", ps3));
  }
  SUBCASE("flipped byte is detected") {
    auto bytes = io::read_file(path);
    bytes[bytes.size() / 2] ^= 0x5a;
    io::write_file_atomic(path, bytes);
    CHECK_THROWS_WITH(nn::read_checkpoint(path), doctest::Contains("corrupt"));
  }
  SUBCASE("truncation is detected") {
    auto bytes = io::read_file(path);
    bytes.resize(bytes.size() - 9);
    io::write_file_atomic(path, bytes);
    CHECK_THROWS(nn::read_checkpoint(path));
  }
  SUBCASE("future version names both versions") {
    auto bytes = io::read_file(path);
    bytes[8] = 9;
    io::write_file_atomic(path, bytes);
    CHECK_THROWS_WITH(nn::read_checkpoint(path), doctest::Contains("version 9"));
  }
  SUBCASE("missing file names the path") {
    CHECK_THROWS_WITH(nn::read_checkpoint((dir / "none.ckpt").string()), doctest::Contains("none.ckpt"));
  }
}
