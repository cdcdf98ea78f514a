#include "r2i/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace r2i::nn {

Var& ParameterSet::add(std::string name, Tensor init) {
  for (const auto& n : names_)
    if (n == name) throw std::invalid_argument("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  vars_.push_back(Var::parameter(std::move(init)));
  return vars_.back();
}

Var& ParameterSet::at(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return vars_[i];
  throw std::out_of_range("unknown parameter: " + name);
}

void ParameterSet::zero_grad() {
  for (auto& v : vars_) v.zero_grad();
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& v : vars_) n += v.value().size();
  return n;
}

Tensor init_tensor(const Shape& shape, int fan_in, Init scheme, std::mt19937_64& rng) {
  Tensor t(shape);
  if (scheme == Init::kNormal002) {
    std::normal_distribution<float> dist(0.0f, 0.02f);
    for (auto& v : t.data) v = dist(rng);
  } else {
    const float bound = 1.0f / std::sqrt(static_cast<float>(std::max(fan_in, 1)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (auto& v : t.data) v = dist(rng);
  }
  return t;
}

Linear::Linear(ParameterSet& params, const std::string& name, int in, int out, std::mt19937_64& rng,
               Init scheme) {
  weight = params.add(name + ".weight", init_tensor({in, out}, in, scheme, rng));
  bias = params.add(name + ".bias", Tensor({out}));
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, int in, int out, int kernel, int stride_,
               int pad_, std::mt19937_64& rng, Init scheme)
    : stride(stride_), pad(pad_) {
  weight = params.add(name + ".weight", init_tensor({out, in, kernel, kernel}, in * kernel * kernel, scheme, rng));
  bias = params.add(name + ".bias", Tensor({out}));
}

Embedding::Embedding(ParameterSet& params, const std::string& name, int vocab, int dim, std::mt19937_64& rng) {
  Tensor t({vocab, dim});
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : t.data) v = dist(rng);
  table = params.add(name + ".table", std::move(t));
}

GruCell::GruCell(ParameterSet& params, const std::string& name, int in, int hidden_, std::mt19937_64& rng)
    : input(params, name + ".input", in, 3 * hidden_, rng),
      hidden(params, name + ".hidden", hidden_, 3 * hidden_, rng),
      hidden_size(hidden_) {}

Var GruCell::operator()(const Var& x, const Var& h) const {
  const int hs = hidden_size;
  Var gx = input(x);
  Var gh = hidden(h);
  Var r = sigmoid(add(slice_cols(gx, 0, hs), slice_cols(gh, 0, hs)));
  Var u = sigmoid(add(slice_cols(gx, hs, hs), slice_cols(gh, hs, hs)));
  Var n = tanh(add(slice_cols(gx, 2 * hs, hs), mul(r, slice_cols(gh, 2 * hs, hs))));
  return add(mul(affine(u, -1.0f, 1.0f), n), mul(u, h));
}

}  // namespace r2i::nn
