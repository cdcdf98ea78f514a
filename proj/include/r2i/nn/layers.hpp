#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "r2i/nn/tensor.hpp"

namespace r2i::nn {

/// Ordered, named collection of trainable leaves. Order is the
/// registration order and defines the on-disk layout of checkpoints.
class ParameterSet {
 public:
  Var& add(std::string name, Tensor init);

  std::size_t size() const { return vars_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Var& operator[](std::size_t i) { return vars_[i]; }
  const Var& operator[](std::size_t i) const { return vars_[i]; }
  /// Throws when the name is unknown.
  Var& at(const std::string& name);

  void zero_grad();
  std::size_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

enum class Init { kUniformFanIn, kNormal002 };

Tensor init_tensor(const Shape& shape, int fan_in, Init scheme, std::mt19937_64& rng);

struct Linear {
  Var weight;  // [in, out]
  Var bias;    // [out]

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, int in, int out, std::mt19937_64& rng,
         Init scheme = Init::kUniformFanIn);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  int in_features() const { return weight.shape()[0]; }
  int out_features() const { return weight.shape()[1]; }
};

struct Conv2d {
  Var weight;  // [out, in, k, k]
  Var bias;    // [out]
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, int in, int out, int kernel, int stride, int pad,
         std::mt19937_64& rng, Init scheme = Init::kUniformFanIn);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
};

struct Embedding {
  Var table;  // [vocab, dim]

  Embedding() = default;
  Embedding(ParameterSet& params, const std::string& name, int vocab, int dim, std::mt19937_64& rng);
  Var operator()(std::span<const int> ids) const { return embedding_lookup(table, ids); }
};

/// Gated recurrent unit cell: h' = (1-u)*n + u*h.
struct GruCell {
  Linear input;   // x -> 3h (reset, update, candidate)
  Linear hidden;  // h -> 3h
  int hidden_size = 0;

  GruCell() = default;
  GruCell(ParameterSet& params, const std::string& name, int in, int hidden, std::mt19937_64& rng);
  Var operator()(const Var& x, const Var& h) const;
};

}  // namespace r2i::nn
