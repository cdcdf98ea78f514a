#include "r2i/nn/optim.hpp"

#include <cmath>

namespace r2i::nn {

Adam::Adam(ParameterSet& params, AdamOptions opts) : params_(&params), opts_(opts) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value().size(), 0.0f);
    v_.emplace_back(params[i].value().size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(opts_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(opts_.beta2), static_cast<double>(t_));
  const float step_size = static_cast<float>(opts_.lr * std::sqrt(bc2) / bc1);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Var& p = (*params_)[i];
    auto g = p.grad();
    if (g.empty()) continue;
    auto& w = p.mutable_value().data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = opts_.beta1 * m[j] + (1.0f - opts_.beta1) * g[j];
      v[j] = opts_.beta2 * v[j] + (1.0f - opts_.beta2) * g[j] * g[j];
      w[j] -= step_size * m[j] / (std::sqrt(v[j]) + opts_.eps);
    }
  }
}

}  // namespace r2i::nn
