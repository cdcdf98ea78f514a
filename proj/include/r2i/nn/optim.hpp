#pragma once

#include <cstdint>
#include <vector>

#include "r2i/nn/layers.hpp"

namespace r2i::nn {

struct AdamOptions {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Adaptive moment estimation over a ParameterSet. The set must outlive the
/// optimizer.
class Adam {
 public:
  Adam(ParameterSet& params, AdamOptions opts);

  void step();
  void zero_grad() { params_->zero_grad(); }

  const AdamOptions& options() const { return opts_; }
  std::int64_t steps() const { return t_; }

  // Moment buffers are exposed for checkpointing.
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParameterSet* params_;
  AdamOptions opts_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace r2i::nn
