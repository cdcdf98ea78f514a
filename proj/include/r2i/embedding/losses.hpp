#pragma once

#include <vector>

namespace r2i::embedding {

/// Row-major batch of vectors in double precision.
using Batch = std::vector<std::vector<double>>;

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct CosineLoss {
  double value = 0.0;
  double positive = 0.0;  // mean_i (1 - cos(r_i, v_i))
  double negative = 0.0;  // mean_{i != j} max(0, cos(r_i, v_j) - margin)
  Batch grad_recipe;
  Batch grad_image;
};

/// Matched pairs are pulled together; every in-batch mismatched pair (i, j != i)
/// is pushed below `margin`. Requires B >= 2 and non-zero vectors.
CosineLoss cosine_alignment_loss(const Batch& recipes, const Batch& images, double margin);

struct CrossEntropy {
  double value = 0.0;
  Batch grad_logits;
  int correct = 0;  // argmax hits
};

/// Mean softmax cross-entropy over rows.
CrossEntropy softmax_cross_entropy(const Batch& logits, const std::vector<int>& labels);

struct SemanticLoss {
  double value = 0.0;
  double recipe_ce = 0.0;
  double image_ce = 0.0;
  Batch grad_recipe;
  Batch grad_image;
};

/// Linear classifier head logits = x W + b applied to both modalities;
/// value = (CE(recipes) + CE(images)) / 2. `weight` is [dim][classes].
SemanticLoss semantic_reg_loss(const Batch& recipes, const Batch& images, const std::vector<int>& labels,
                               const Batch& weight, const std::vector<double>& bias);

}  // namespace r2i::embedding
