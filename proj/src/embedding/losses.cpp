#include "r2i/embedding/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace r2i::embedding {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_batch(const Batch& a, const Batch& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": batch sizes differ");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != a[0].size() || b[i].size() != a[0].size())
      throw std::invalid_argument(std::string(what) + ": inconsistent vector dimensions");
}

// d cos(a, b) / d a, accumulated with weight w into g.
void add_cos_grad(const std::vector<double>& a, const std::vector<double>& b, double na, double nb, double c, double w,
                  std::vector<double>& g) {
  for (std::size_t k = 0; k < a.size(); ++k) g[k] += w * (b[k] / (na * nb) - c * a[k] / (na * na));
}

}  // namespace

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine of a zero vector is undefined");
  return dot(a, b) / (na * nb);
}

CosineLoss cosine_alignment_loss(const Batch& recipes, const Batch& images, double margin) {
  check_batch(recipes, images, "cosine_alignment_loss");
  const std::size_t n = recipes.size();
  if (n < 2) throw std::invalid_argument("cosine_alignment_loss needs a batch of at least 2");
  std::vector<double> nr(n), nv(n);
  for (std::size_t i = 0; i < n; ++i) {
    nr[i] = std::sqrt(dot(recipes[i], recipes[i]));
    nv[i] = std::sqrt(dot(images[i], images[i]));
    if (nr[i] == 0.0 || nv[i] == 0.0 || !std::isfinite(nr[i]) || !std::isfinite(nv[i]))
      throw std::invalid_argument("cosine_alignment_loss: zero-norm or non-finite embedding at row " + std::to_string(i));
  }
  const std::size_t dim = recipes[0].size();
  CosineLoss out;
  out.grad_recipe.assign(n, std::vector<double>(dim, 0.0));
  out.grad_image.assign(n, std::vector<double>(dim, 0.0));
  const double wpos = 1.0 / static_cast<double>(n);
  const double wneg = 1.0 / static_cast<double>(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double c = dot(recipes[i], images[j]) / (nr[i] * nv[j]);
      if (i == j) {
        out.positive += wpos * (1.0 - c);
        add_cos_grad(recipes[i], images[j], nr[i], nv[j], c, -wpos, out.grad_recipe[i]);
        add_cos_grad(images[j], recipes[i], nv[j], nr[i], c, -wpos, out.grad_image[j]);
      } else if (c - margin > 0.0) {
        out.negative += wneg * (c - margin);
        add_cos_grad(recipes[i], images[j], nr[i], nv[j], c, wneg, out.grad_recipe[i]);
        add_cos_grad(images[j], recipes[i], nv[j], nr[i], c, wneg, out.grad_image[j]);
      }
    }
  }
  out.value = out.positive + out.negative;
  return out;
}

CrossEntropy softmax_cross_entropy(const Batch& logits, const std::vector<int>& labels) {
  if (logits.empty() || logits.size() != labels.size())
    throw std::invalid_argument("softmax_cross_entropy: logits/labels size mismatch");
  const std::size_t n = logits.size();
  const std::size_t c = logits[0].size();
  CrossEntropy out;
  out.grad_logits.assign(n, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (logits[i].size() != c) throw std::invalid_argument("softmax_cross_entropy: ragged logits");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    double mx = *std::max_element(logits[i].begin(), logits[i].end());
    double z = 0.0;
    for (double l : logits[i]) z += std::exp(l - mx);
    double lse = mx + std::log(z);
    out.value += (lse - logits[i][labels[i]]) / static_cast<double>(n);
    std::size_t arg = std::max_element(logits[i].begin(), logits[i].end()) - logits[i].begin();
    if (static_cast<int>(arg) == labels[i]) ++out.correct;
    for (std::size_t k = 0; k < c; ++k) {
      double p = std::exp(logits[i][k] - lse);
      out.grad_logits[i][k] = (p - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  return out;
}

SemanticLoss semantic_reg_loss(const Batch& recipes, const Batch& images, const std::vector<int>& labels,
                               const Batch& weight, const std::vector<double>& bias) {
  check_batch(recipes, images, "semantic_reg_loss");
  if (recipes.empty()) throw std::invalid_argument("semantic_reg_loss: empty batch");
  const std::size_t dim = recipes[0].size();
  if (weight.size() != dim) throw std::invalid_argument("semantic_reg_loss: head input dimension mismatch");
  const std::size_t classes = bias.size();
  auto project = [&](const Batch& x) {
    Batch logits(x.size(), bias);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        for (std::size_t k = 0; k < classes; ++k) logits[i][k] += x[i][d] * weight[d][k];
    return logits;
  };
  auto back = [&](const Batch& g_logits) {
    Batch g(g_logits.size(), std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        for (std::size_t k = 0; k < classes; ++k) g[i][d] += 0.5 * g_logits[i][k] * weight[d][k];
    return g;
  };
  CrossEntropy cr = softmax_cross_entropy(project(recipes), labels);
  CrossEntropy ci = softmax_cross_entropy(project(images), labels);
  SemanticLoss out;
  out.recipe_ce = cr.value;
  out.image_ce = ci.value;
  out.value = 0.5 * (cr.value + ci.value);
  out.grad_recipe = back(cr.grad_logits);
  out.grad_image = back(ci.grad_logits);
  return out;
}

}  // namespace r2i::embedding
