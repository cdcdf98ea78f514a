#include "r2i/eval/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "r2i/embedding/losses.hpp"
#include "r2i/nn/checkpoint.hpp"
#include "r2i/nn/optim.hpp"

namespace r2i::eval {

using nn::Var;

std::vector<Posterior> class_posteriors(const std::vector<nn::Tensor>& images, const PosteriorSource& source) {
  const int s = source.image_size();
  for (const auto& im : images)
    if (im.shape != nn::Shape{3, s, s})
      throw std::invalid_argument("classifier " + source.id() + " expects [3," + std::to_string(s) + "," +
                                  std::to_string(s) + "] images, got " + nn::shape_str(im.shape));
  auto raw = source.raw_posteriors(images);
  for (auto& p : raw) {
    if (static_cast<int>(p.size()) != source.num_classes())
      throw std::runtime_error("classifier returned " + std::to_string(p.size()) + " classes");
    p = normalize_posterior(std::move(p));
  }
  return raw;
}

StandInClassifier::StandInClassifier(const ClassifierConfig& config) : config_(config) {
  const int s = config.image_size;
  if (s < 8 || (s & (s - 1)) != 0) throw std::invalid_argument("classifier image size must be a power of two >= 8");
  if (config.num_classes < 2) throw std::invalid_argument("classifier needs >= 2 classes");
  std::mt19937_64 rng(config.seed ^ 0xbb67ae8584caa73bull);
  int in = 3, out = config.width, side = s;
  for (int i = 0; side > 4; ++i, side /= 2) {
    convs_.emplace_back(params_, "cls.conv" + std::to_string(i), in, out, 4, 2, 1, rng);
    in = out;
    out = std::min(out * 2, config.width * 8);
  }
  out_ = nn::Linear(params_, "cls.out", in * 16, config.num_classes, rng);
}

Var StandInClassifier::logits(const std::vector<const nn::Tensor*>& images) const {
  const int s = config_.image_size;
  const std::size_t plane = 3 * static_cast<std::size_t>(s) * s;
  nn::Tensor x({static_cast<int>(images.size()), 3, s, s});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape != nn::Shape{3, s, s})
      throw std::invalid_argument("classifier input has shape " + nn::shape_str(images[i]->shape));
    std::copy(images[i]->data.begin(), images[i]->data.end(), x.data.begin() + i * plane);
  }
  Var h = Var::constant(std::move(x));
  for (const auto& c : convs_) h = nn::leaky_relu(c(h), 0.2f);
  h = nn::reshape(h, {static_cast<int>(images.size()), static_cast<int>(h.value().size() / images.size())});
  return out_(h);
}

std::vector<Posterior> StandInClassifier::raw_posteriors(const std::vector<nn::Tensor>& images) const {
  nn::NoGradGuard guard;
  std::vector<Posterior> out;
  const int c = config_.num_classes;
  for (const auto& im : images) {
    Var l = logits({&im});
    const auto d = l.data();
    const double mx = *std::max_element(d.begin(), d.end());
    Posterior p(c);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) sum += p[k] = std::exp(d[k] - mx);
    for (auto& v : p) v /= sum;
    out.push_back(std::move(p));
  }
  return out;
}

double StandInClassifier::train(const std::vector<nn::Tensor>& images, const std::vector<int>& labels,
                                const ClassifierTrainOptions& options) {
  if (images.size() != labels.size() || images.empty())
    throw std::invalid_argument("classifier training needs one label per image");
  for (int l : labels)
    if (l < 0 || l >= config_.num_classes) throw std::invalid_argument("label " + std::to_string(l) + " out of range");
  nn::Adam opt(params_, {options.lr, 0.9f, 0.999f, 1e-8f});
  std::mt19937_64 rng(options.seed);
  const std::size_t n = images.size();
  const std::size_t batch = std::min<std::size_t>(std::max(options.batch_size, 1), n);
  std::vector<std::size_t> order(n);
  for (int e = 0; e < options.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      std::vector<const nn::Tensor*> xs;
      std::vector<int> ys;
      for (std::size_t j = start; j < start + batch; ++j) {
        xs.push_back(&images[order[j]]);
        ys.push_back(labels[order[j]]);
      }
      opt.zero_grad();
      Var l = logits(xs);
      embedding::Batch lb(batch, std::vector<double>(config_.num_classes));
      for (std::size_t i = 0; i < batch; ++i)
        for (int k = 0; k < config_.num_classes; ++k) lb[i][k] = l.value().data[i * config_.num_classes + k];
      auto ce = embedding::softmax_cross_entropy(lb, ys);
      if (!std::isfinite(ce.value)) throw std::runtime_error("non-finite classifier loss at epoch " + std::to_string(e));
      std::vector<float> g;
      for (const auto& row : ce.grad_logits)
        for (double v : row) g.push_back(static_cast<float>(v));
      nn::backward({{l, g}});
      opt.step();
    }
  }
  return accuracy(images, labels);
}

double StandInClassifier::accuracy(const std::vector<nn::Tensor>& images, const std::vector<int>& labels) const {
  auto post = raw_posteriors(images);
  int correct = 0;
  for (std::size_t i = 0; i < post.size(); ++i)
    correct += static_cast<int>(std::max_element(post[i].begin(), post[i].end()) - post[i].begin()) == labels[i];
  return post.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(post.size());
}

void StandInClassifier::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", "classifier"},
               {"id", id_},
               {"image_size", config_.image_size},
               {"num_classes", config_.num_classes},
               {"width", config_.width},
               {"seed", config_.seed}};
  nn::store_parameters(ckpt, "cls/", params_);
  nn::write_checkpoint(path, ckpt);
}

StandInClassifier StandInClassifier::load(const std::string& path) {
  auto ckpt = nn::read_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "classifier")
    throw std::runtime_error(path + ": not a classifier checkpoint");
  ClassifierConfig c;
  c.image_size = ckpt.meta.at("image_size").get<int>();
  c.num_classes = ckpt.meta.at("num_classes").get<int>();
  c.width = ckpt.meta.at("width").get<int>();
  c.seed = ckpt.meta.at("seed").get<std::uint64_t>();
  StandInClassifier cls(c);
  nn::load_parameters(ckpt, "cls/", cls.params_);
  cls.id_ = ckpt.meta.value("id", "stand-in");
  return cls;
}

}  // namespace r2i::eval
