#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "r2i/eval/inception.hpp"
#include "r2i/nn/layers.hpp"

namespace r2i::eval {

/// Anything that maps [3,S,S] images in [-1,1] to class posteriors.
class PosteriorSource {
 public:
  virtual ~PosteriorSource() = default;
  virtual std::string id() const = 0;
  virtual int image_size() const = 0;
  virtual int num_classes() const = 0;
  virtual std::vector<Posterior> raw_posteriors(const std::vector<nn::Tensor>& images) const = 0;
};

/// Runs the source and normalizes every output (see normalize_posterior).
/// Throws if an image does not match the source's input size.
std::vector<Posterior> class_posteriors(const std::vector<nn::Tensor>& images, const PosteriorSource& source);

struct ClassifierConfig {
  int image_size = 64;
  int num_classes = 2;
  int width = 8;
  std::uint64_t seed = 0;
};

struct ClassifierTrainOptions {
  int epochs = 30;
  int batch_size = 8;
  float lr = 1e-3f;
  std::uint64_t seed = 0;
};

/// Small strided CNN used as a desk-scale posterior source.
class StandInClassifier : public PosteriorSource {
 public:
  explicit StandInClassifier(const ClassifierConfig& config);
  StandInClassifier(const StandInClassifier&) = delete;
  StandInClassifier& operator=(const StandInClassifier&) = delete;
  StandInClassifier(StandInClassifier&&) = default;

  std::string id() const override { return id_; }
  int image_size() const override { return config_.image_size; }
  int num_classes() const override { return config_.num_classes; }
  std::vector<Posterior> raw_posteriors(const std::vector<nn::Tensor>& images) const override;

  /// Softmax cross-entropy with Adam; returns accuracy on the training set
  /// after the last epoch.
  double train(const std::vector<nn::Tensor>& images, const std::vector<int>& labels,
               const ClassifierTrainOptions& options);
  double accuracy(const std::vector<nn::Tensor>& images, const std::vector<int>& labels) const;

  void set_id(std::string id) { id_ = std::move(id); }
  void save(const std::string& path) const;
  static StandInClassifier load(const std::string& path);

 private:
  nn::Var logits(const std::vector<const nn::Tensor*>& images) const;

  ClassifierConfig config_;
  std::string id_ = "stand-in";
  nn::ParameterSet params_;
  std::vector<nn::Conv2d> convs_;
  nn::Linear out_;
};

}  // namespace r2i::eval
