#pragma once

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace r2i::eval {

/// p(y|x) for one image.
using Posterior = std::vector<double>;

/// Entries must be finite and >= 0. A sum within `tolerance` of 1 is
/// renormalized; anything further off is an error.
Posterior normalize_posterior(Posterior p, double tolerance = 1e-3);

struct InceptionScoreResult {
  double mean = 0.0;
  double std = 0.0;  // population std over shards
  int splits = 0;
  int num_samples = 0;  // samples actually used (splits * shard size)
  int num_classes = 0;
  std::string classifier;
  std::vector<double> shard_scores;

  bool operator==(const InceptionScoreResult&) const = default;
};

nlohmann::json to_json(const InceptionScoreResult& r);
InceptionScoreResult inception_result_from_json(const nlohmann::json& j);

/// Shuffles with `rng`, cuts floor(N / splits) samples per shard (the
/// remainder is dropped), and scores each shard as exp(mean KL(p || p_shard)).
/// Probabilities are floored at `kl_floor` inside the logs.
InceptionScoreResult inception_score(const std::vector<Posterior>& posteriors, int splits, std::mt19937_64& rng,
                                     double kl_floor = 1e-12);

}  // namespace r2i::eval
