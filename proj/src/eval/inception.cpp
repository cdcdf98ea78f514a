#include "r2i/eval/inception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace r2i::eval {

Posterior normalize_posterior(Posterior p, double tolerance) {
  if (p.empty()) throw std::invalid_argument("empty class posterior");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("class posterior has entry " + std::to_string(v));
    sum += v;
  }
  if (std::abs(sum - 1.0) > tolerance)
    throw std::invalid_argument("class posterior sums to " + std::to_string(sum) + ", not 1");
  if (sum != 1.0)
    for (double& v : p) v /= sum;
  return p;
}

nlohmann::json to_json(const InceptionScoreResult& r) {
  return {{"mean", r.mean},
          {"std", r.std},
          {"splits", r.splits},
          {"num_samples", r.num_samples},
          {"num_classes", r.num_classes},
          {"classifier", r.classifier},
          {"shard_scores", r.shard_scores}};
}

InceptionScoreResult inception_result_from_json(const nlohmann::json& j) {
  InceptionScoreResult r;
  r.mean = j.at("mean").get<double>();
  r.std = j.at("std").get<double>();
  r.splits = j.at("splits").get<int>();
  r.num_samples = j.value("num_samples", 0);
  r.num_classes = j.value("num_classes", 0);
  r.classifier = j.value("classifier", "");
  r.shard_scores = j.value("shard_scores", std::vector<double>{});
  return r;
}

InceptionScoreResult inception_score(const std::vector<Posterior>& posteriors, int splits, std::mt19937_64& rng,
                                     double kl_floor) {
  if (splits < 1) throw std::invalid_argument("splits must be >= 1");
  const std::size_t n = posteriors.size();
  if (n < static_cast<std::size_t>(splits))
    throw std::invalid_argument("inception score needs at least " + std::to_string(splits) + " samples, got " +
                                std::to_string(n));
  const std::size_t classes = posteriors.front().size();
  for (const auto& p : posteriors)
    if (p.size() != classes) throw std::invalid_argument("posteriors have differing class counts");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t shard = n / splits;

  InceptionScoreResult r;
  r.splits = splits;
  r.num_samples = static_cast<int>(shard * splits);
  r.num_classes = static_cast<int>(classes);
  for (int s = 0; s < splits; ++s) {
    // Extended precision keeps the marginal of identical rows exactly equal to the row.
    std::vector<long double> acc(classes, 0.0L);
    for (std::size_t i = s * shard; i < (s + 1) * shard; ++i)
      for (std::size_t c = 0; c < classes; ++c) acc[c] += posteriors[order[i]][c];
    std::vector<double> log_marginal(classes);
    for (std::size_t c = 0; c < classes; ++c)
      log_marginal[c] = std::log(std::max(static_cast<double>(acc[c] / static_cast<long double>(shard)), kl_floor));
    double kl_sum = 0.0;
    for (std::size_t i = s * shard; i < (s + 1) * shard; ++i) {
      const auto& p = posteriors[order[i]];
      double kl = 0.0;
      for (std::size_t c = 0; c < classes; ++c)
        if (p[c] > 0.0) kl += p[c] * (std::log(std::max(p[c], kl_floor)) - log_marginal[c]);
      kl_sum += kl;
    }
    r.shard_scores.push_back(std::exp(kl_sum / static_cast<double>(shard)));
  }
  r.mean = std::accumulate(r.shard_scores.begin(), r.shard_scores.end(), 0.0) / splits;
  double var = 0.0;
  for (double v : r.shard_scores) var += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(var / splits);
  return r;
}

}  // namespace r2i::eval
