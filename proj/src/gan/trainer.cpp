#include "r2i/gan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "r2i/nn/checkpoint.hpp"
#include "r2i/util/log.hpp"

namespace r2i::gan {

using nn::Var;
namespace fs = std::filesystem;

bool GanLossReport::all_finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(d_per_scale.begin(), d_per_scale.end(), ok) &&
         std::all_of(g_per_scale.begin(), g_per_scale.end(), ok) && ok(kl) && ok(kl_term) && ok(g_total) &&
         ok(d_total);
}

nlohmann::json GanLossReport::to_json() const {
  return {{"step", step},       {"d_per_scale", d_per_scale}, {"g_per_scale", g_per_scale}, {"kl", kl},
          {"kl_term", kl_term}, {"g_total", g_total},         {"d_total", d_total}};
}

GanState::GanState(const GanConfig& config)
    : model(config),
      g_opt(model.g_params, {config.lr, config.beta1, config.beta2, 1e-8f}),
      d_opt(model.d_params, {config.lr, config.beta1, config.beta2, 1e-8f}),
      rng(config.seed) {}

namespace {

std::vector<double> probabilities(const Var& logits) {
  std::vector<double> p;
  for (float v : logits.data()) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite discriminator logit");
    p.push_back(sigmoid(v));
  }
  return p;
}

// dL/dlogit = dL/dp * p (1 - p)
std::vector<float> logit_grad(const std::vector<double>& p, const std::vector<double>& gp) {
  std::vector<float> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = static_cast<float>(gp[i] * p[i] * (1.0 - p[i]));
  return g;
}

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

void require_finite_loss(double v, const char* what, std::int64_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite ") + what + " loss at step " + std::to_string(step));
}

}  // namespace

GanLossReport gan_train_step(GanState& state, const RealBatch& batch) {
  GanModel& m = state.model;
  const GanConfig& cfg = m.config;
  if (batch.conditions.rank() != 2) throw std::invalid_argument("conditions must be [B, embedding_dim]");
  const int b = batch.conditions.dim(0);
  if (b < 2) throw std::invalid_argument("GAN batches need at least 2 samples for mismatched pairs");
  for (int k = 0; k < 3; ++k) {
    const int side = cfg.base_scale << k;
    if (batch.images[k].shape != nn::Shape{b, 3, side, side})
      throw std::invalid_argument("real images at scale " + std::to_string(k) + " have shape " +
                                  nn::shape_str(batch.images[k].shape) + ", expected [" + std::to_string(b) +
                                  ", 3, " + std::to_string(side) + ", " + std::to_string(side) + "]");
  }

  GanLossReport report;
  report.step = state.step;
  Var z = Var::constant(nn::Tensor({b, cfg.z_dim}, sample_noise(b, cfg.z_dim, state.rng)));
  Var eps = Var::constant(nn::Tensor({b, cfg.ca_dim}, sample_noise(b, cfg.ca_dim, state.rng)));

  m.g_params.zero_grad();
  m.d_params.zero_grad();
  auto gout = m.generator.forward(z, Var::constant(batch.conditions), eps);

  const auto mu = to_double(gout.mu.data());
  const auto ls = to_double(gout.log_sigma.data());
  const std::size_t ca = static_cast<std::size_t>(cfg.ca_dim);
  double kl_sum = 0.0;
  for (int i = 0; i < b; ++i)
    kl_sum += kl_divergence(std::span(mu).subspan(i * ca, ca), std::span(ls).subspan(i * ca, ca));
  report.kl = kl_sum / b;
  const double kl_scale = cfg.lambda_kl / static_cast<double>(mu.size());
  report.kl_term = kl_scale * kl_sum;

  // Discriminator update on detached fakes; the mismatched condition pairs
  // each real image with the next sample's mu.
  std::vector<int> rolled(b);
  for (int i = 0; i < b; ++i) rolled[i] = (i + 1) % b;
  Var mu_d = nn::detach(gout.mu);
  Var mu_wrong = nn::gather_rows(mu_d, rolled);
  std::vector<DScores> d_scores(3);
  std::vector<std::array<Var, 5>> d_logits(3);
  for (int k = 0; k < 3; ++k) {
    const auto& d = m.discriminators[k];
    Var fr = d.features(Var::constant(batch.images[k]));
    Var ff = d.features(nn::detach(gout.images[k]));
    d_logits[k] = {d.uncond_logit(fr), d.uncond_logit(ff), d.cond_logit(fr, mu_d), d.cond_logit(ff, mu_d),
                   d.cond_logit(fr, mu_wrong)};
    d_scores[k] = {probabilities(d_logits[k][0]), probabilities(d_logits[k][1]), probabilities(d_logits[k][2]),
                   probabilities(d_logits[k][3]), probabilities(d_logits[k][4])};
  }
  DLoss dl = discriminator_loss(d_scores, cfg.score_eps);
  for (int k = 0; k < 3; ++k) report.d_per_scale[k] = dl.per_scale[k];
  report.d_total = dl.total;
  require_finite_loss(report.d_total, "discriminator", state.step);
  require_finite_loss(report.kl, "KL", state.step);
  {
    std::vector<std::pair<Var, std::vector<float>>> seeds;
    for (int k = 0; k < 3; ++k) {
      const auto& s = d_scores[k];
      const auto& g = dl.grad[k];
      seeds.emplace_back(d_logits[k][0], logit_grad(s.uncond_real, g.uncond_real));
      seeds.emplace_back(d_logits[k][1], logit_grad(s.uncond_fake, g.uncond_fake));
      seeds.emplace_back(d_logits[k][2], logit_grad(s.cond_real, g.cond_real));
      seeds.emplace_back(d_logits[k][3], logit_grad(s.cond_fake, g.cond_fake));
      seeds.emplace_back(d_logits[k][4], logit_grad(s.cond_wrong, g.cond_wrong));
    }
    nn::backward(seeds);
    state.d_opt.step();
  }

  // Generator update against the freshly updated discriminators.
  m.d_params.zero_grad();
  std::vector<GScores> g_scores(3);
  std::vector<std::array<Var, 2>> g_logits(3);
  for (int k = 0; k < 3; ++k) {
    const auto& d = m.discriminators[k];
    Var ff = d.features(gout.images[k]);
    g_logits[k] = {d.uncond_logit(ff), d.cond_logit(ff, gout.mu)};
    g_scores[k] = {probabilities(g_logits[k][0]), probabilities(g_logits[k][1])};
  }
  GLoss gl = generator_loss(g_scores, report.kl_term, cfg.g_loss, cfg.score_eps);
  for (int k = 0; k < 3; ++k) report.g_per_scale[k] = gl.per_scale[k];
  report.g_total = gl.total;
  require_finite_loss(report.g_total, "generator", state.step);
  {
    std::vector<std::pair<Var, std::vector<float>>> seeds;
    for (int k = 0; k < 3; ++k) {
      seeds.emplace_back(g_logits[k][0], logit_grad(g_scores[k].uncond_fake, gl.grad[k].uncond_fake));
      seeds.emplace_back(g_logits[k][1], logit_grad(g_scores[k].cond_fake, gl.grad[k].cond_fake));
    }
    std::vector<float> gmu(mu.size()), gls(ls.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      gmu[i] = static_cast<float>(kl_scale * mu[i]);
      gls[i] = static_cast<float>(kl_scale * (std::exp(2.0 * ls[i]) - 1.0));
    }
    seeds.emplace_back(gout.mu, std::move(gmu));
    seeds.emplace_back(gout.log_sigma, std::move(gls));
    nn::backward(seeds);
    state.g_opt.step();
  }
  m.d_params.zero_grad();
  ++state.step;
  return report;
}

void save_gan_checkpoint(const GanState& state, const std::string& path, const nlohmann::json& extra_meta) {
  nn::Checkpoint ckpt;
  std::ostringstream rng;
  rng << state.rng;
  ckpt.meta = {{"kind", "gan"},
               {"config", to_json(state.model.config)},
               {"step", state.step},
               {"seed", state.model.config.seed},
               {"rng", rng.str()}};
  if (extra_meta.is_object())
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) ckpt.meta["extra"][it.key()] = it.value();
  nn::store_parameters(ckpt, "G/", state.model.g_params);
  nn::store_parameters(ckpt, "D/", state.model.d_params);
  nn::store_optimizer(ckpt, "optG/", state.model.g_params, state.g_opt);
  nn::store_optimizer(ckpt, "optD/", state.model.d_params, state.d_opt);
  nn::write_checkpoint(path, ckpt);
}

std::unique_ptr<GanState> load_gan_checkpoint(const std::string& path) {
  nn::Checkpoint ckpt = nn::read_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "gan")
    throw std::runtime_error(path + ": not a GAN checkpoint (kind=" + ckpt.meta.value("kind", "?") + ")");
  auto state = std::make_unique<GanState>(gan_config_from_json(ckpt.meta.at("config")));
  nn::load_parameters(ckpt, "G/", state->model.g_params);
  nn::load_parameters(ckpt, "D/", state->model.d_params);
  nn::load_optimizer(ckpt, "optG/", state->model.g_params, state->g_opt);
  nn::load_optimizer(ckpt, "optD/", state->model.d_params, state->d_opt);
  state->step = ckpt.meta.at("step").get<std::int64_t>();
  std::istringstream rng(ckpt.meta.at("rng").get<std::string>());
  rng >> state->rng;
  if (!rng) throw std::runtime_error(path + ": unreadable RNG state");
  return state;
}

namespace {

nn::Tensor stack(const std::vector<const nn::Tensor*>& items) {
  const auto& s = items.front()->shape;
  nn::Shape shape{static_cast<int>(items.size())};
  shape.insert(shape.end(), s.begin(), s.end());
  nn::Tensor out(shape);
  std::size_t off = 0;
  for (const auto* t : items) {
    if (t->shape != s) throw std::invalid_argument("cannot stack tensors of different shapes");
    std::copy(t->data.begin(), t->data.end(), out.data.begin() + off);
    off += t->size();
  }
  return out;
}

}  // namespace

GanTrainResult train_gan(const data::PackedDataset& dataset, const embedding::EmbeddingTable& embeddings,
                         const GanTrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  GanConfig mc = config.model;
  mc.embedding_dim = embeddings.dim;
  if (mc.base_scale != dataset.base_scale())
    throw std::invalid_argument("base scale " + std::to_string(mc.base_scale) + " does not match packed data (" +
                                std::to_string(dataset.base_scale()) + ")");

  std::vector<std::size_t> usable;
  std::vector<const std::vector<float>*> conds;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto rec = dataset.record(i);
    const auto* e = embeddings.find(rec.id);
    if (!e) {
      log::warn({{"stage", "train-gan"}, {"msg", "no embedding for record, skipped"}, {"id", rec.id}});
      continue;
    }
    usable.push_back(i);
    conds.push_back(&e->vector);
  }
  const std::size_t n = usable.size();
  if (n < 2) throw std::invalid_argument("GAN training needs at least 2 records with embeddings, found " +
                                         std::to_string(n));

  GanTrainResult result;
  if (!config.resume_from.empty()) {
    result.state = load_gan_checkpoint(config.resume_from);
    if (result.state->model.config.embedding_dim != mc.embedding_dim ||
        result.state->model.config.base_scale != mc.base_scale)
      throw std::invalid_argument("checkpoint " + config.resume_from + " does not match the data/embeddings");
    result.last_checkpoint = config.resume_from;
  } else {
    result.state = std::make_unique<GanState>(mc);
  }
  GanState& state = *result.state;
  const std::size_t batch = std::min<std::size_t>(std::max(config.batch_size, 2), n);

  std::int64_t saved_at = -1;
  auto checkpoint = [&] {
    if (config.checkpoint_path.empty() || saved_at == state.step) return;
    save_gan_checkpoint(state, config.checkpoint_path);
    result.last_checkpoint = config.checkpoint_path;
    saved_at = state.step;
  };

  std::vector<std::size_t> order(n);
  bool done = false;
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), state.rng);
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      std::vector<data::MultiScaleImage> imgs;
      std::vector<const std::vector<float>*> bc;
      for (std::size_t j = start; j < start + batch; ++j) {
        imgs.push_back(data::dequantize(dataset.record(usable[order[j]]).image));
        bc.push_back(conds[order[j]]);
      }
      RealBatch rb;
      for (int k = 0; k < 3; ++k) {
        std::vector<const nn::Tensor*> ts;
        for (const auto& im : imgs) ts.push_back(&im.scales[k]);
        rb.images[k] = stack(ts);
      }
      rb.conditions = condition_batch(bc, mc.embedding_dim);

      GanLossReport rep;
      try {
        rep = gan_train_step(state, rb);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + "; last good checkpoint: " +
                                 (result.last_checkpoint.empty() ? "none written" : result.last_checkpoint));
      }
      result.history.push_back(rep);
      if (config.log_every > 0 && state.step % config.log_every == 0)
        log::info({{"stage", "train-gan"},
                   {"epoch", epoch},
                   {"step", static_cast<long long>(state.step)},
                   {"d_total", rep.d_total},
                   {"g_total", rep.g_total},
                   {"kl", rep.kl}});
      if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) checkpoint();
      if (config.max_steps > 0 && static_cast<std::int64_t>(result.history.size()) >= config.max_steps) {
        done = true;
        break;
      }
    }
    if (config.checkpoint_every <= 0) checkpoint();
  }
  checkpoint();
  return result;
}

std::vector<GeneratedImage> generate_for_recipes(const GanModel& model, const embedding::EmbeddingTable& table,
                                                 const GenerateOptions& options) {
  if (options.n_per_recipe < 1) throw std::invalid_argument("n_per_recipe must be >= 1");
  if (table.dim != model.config.embedding_dim)
    throw std::invalid_argument("embedding dimension " + std::to_string(table.dim) + " does not match generator (" +
                                std::to_string(model.config.embedding_dim) + ")");
  std::vector<const embedding::EmbeddingRecord*> recs;
  if (options.ids.empty()) {
    for (const auto& r : table.records) recs.push_back(&r);
  } else {
    for (const auto& id : options.ids) {
      const auto* r = table.find(id);
      if (!r) throw std::invalid_argument("no embedding for recipe id " + id);
      recs.push_back(r);
    }
  }
  std::mt19937_64 rng(options.seed);
  const auto& cfg = model.config;
  std::vector<GeneratedImage> out;
  for (const auto* r : recs) {
    nn::Tensor cond = condition_batch({&r->vector}, cfg.embedding_dim);
    for (int k = 0; k < options.n_per_recipe; ++k) {
      nn::Tensor z({1, cfg.z_dim}, sample_noise(1, cfg.z_dim, rng));
      nn::Tensor eps({1, cfg.ca_dim}, sample_noise(1, cfg.ca_dim, rng));
      auto imgs = model.generate(z, cond, eps);
      GeneratedImage g{r->id, k, {}};
      for (int s = 0; s < 3; ++s) {
        auto shape = imgs[s].shape;
        g.scales[s] = nn::Tensor({shape[1], shape[2], shape[3]}, std::move(imgs[s].data));
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<std::string> write_generated(const std::vector<GeneratedImage>& images, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  for (const auto& g : images)
    for (const auto& t : g.scales) {
      auto path = (fs::path(out_dir) / (g.id + "_" + std::to_string(g.index) + "_" + std::to_string(t.dim(1)) + ".png"))
                      .string();
      data::write_png(path, data::from_tensor(t));
      paths.push_back(path);
    }
  return paths;
}

}  // namespace r2i::gan
