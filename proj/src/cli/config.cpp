#include "r2i/cli/config.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace r2i::cli {

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {
      "prep",          "train-embedding", "export-embeddings", "train-gan",         "generate", "evaluate-is",
      "evaluate-msssim", "ranking-sheet",   "ranking-aggregate", "report", "make-toy", "train-classifier"};
  return names;
}

namespace {

// TOML scalar rendering; JSON string escaping is a valid TOML basic string.
std::string toml(const std::string& v) { return nlohmann::json(v).dump(); }
std::string toml(bool v) { return v ? "true" : "false"; }
std::string toml(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
template <typename T>
  requires std::is_integral_v<T>
std::string toml(T v) {
  return std::to_string(v);
}
std::string toml(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml(v[i]);
  return out + "]";
}

struct Binding {
  std::string key;
  std::function<std::string()> value;
};

/// CLI11 app whose options write straight into a RunConfig, plus a record of
/// every bound option per subcommand for snapshots.
struct AppBuilder {
  RunConfig& cfg;
  std::unique_ptr<CLI::App> app;
  std::map<std::string, std::vector<Binding>> bindings;
  std::map<std::string, CLI::App*> subs;
  CLI::App* cur = nullptr;

  explicit AppBuilder(RunConfig& c) : cfg(c), app(std::make_unique<CLI::App>("recipe-to-image pipeline", "r2i")) {
    app->set_config("--config", "", "TOML config file; [subcommand] sections set that stage's flags");
    app->add_option("--log-level", cfg.log_level, "debug, info, warn or error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
    app->require_subcommand(1);
  }

  void sub(const std::string& name, const std::string& desc) {
    cur = app->add_subcommand(name, desc);
    subs[name] = cur;
    bindings[name];
  }

  template <typename T>
  CLI::Option* opt(const std::string& flag, T& field, const std::string& desc, bool required = false) {
    auto* o = cur->add_option(flag, field, desc)->capture_default_str();
    if (required) o->required();
    bindings[cur->get_name()].push_back({flag.substr(2), [&field] { return toml(field); }});
    return o;
  }

  CLI::Option* flag(const std::string& name, bool& field, const std::string& desc) {
    auto* o = cur->add_flag(name, field, desc);
    bindings[cur->get_name()].push_back({name.substr(2), [&field] { return toml(field); }});
    return o;
  }
};

void build(AppBuilder& b) {
  RunConfig& c = b.cfg;

  b.sub("make-toy", "Write the synthetic two-class corpus (recipes.jsonl + images/)");
  b.opt("--out", c.make_toy.out, "output directory", true);
  b.opt("--n", c.make_toy.n, "number of recipes");
  b.opt("--width", c.make_toy.width, "image width");
  b.opt("--height", c.make_toy.height, "image height");
  b.opt("--seed", c.make_toy.seed, "seed");

  b.sub("prep", "Parse recipes, build the vocabulary and write a packed dataset");
  b.opt("--recipes", c.prep.recipes, "recipe JSON-lines file", true);
  b.opt("--images", c.prep.images, "image directory", true);
  b.opt("--out", c.prep.out, "packed output file", true);
  b.opt("--base-scale", c.prep.base_scale, "base image side s (images at s, 2s, 4s)");
  b.opt("--min-count", c.prep.min_count, "minimum token count for the vocabulary");
  b.opt("--max-ingredients", c.prep.max_ingredients, "ingredient slots per recipe");
  b.opt("--max-sentences", c.prep.max_sentences, "instruction sentences per recipe");
  b.opt("--max-words", c.prep.max_words, "words per instruction sentence");
  b.flag("--no-augment", c.prep.no_augment, "center crop, no flip");
  b.opt("--seed", c.prep.seed, "augmentation seed");

  b.sub("train-embedding", "Train the joint recipe/image embedding (NOREG or REG)");
  b.opt("--data", c.train_embedding.data, "packed dataset", true);
  b.opt("--variant", c.train_embedding.variant, "noreg or reg")
      ->check(CLI::IsMember({"noreg", "reg", "NOREG", "REG"}));
  b.opt("--epochs", c.train_embedding.epochs, "epochs");
  b.opt("--batch", c.train_embedding.batch, "batch size");
  b.opt("--lr", c.train_embedding.lr, "learning rate");
  b.opt("--lambda", c.train_embedding.lambda, "weight of the classification term (REG)");
  b.opt("--margin", c.train_embedding.margin, "negative-pair cosine margin");
  b.opt("--dim", c.train_embedding.dim, "embedding size (0 = variant default)");
  b.opt("--classes", c.train_embedding.classes, "class count for REG (0 = from data)");
  b.opt("--word-dim", c.train_embedding.word_dim, "word vector size");
  b.opt("--hidden", c.train_embedding.hidden, "ingredient/instruction encoder size");
  b.opt("--image-width", c.train_embedding.image_width, "channels of the first image conv");
  b.opt("--seed", c.train_embedding.seed, "seed");
  b.opt("--out-dir", c.train_embedding.out_dir, "output directory", true);

  b.sub("export-embeddings", "Write one recipe embedding per packed record");
  b.opt("--ckpt", c.export_embeddings.ckpt, "embedding checkpoint", true);
  b.opt("--data", c.export_embeddings.data, "packed dataset", true);
  b.opt("--out", c.export_embeddings.out, "embedding file", true);

  b.sub("train-gan", "Train the tree GAN conditioned on recipe embeddings");
  b.opt("--data", c.train_gan.data, "packed dataset", true);
  b.opt("--embeddings", c.train_gan.embeddings, "embedding file", true);
  b.opt("--base-scale", c.train_gan.base_scale, "base image side s");
  b.opt("--batch", c.train_gan.batch, "batch size");
  b.opt("--epochs", c.train_gan.epochs, "epochs");
  b.opt("--max-steps", c.train_gan.max_steps, "stop after this many steps (0 = no cap)");
  b.opt("--lambda-kl", c.train_gan.lambda_kl, "weight of the conditioning KL term");
  b.opt("--z-dim", c.train_gan.z_dim, "noise size");
  b.opt("--ca-dim", c.train_gan.ca_dim, "sampled condition size");
  b.opt("--gen-width", c.train_gan.gen_width, "generator width at the base scale");
  b.opt("--disc-width", c.train_gan.disc_width, "discriminator first-layer width");
  b.opt("--lr", c.train_gan.lr, "learning rate (both networks)");
  b.flag("--minimax", c.train_gan.minimax, "use the saturating log(1 - D(G(z))) generator loss");
  b.opt("--checkpoint-every", c.train_gan.checkpoint_every, "steps between checkpoints (0 = every epoch)");
  b.opt("--log-every", c.train_gan.log_every, "steps between log lines");
  b.opt("--resume", c.train_gan.resume, "checkpoint to resume from");
  b.opt("--seed", c.train_gan.seed, "seed");
  b.opt("--out-dir", c.train_gan.out_dir, "output directory", true);

  b.sub("generate", "Generate images for recipes from a GAN checkpoint");
  b.opt("--ckpt", c.generate.ckpt, "GAN checkpoint", true);
  b.opt("--embeddings", c.generate.embeddings, "embedding file", true);
  b.opt("--ids", c.generate.ids, "comma-separated recipe ids or 'all'");
  b.opt("--n-per-recipe", c.generate.n_per_recipe, "images per recipe");
  b.opt("--seed", c.generate.seed, "seed");
  b.opt("--out-dir", c.generate.out_dir, "output directory", true);

  b.sub("evaluate-is", "Inception score of a directory of images");
  b.opt("--images", c.evaluate_is.images, "image directory", true);
  b.opt("--classifier", c.evaluate_is.classifier, "classifier checkpoint", true);
  b.opt("--splits", c.evaluate_is.splits, "number of shards");
  b.opt("--seed", c.evaluate_is.seed, "shuffle seed");
  b.opt("--variant", c.evaluate_is.variant, "REG or NOREG label for the report");
  b.opt("--out", c.evaluate_is.out, "result JSON");

  b.sub("evaluate-msssim", "Mean pairwise MS-SSIM over sampled images");
  b.opt("--images", c.evaluate_msssim.images, "image directory", true);
  b.opt("--n-sample", c.evaluate_msssim.n_sample, "images sampled without replacement");
  b.opt("--seed", c.evaluate_msssim.seed, "sampling seed");
  b.opt("--variant", c.evaluate_msssim.variant, "REG or NOREG label for the report");
  b.opt("--out", c.evaluate_msssim.out, "result JSON");

  b.sub("ranking-sheet", "Build a blinded human ranking sheet");
  b.opt("--recipes", c.ranking_sheet.recipes, "recipe JSON-lines file", true);
  b.opt("--real", c.ranking_sheet.real, "real image directory", true);
  b.opt("--reg", c.ranking_sheet.reg, "REG generation directory", true);
  b.opt("--noreg", c.ranking_sheet.noreg, "NOREG generation directory", true);
  b.opt("--n", c.ranking_sheet.n, "items on the sheet");
  b.opt("--seed", c.ranking_sheet.seed, "seed");
  b.opt("--sheet-id", c.ranking_sheet.sheet_id, "sheet identifier");
  b.opt("--out", c.ranking_sheet.out, "output directory", true);

  b.sub("ranking-aggregate", "Average ranking responses per variant and question");
  b.opt("--responses", c.ranking_aggregate.responses, "response CSV files", true);
  b.opt("--key", c.ranking_aggregate.key, "unblinding key (key.json)", true);
  b.opt("--out", c.ranking_aggregate.out, "summary JSON", true);

  b.sub("report", "Combine evaluation outputs into the comparison report");
  b.opt("--inputs", c.report.inputs, "evaluation JSON files", true);
  b.opt("--out", c.report.out, "report JSON (a .txt table is written next to it)", true);

  b.sub("train-classifier", "Train the stand-in classifier on packed images");
  b.opt("--data", c.train_classifier.data, "packed dataset", true);
  b.opt("--out", c.train_classifier.out, "classifier checkpoint", true);
  b.opt("--epochs", c.train_classifier.epochs, "epochs");
  b.opt("--batch", c.train_classifier.batch, "batch size");
  b.opt("--width", c.train_classifier.width, "first conv width");
  b.opt("--lr", c.train_classifier.lr, "learning rate");
  b.opt("--seed", c.train_classifier.seed, "seed");
}

std::string valid_flags(const CLI::App* app) {
  std::string out;
  for (const auto* o : app->get_options()) {
    auto names = o->get_lnames();
    if (names.empty()) continue;
    out += (out.empty() ? "--" : ", --") + names.front();
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check_scale(int s) {
  require(s >= 4 && s % 4 == 0 && power_of_two(s / 4),
          "--base-scale must be a multiple of 4 with base/4 a power of two, got " + std::to_string(s));
}

}  // namespace

void validate(const RunConfig& c) {
  if (const char* dev = std::getenv("R2I_DEVICE"); dev && *dev && std::string(dev) != "cpu")
    throw std::invalid_argument(std::string("R2I_DEVICE=") + dev + " is not available; only 'cpu' is supported");
  const auto& cmd = c.command;
  if (cmd == "prep") {
    check_scale(c.prep.base_scale);
    require(c.prep.min_count >= 1, "--min-count must be >= 1");
    require(c.prep.max_ingredients >= 1 && c.prep.max_sentences >= 1 && c.prep.max_words >= 1,
            "token limits must be >= 1");
  } else if (cmd == "train-embedding") {
    const auto& t = c.train_embedding;
    const bool reg = t.variant == "reg" || t.variant == "REG";
    require(!(reg && t.classes == 1), "--variant reg needs at least 2 classes, got --classes 1");
    require(t.classes >= 0, "--classes must be >= 0");
    require(t.epochs >= 1, "--epochs must be >= 1");
    require(t.batch >= 2, "--batch must be >= 2 (negatives come from the batch)");
    require(t.lr > 0, "--lr must be positive");
    require(t.lambda >= 0, "--lambda must be non-negative");
    require(t.dim >= 0, "--dim must be >= 0");
  } else if (cmd == "train-gan") {
    const auto& t = c.train_gan;
    check_scale(t.base_scale);
    require(t.batch >= 2, "--batch must be >= 2");
    require(t.epochs >= 1, "--epochs must be >= 1");
    require(t.max_steps >= 0, "--max-steps must be >= 0");
    require(t.lambda_kl >= 0, "--lambda-kl must be non-negative");
    require(t.lr > 0, "--lr must be positive");
  } else if (cmd == "generate") {
    require(c.generate.n_per_recipe >= 1, "--n-per-recipe must be >= 1");
  } else if (cmd == "evaluate-is") {
    require(c.evaluate_is.splits >= 1, "--splits must be >= 1");
    require(c.evaluate_is.variant.empty() || c.evaluate_is.variant == "REG" || c.evaluate_is.variant == "NOREG",
            "--variant must be REG or NOREG");
  } else if (cmd == "evaluate-msssim") {
    require(c.evaluate_msssim.n_sample >= 2, "--n-sample must be >= 2");
    require(c.evaluate_msssim.variant.empty() || c.evaluate_msssim.variant == "REG" ||
                c.evaluate_msssim.variant == "NOREG",
            "--variant must be REG or NOREG");
  } else if (cmd == "ranking-sheet") {
    require(c.ranking_sheet.n >= 1, "--n must be >= 1");
  } else if (cmd == "make-toy") {
    require(c.make_toy.n >= 2, "--n must be >= 2");
  } else if (cmd == "train-classifier") {
    require(c.train_classifier.epochs >= 1, "--epochs must be >= 1");
  }
}

ParseOutcome parse_config(int argc, const char* const* argv) {
  ParseOutcome out;
  AppBuilder b(out.config);
  build(b);
  try {
    b.app->parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out.exit_now = true;
    CLI::App* target = b.app.get();
    for (auto* s : b.app->get_subcommands()) target = s;
    out.message = target->help();
    return out;
  } catch (const CLI::CallForAllHelp&) {
    out.exit_now = true;
    out.message = b.app->help("", CLI::AppFormatMode::All);
    return out;
  } catch (const CLI::ExtrasError& e) {
    const CLI::App* target = b.app.get();
    for (auto* s : b.app->get_subcommands()) target = s;
    throw std::invalid_argument(std::string(e.what()) + "; valid flags: " + valid_flags(target));
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }
  out.config.command = b.app->get_subcommands().front()->get_name();
  validate(out.config);
  return out;
}

RunConfig parse_config_or_throw(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  auto out = parse_config(static_cast<int>(argv.size()), argv.data());
  if (out.exit_now) throw std::invalid_argument("help requested");
  return out.config;
}

std::string config_snapshot(const RunConfig& config) {
  RunConfig copy = config;
  AppBuilder b(copy);
  build(b);
  std::ostringstream os;
  os << "# r2i " << config.command << "\n";
  os << "log-level = " << toml(config.log_level) << "\n\n";
  os << "[" << config.command << "]\n";
  auto it = b.bindings.find(config.command);
  if (it == b.bindings.end()) throw std::invalid_argument("unknown subcommand " + config.command);
  for (const auto& bind : it->second) os << bind.key << " = " << bind.value() << "\n";
  return os.str();
}

}  // namespace r2i::cli
