#include "r2i/cli/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "r2i/data/packed.hpp"
#include "r2i/data/recipe.hpp"
#include "r2i/data/toy_corpus.hpp"
#include "r2i/data/vocabulary.hpp"
#include "r2i/embedding/trainer.hpp"
#include "r2i/eval/classifier.hpp"
#include "r2i/eval/image_dir.hpp"
#include "r2i/eval/inception.hpp"
#include "r2i/eval/msssim.hpp"
#include "r2i/eval/report.hpp"
#include "r2i/gan/trainer.hpp"
#include "r2i/ranking/ranking.hpp"
#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

namespace r2i::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path);
}

// Directory outputs get <dir>/config_snapshot.toml; file outputs get <file>.config.toml.
void snapshot_dir(const RunConfig& c, const std::string& dir) {
  fs::create_directories(dir);
  write_text(fs::path(dir) / "config_snapshot.toml", config_snapshot(c));
}

void snapshot_file(const RunConfig& c, const std::string& file) {
  write_text(file + ".config.toml", config_snapshot(c));
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  if (s == "all") return out;
  std::stringstream ss(s);
  std::string id;
  while (std::getline(ss, id, ','))
    if (!id.empty()) out.push_back(id);
  if (out.empty()) throw std::invalid_argument("--ids lists no recipe ids");
  return out;
}

void run_make_toy(const RunConfig& c) {
  const auto& o = c.make_toy;
  auto corpus = data::make_toy_corpus(o.n, o.seed, o.width, o.height);
  data::write_toy_corpus(corpus, o.out);
  snapshot_dir(c, o.out);
  log::info({{"stage", "make-toy"}, {"recipes", static_cast<int>(corpus.recipes.size())}, {"out", o.out}});
}

void run_prep(const RunConfig& c) {
  const auto& o = c.prep;
  require_file(o.recipes, "recipe file");
  if (!fs::is_directory(o.images)) throw std::runtime_error("image directory not found: " + o.images);
  auto parsed = data::parse_recipe_records(o.recipes);
  auto vocab = data::build_vocabulary(parsed.recipes, o.min_count);
  data::PackOptions po;
  po.base_scale = o.base_scale;
  po.limits = {o.max_ingredients, o.max_sentences, o.max_words};
  po.seed = o.seed;
  po.augment = !o.no_augment;
  auto summary = data::pack_dataset(parsed.recipes, data::directory_images(o.images), vocab, po, o.out);
  snapshot_file(c, o.out);
  log::info({{"stage", "prep"},
             {"records", static_cast<unsigned long long>(summary.count)},
             {"dropped", static_cast<unsigned long long>(summary.dropped)},
             {"skipped_lines", static_cast<unsigned long long>(parsed.skipped)},
             {"vocab", static_cast<unsigned long long>(vocab.size())},
             {"classes", summary.num_classes},
             {"out", o.out}});
}

void run_train_embedding(const RunConfig& c) {
  const auto& o = c.train_embedding;
  require_file(o.data, "packed dataset");
  auto ds = data::PackedDataset::open(o.data);
  embedding::TrainConfig tc;
  tc.variant = embedding::parse_variant(o.variant);
  tc.embedding_dim = o.dim;
  tc.num_classes = o.classes;
  tc.lambda = o.lambda;
  tc.margin = o.margin;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.lr = static_cast<float>(o.lr);
  tc.seed = o.seed;
  tc.word_dim = o.word_dim;
  tc.ingredient_dim = o.hidden;
  tc.instruction_dim = o.hidden;
  tc.image_width = o.image_width;
  fs::create_directories(o.out_dir);
  tc.checkpoint_path = (fs::path(o.out_dir) / "embedding.ckpt").string();
  snapshot_dir(c, o.out_dir);
  auto result = embedding::train_embedding(ds, tc);
  std::ostringstream lines;
  for (const auto& s : result.steps)
    lines << json{{"epoch", s.epoch},         {"step", s.step},   {"alignment", s.alignment},
                  {"semantic", s.semantic},   {"total", s.total}, {"accuracy", s.accuracy}}
                 .dump()
          << "\n";
  write_text(fs::path(o.out_dir) / "train_log.jsonl", lines.str());
  log::info({{"stage", "train-embedding"},
             {"variant", embedding::variant_name(tc.variant)},
             {"steps", static_cast<unsigned long long>(result.steps.size())},
             {"first_alignment", result.steps.empty() ? 0.0 : result.steps.front().alignment},
             {"last_alignment", result.steps.empty() ? 0.0 : result.steps.back().alignment},
             {"ckpt", tc.checkpoint_path}});
}

void run_export_embeddings(const RunConfig& c) {
  const auto& o = c.export_embeddings;
  require_file(o.ckpt, "embedding checkpoint");
  require_file(o.data, "packed dataset");
  auto model = embedding::EmbeddingModel::load(o.ckpt);
  auto ds = data::PackedDataset::open(o.data);
  auto table = embedding::export_embeddings(model, ds);
  embedding::write_embeddings(o.out, table);
  snapshot_file(c, o.out);
  log::info({{"stage", "export-embeddings"},
             {"variant", embedding::variant_name(table.variant)},
             {"records", static_cast<unsigned long long>(table.records.size())},
             {"dim", table.dim},
             {"out", o.out}});
}

void run_train_gan(const RunConfig& c) {
  const auto& o = c.train_gan;
  require_file(o.data, "packed dataset");
  require_file(o.embeddings, "embedding file");
  auto ds = data::PackedDataset::open(o.data);
  auto table = embedding::read_embeddings(o.embeddings);
  gan::GanTrainConfig tc;
  tc.model.base_scale = o.base_scale;
  tc.model.z_dim = o.z_dim;
  tc.model.ca_dim = o.ca_dim;
  tc.model.gen_width = o.gen_width;
  tc.model.disc_width = o.disc_width;
  tc.model.lambda_kl = o.lambda_kl;
  tc.model.lr = static_cast<float>(o.lr);
  tc.model.g_loss = o.minimax ? gan::GeneratorLossForm::kMinimax : gan::GeneratorLossForm::kNonSaturating;
  tc.model.seed = o.seed;
  tc.batch_size = o.batch;
  tc.epochs = o.epochs;
  tc.max_steps = o.max_steps;
  tc.checkpoint_every = o.checkpoint_every;
  tc.log_every = o.log_every;
  tc.resume_from = o.resume;
  fs::create_directories(o.out_dir);
  tc.checkpoint_path = (fs::path(o.out_dir) / "gan.ckpt").string();
  snapshot_dir(c, o.out_dir);
  auto result = gan::train_gan(ds, table, tc);
  std::ostringstream lines;
  for (const auto& r : result.history) lines << r.to_json().dump() << "\n";
  write_text(fs::path(o.out_dir) / "loss_log.jsonl", lines.str());
  log::info({{"stage", "train-gan"},
             {"variant", embedding::variant_name(table.variant)},
             {"steps", static_cast<long long>(result.state->step)},
             {"ckpt", result.last_checkpoint}});
}

void run_generate(const RunConfig& c) {
  const auto& o = c.generate;
  require_file(o.ckpt, "GAN checkpoint");
  require_file(o.embeddings, "embedding file");
  auto state = gan::load_gan_checkpoint(o.ckpt);
  auto table = embedding::read_embeddings(o.embeddings);
  gan::GenerateOptions go;
  go.ids = split_ids(o.ids);
  go.n_per_recipe = o.n_per_recipe;
  go.seed = o.seed;
  go.out_dir = o.out_dir;
  auto images = gan::generate_for_recipes(state->model, table, go);
  auto files = gan::write_generated(images, o.out_dir);
  snapshot_dir(c, o.out_dir);
  write_json((fs::path(o.out_dir) / "manifest.json").string(),
             {{"ckpt", o.ckpt},
              {"ckpt_step", state->step},
              {"train_seed", state->model.config.seed},
              {"variant", embedding::variant_name(table.variant)},
              {"seed", o.seed},
              {"n_per_recipe", o.n_per_recipe},
              {"files", files}});
  log::info({{"stage", "generate"},
             {"images", static_cast<unsigned long long>(images.size())},
             {"files", static_cast<unsigned long long>(files.size())},
             {"out", o.out_dir}});
}

void emit_result(const RunConfig& c, const std::string& out, const json& doc) {
  std::cout << doc.dump(2) << "\n";
  if (out.empty()) return;
  write_json(out, doc);
  snapshot_file(c, out);
}

void run_evaluate_is(const RunConfig& c) {
  const auto& o = c.evaluate_is;
  if (!fs::is_regular_file(o.classifier))
    throw std::runtime_error("classifier '" + o.classifier +
                             "' not found; pass a checkpoint written by train-classifier");
  auto cls = eval::StandInClassifier::load(o.classifier);
  auto files = eval::load_image_dir(o.images, cls.image_size());
  std::vector<nn::Tensor> imgs;
  for (const auto& f : files) imgs.push_back(data::to_tensor(f.image));
  auto post = eval::class_posteriors(imgs, cls);
  std::mt19937_64 rng(o.seed);
  auto r = eval::inception_score(post, o.splits, rng);
  r.classifier = cls.id();
  json doc = {{"kind", "inception_score"},
              {"version", eval::kReportVersion},
              {"variant", o.variant},
              {"result", eval::to_json(r)},
              {"metadata", {{"images", o.images}, {"classifier", o.classifier}, {"seed", o.seed}}}};
  emit_result(c, o.out, doc);
  log::info({{"stage", "evaluate-is"}, {"mean", r.mean}, {"std", r.std}, {"images", static_cast<int>(imgs.size())}});
}

void run_evaluate_msssim(const RunConfig& c) {
  const auto& o = c.evaluate_msssim;
  auto files = eval::load_image_dir(o.images);
  std::vector<eval::GrayImage> gray;
  for (const auto& f : files) gray.push_back(eval::luminance(f.image));
  std::mt19937_64 rng(o.seed);
  auto r = eval::diversity_score(gray, o.n_sample, rng);
  json doc = {{"kind", "ms_ssim"},
              {"version", eval::kReportVersion},
              {"variant", o.variant},
              {"result", eval::to_json(r)},
              {"metadata", {{"images", o.images}, {"seed", o.seed}}}};
  emit_result(c, o.out, doc);
  log::info({{"stage", "evaluate-msssim"}, {"mean", r.mean}, {"pairs", r.pair_count}});
}

void run_ranking_sheet(const RunConfig& c) {
  const auto& o = c.ranking_sheet;
  require_file(o.recipes, "recipe file");
  ranking::SheetInputs in;
  in.recipes = data::parse_recipe_records(o.recipes).recipes;
  in.dirs = {o.real, o.reg, o.noreg};
  std::mt19937_64 rng(o.seed);
  auto sheet = ranking::make_ranking_sheet(in, o.n, rng, o.sheet_id);
  ranking::write_sheet_files(sheet, o.out);
  snapshot_dir(c, o.out);
  log::info({{"stage", "ranking-sheet"}, {"items", static_cast<int>(sheet.sheet.items.size())}, {"out", o.out}});
}

void run_ranking_aggregate(const RunConfig& c) {
  const auto& o = c.ranking_aggregate;
  auto key = ranking::key_from_json(read_json(o.key));
  std::vector<ranking::ResponseRow> rows;
  std::vector<std::string> diags;
  for (const auto& path : o.responses) {
    auto parsed = ranking::read_responses(path);
    rows.insert(rows.end(), parsed.rows.begin(), parsed.rows.end());
    diags.insert(diags.end(), parsed.diagnostics.begin(), parsed.diagnostics.end());
  }
  auto summary = ranking::aggregate_rankings(rows, key);
  summary.diagnostics.insert(summary.diagnostics.begin(), diags.begin(), diags.end());
  for (const auto& d : summary.diagnostics) log::warn({{"stage", "ranking-aggregate"}, {"rejected", d}});
  write_json(o.out, ranking::to_json(summary));
  snapshot_file(c, o.out);
  for (const auto& [name, v] : summary.variants)
    log::info({{"stage", "ranking-aggregate"},
               {"variant", name},
               {"overall", v.overall ? *v.overall : -1.0},
               {"raters", v.raters}});
}

void run_report(const RunConfig& c) {
  const auto& o = c.report;
  std::vector<json> docs;
  for (const auto& p : o.inputs) docs.push_back(read_json(p));
  auto report = eval::report_from_inputs(docs);
  write_json(o.out, eval::to_json(report));
  const auto table = eval::render_tables(report);
  write_text(fs::path(o.out).replace_extension(".txt"), table);
  snapshot_file(c, o.out);
  std::cout << table;
}

void run_train_classifier(const RunConfig& c) {
  const auto& o = c.train_classifier;
  require_file(o.data, "packed dataset");
  auto ds = data::PackedDataset::open(o.data);
  std::vector<nn::Tensor> imgs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto rec = ds.record(i);
    if (rec.class_label < 0) continue;
    imgs.push_back(data::dequantize(rec.image).scales[2]);
    labels.push_back(rec.class_label);
  }
  const int classes = static_cast<int>(ds.header().num_classes);
  if (classes < 2 || imgs.empty())
    throw std::invalid_argument("classifier training needs labeled records from >= 2 classes");
  eval::StandInClassifier cls({4 * ds.base_scale(), classes, o.width, o.seed});
  const double acc = cls.train(imgs, labels, {o.epochs, o.batch, static_cast<float>(o.lr), o.seed});
  cls.set_id("stand-in:" + fs::path(o.out).filename().string());
  cls.save(o.out);
  snapshot_file(c, o.out);
  log::info({{"stage", "train-classifier"}, {"accuracy", acc}, {"images", static_cast<int>(imgs.size())}, {"out", o.out}});
}

}  // namespace

int run_pipeline(const RunConfig& config) {
  try {
    validate(config);
    const auto& cmd = config.command;
    if (cmd == "make-toy") run_make_toy(config);
    else if (cmd == "prep") run_prep(config);
    else if (cmd == "train-embedding") run_train_embedding(config);
    else if (cmd == "export-embeddings") run_export_embeddings(config);
    else if (cmd == "train-gan") run_train_gan(config);
    else if (cmd == "generate") run_generate(config);
    else if (cmd == "evaluate-is") run_evaluate_is(config);
    else if (cmd == "evaluate-msssim") run_evaluate_msssim(config);
    else if (cmd == "ranking-sheet") run_ranking_sheet(config);
    else if (cmd == "ranking-aggregate") run_ranking_aggregate(config);
    else if (cmd == "report") run_report(config);
    else if (cmd == "train-classifier") run_train_classifier(config);
    else throw std::invalid_argument("unknown subcommand '" + cmd + "'");
  } catch (const std::exception& e) {
    log::error({{"stage", config.command}, {"error", e.what()}});
    return 1;
  }
  return 0;
}

int main_entry(int argc, const char* const* argv) {
  ParseOutcome parsed;
  try {
    parsed = parse_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "r2i: " << e.what() << "\n";
    return 2;
  }
  if (parsed.exit_now) {
    std::cout << parsed.message;
    return parsed.exit_code;
  }
  const auto& lvl = parsed.config.log_level;
  log::set_level(lvl == "debug"  ? log::Level::kDebug
                 : lvl == "warn" ? log::Level::kWarn
                 : lvl == "error" ? log::Level::kError
                                  : log::Level::kInfo);
  return run_pipeline(parsed.config);
}

}  // namespace r2i::cli
