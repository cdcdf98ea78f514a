#include "r2i/embedding/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "r2i/embedding/losses.hpp"
#include "r2i/nn/optim.hpp"
#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

namespace r2i::embedding {

using nn::Var;

namespace {

Batch to_batch(const Var& v) {
  const int rows = v.shape()[0], cols = v.shape()[1];
  Batch b(rows, std::vector<double>(cols));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) b[i][j] = v.value().data[static_cast<std::size_t>(i) * cols + j];
  return b;
}

std::vector<float> flatten(const Batch& b, double scale) {
  std::vector<float> out;
  for (const auto& row : b)
    for (double x : row) out.push_back(static_cast<float>(scale * x));
  return out;
}

struct LoadedBatch {
  std::vector<data::PackedRecord> records;
  std::vector<data::MultiScaleImage> images;
};

LoadedBatch load_batch(const data::PackedDataset& ds, const std::vector<std::size_t>& idx) {
  LoadedBatch b;
  for (auto i : idx) {
    b.records.push_back(ds.record(i));
    b.images.push_back(data::dequantize(b.records.back().image));
  }
  return b;
}

std::vector<const data::TokenizedRecipe*> token_ptrs(const LoadedBatch& b) {
  std::vector<const data::TokenizedRecipe*> out;
  for (const auto& r : b.records) out.push_back(&r.tokens);
  return out;
}

Var top_scale(const LoadedBatch& b) {
  std::vector<const nn::Tensor*> imgs;
  for (const auto& m : b.images) imgs.push_back(&m.scales[2]);
  return stack_images(imgs);
}

void require_finite(double v, const char* what, int epoch, int step) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite ") + what + " loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step));
}

}  // namespace

TrainResult train_embedding(const data::PackedDataset& dataset, const TrainConfig& config) {
  const std::size_t n = dataset.size();
  if (n < 2) throw std::invalid_argument("embedding training needs at least 2 records, dataset has " + std::to_string(n));
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.lambda < 0) throw std::invalid_argument("lambda must be non-negative");

  ModelConfig mc;
  mc.variant = config.variant;
  mc.vocab_size = static_cast<int>(dataset.header().vocab_size);
  mc.limits = dataset.header().limits;
  mc.word_dim = config.word_dim;
  mc.ingredient_dim = config.ingredient_dim;
  mc.instruction_dim = config.instruction_dim;
  mc.embedding_dim = config.embedding_dim > 0 ? config.embedding_dim : default_dim(config.variant);
  mc.image_size = 4 * dataset.base_scale();
  mc.image_width = config.image_width;
  mc.num_classes = config.num_classes > 0 ? config.num_classes : static_cast<int>(dataset.header().num_classes);
  mc.seed = config.seed;
  if (config.variant == Variant::kReg) {
    if (mc.num_classes < 2) throw std::invalid_argument("REG training needs >= 2 classes");
    for (std::size_t i = 0; i < n; ++i) {
      int label = dataset.record(i).class_label;
      if (label < 0 || label >= mc.num_classes)
        throw std::invalid_argument("record " + std::to_string(i) + " has label " + std::to_string(label) +
                                    " outside [0, " + std::to_string(mc.num_classes) + ")");
    }
  }

  TrainResult result{EmbeddingModel(mc), {}};
  EmbeddingModel& model = result.model;
  nn::Adam opt(model.parameters(), {config.lr, 0.9f, 0.999f, 1e-8f});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const std::size_t batch = std::min<std::size_t>(std::max(config.batch_size, 2), n);

  std::vector<std::size_t> order(n);
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0, epoch_align = 0.0;
    int epoch_steps = 0;
    // The trailing partial batch is dropped.
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + batch);
      LoadedBatch lb = load_batch(dataset, idx);
      opt.zero_grad();
      Var r = model.recipe_embedding(token_ptrs(lb));
      Var v = model.image_embedding(top_scale(lb));
      CosineLoss align = cosine_alignment_loss(to_batch(r), to_batch(v), config.margin);
      require_finite(align.value, "alignment", epoch, step);
      std::vector<std::pair<Var, std::vector<float>>> seeds = {{r, flatten(align.grad_recipe, 1.0)},
                                                               {v, flatten(align.grad_image, 1.0)}};
      StepLog log{epoch, step, align.value, 0.0, align.value, 0.0};
      if (model.has_classifier()) {
        std::vector<int> labels;
        for (const auto& rec : lb.records) labels.push_back(rec.class_label);
        Var lr_ = model.classify(r);
        Var lv = model.classify(v);
        CrossEntropy cr = softmax_cross_entropy(to_batch(lr_), labels);
        CrossEntropy ci = softmax_cross_entropy(to_batch(lv), labels);
        log.semantic = 0.5 * (cr.value + ci.value);
        require_finite(log.semantic, "semantic", epoch, step);
        log.total = align.value + config.lambda * log.semantic;
        log.accuracy = static_cast<double>(cr.correct + ci.correct) / static_cast<double>(2 * labels.size());
        seeds.emplace_back(lr_, flatten(cr.grad_logits, 0.5 * config.lambda));
        seeds.emplace_back(lv, flatten(ci.grad_logits, 0.5 * config.lambda));
      }
      nn::backward(seeds);
      opt.step();
      result.steps.push_back(log);
      epoch_total += log.total;
      epoch_align += log.alignment;
      ++epoch_steps;
      ++step;
    }
    log::info({{"stage", "train-embedding"},
               {"variant", variant_name(config.variant)},
               {"epoch", epoch},
               {"step", step},
               {"alignment", epoch_align / epoch_steps},
               {"total", epoch_total / epoch_steps}});
    if (!config.checkpoint_path.empty())
      model.save(config.checkpoint_path, {{"epoch", epoch}, {"step", step}, {"train_seed", config.seed}});
  }
  return result;
}

double evaluate_alignment(const EmbeddingModel& model, const data::PackedDataset& dataset, int batch_size,
                          double margin) {
  const std::size_t n = dataset.size();
  const std::size_t batch = std::min<std::size_t>(std::max(batch_size, 2), n);
  double total = 0.0;
  int count = 0;
  for (std::size_t start = 0; start + batch <= n; start += batch) {
    std::vector<std::size_t> idx(batch);
    std::iota(idx.begin(), idx.end(), start);
    LoadedBatch lb = load_batch(dataset, idx);
    Var r = model.recipe_embedding(token_ptrs(lb));
    Var v = model.image_embedding(top_scale(lb));
    total += cosine_alignment_loss(to_batch(r), to_batch(v), margin).value;
    ++count;
  }
  return count ? total / count : 0.0;
}

double classifier_accuracy(const EmbeddingModel& model, const data::PackedDataset& dataset) {
  if (!model.has_classifier()) throw std::logic_error("model has no classifier head");
  int correct = 0, total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto rec = dataset.record(i);
    if (rec.class_label < 0) continue;
    Var logits = model.classify(model.recipe_embedding({&rec.tokens}));
    const auto& d = logits.value().data;
    int arg = static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
    correct += arg == rec.class_label;
    ++total;
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

const EmbeddingRecord* EmbeddingTable::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

EmbeddingTable export_embeddings(const EmbeddingModel& model, const data::PackedDataset& dataset) {
  EmbeddingTable table;
  table.variant = model.config().variant;
  table.dim = model.config().embedding_dim;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto rec = dataset.record(i);
    if (!seen.insert(rec.id).second) throw std::runtime_error("duplicate recipe id in dataset: " + rec.id);
    table.records.push_back({rec.id, model.embed_recipe(rec.tokens).vector});
  }
  return table;
}

namespace {
constexpr char kEmbMagic[8] = {'R', '2', 'I', 'E', 'M', 'B', '\0', '\0'};
}

void write_embeddings(const std::string& path, const EmbeddingTable& table) {
  io::ByteWriter w;
  w.put_raw(std::string_view(kEmbMagic, 8));
  w.put(kEmbeddingFileVersion);
  w.put(static_cast<std::uint64_t>(table.records.size()));
  w.put(static_cast<std::uint32_t>(table.dim));
  w.put(static_cast<std::uint8_t>(table.variant));
  std::unordered_set<std::string> seen;
  for (const auto& r : table.records) {
    if (!seen.insert(r.id).second) throw std::runtime_error("duplicate embedding id: " + r.id);
    if (static_cast<int>(r.vector.size()) != table.dim)
      throw std::invalid_argument("embedding for " + r.id + " has dimension " + std::to_string(r.vector.size()));
    w.put_string(r.id);
    w.put_span(std::span<const float>(r.vector));
  }
  io::write_file_atomic(path, w.bytes());
}

EmbeddingTable read_embeddings(const std::string& path) {
  auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kEmbMagic, 8) != 0)
    throw std::runtime_error(path + ": not an embedding file (bad magic)");
  r.seek(8);
  auto version = r.get<std::uint32_t>();
  if (version != kEmbeddingFileVersion)
    throw std::runtime_error(path + ": embedding file version " + std::to_string(version) +
                             " does not match supported version " + std::to_string(kEmbeddingFileVersion));
  auto count = r.get<std::uint64_t>();
  EmbeddingTable t;
  t.dim = static_cast<int>(r.get<std::uint32_t>());
  auto variant = r.get<std::uint8_t>();
  if (variant > 1) throw std::runtime_error(path + ": unknown variant tag " + std::to_string(variant));
  t.variant = static_cast<Variant>(variant);
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.id = r.get_string();
    if (!seen.insert(rec.id).second) throw std::runtime_error(path + ": duplicate id " + rec.id);
    rec.vector.resize(t.dim);
    r.get_into(std::span<float>(rec.vector));
    t.records.push_back(std::move(rec));
  }
  if (r.remaining()) throw std::runtime_error(path + ": trailing bytes");
  return t;
}

}  // namespace r2i::embedding
