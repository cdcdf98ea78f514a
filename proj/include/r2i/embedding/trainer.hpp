#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "r2i/data/packed.hpp"
#include "r2i/embedding/model.hpp"

namespace r2i::embedding {

struct TrainConfig {
  Variant variant = Variant::kNoReg;
  int embedding_dim = 0;  // 0 -> default_dim(variant)
  int num_classes = 0;    // 0 -> dataset header (REG only)
  double lambda = 0.02;   // weight of the semantic term
  double margin = 0.1;
  int epochs = 10;
  int batch_size = 8;
  float lr = 1e-3f;
  std::uint64_t seed = 0;
  int word_dim = 64;
  int ingredient_dim = 128;
  int instruction_dim = 128;
  int image_width = 16;
  std::string checkpoint_path;  // written after every epoch when set
};

struct StepLog {
  int epoch = 0;
  int step = 0;
  double alignment = 0.0;
  double semantic = 0.0;
  double total = 0.0;
  double accuracy = 0.0;  // REG: classifier accuracy over both modalities in the batch
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<StepLog> steps;
};

/// Loss total = alignment + lambda * semantic (REG only). Aborts with a
/// diagnostic on any non-finite loss.
TrainResult train_embedding(const data::PackedDataset& dataset, const TrainConfig& config);

/// Mean alignment loss over the whole dataset in fixed batches (no update).
double evaluate_alignment(const EmbeddingModel& model, const data::PackedDataset& dataset, int batch_size,
                          double margin);
/// Classifier accuracy on recipe embeddings of labeled records.
double classifier_accuracy(const EmbeddingModel& model, const data::PackedDataset& dataset);

// Embedding file layout (little-endian):
//   char[8] magic "R2IEMB\0\0", u32 version, u64 count, u32 dim, u8 variant (0 NOREG, 1 REG)
//   per record: u32 id length, id bytes, f32[dim]
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

struct EmbeddingRecord {
  std::string id;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingTable {
  Variant variant = Variant::kNoReg;
  int dim = 0;
  std::vector<EmbeddingRecord> records;

  const EmbeddingRecord* find(const std::string& id) const;
  bool operator==(const EmbeddingTable&) const = default;
};

/// One recipe embedding per record; duplicate ids are an error.
EmbeddingTable export_embeddings(const EmbeddingModel& model, const data::PackedDataset& dataset);
void write_embeddings(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::string& path);

}  // namespace r2i::embedding
