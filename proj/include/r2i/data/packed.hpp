#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "r2i/data/image.hpp"
#include "r2i/data/recipe.hpp"
#include "r2i/data/vocabulary.hpp"

namespace r2i::data {

// Packed dataset layout (little-endian, offsets are absolute file positions):
//
//   offset  field
//   0       char[8]  magic "R2IPACK\0"
//   8       u32      format version
//   12      u64      record count N
//   20      u32      base scale s
//   24      u32      vocabulary size (including PAD and UNK)
//   28      u32      max ingredients
//   32      u32      max instructions
//   36      u32      max words per instruction
//   40      u32      number of classes (0 when unlabeled)
//   44      u32      precomputed embedding dimension (0 when absent)
//   48      u64      vocabulary block offset
//   56      u64[N]   record offsets, strictly increasing
//   ...     records, each:
//             u32 id length, id bytes, u32 title length, title bytes,
//             i32 class label (-1 when absent),
//             i32[max ingredients] ingredient ids,
//             i32[max instructions * max words] instruction ids,
//             u8[s*s*3], u8[2s*2s*3], u8[4s*4s*3] RGB images (HWC)
//   ...     vocabulary block: for each id >= 2, u32 length + token bytes
inline constexpr std::uint32_t kPackVersion = 1;
inline constexpr std::size_t kPackHeaderSize = 56;

struct PackHeader {
  std::uint32_t version = kPackVersion;
  std::uint64_t count = 0;
  std::uint32_t base_scale = 0;
  std::uint32_t vocab_size = 0;
  TokenLimits limits;
  std::uint32_t num_classes = 0;
  std::uint32_t embedding_dim = 0;
  std::uint64_t vocab_offset = 0;
};

struct PackedRecord {
  std::string id;
  std::string title;
  int class_label = -1;
  TokenizedRecipe tokens;
  QuantizedMultiScale image;

  bool operator==(const PackedRecord&) const = default;
};

struct PackOptions {
  int base_scale = 64;
  TokenLimits limits;
  std::uint64_t seed = 0;
  bool augment = true;  // random crop + flip at pack time
};

struct PackSummary {
  std::string path;
  std::uint64_t count = 0;
  std::uint64_t dropped = 0;
  std::uint64_t bytes = 0;
  std::uint32_t num_classes = 0;
};

/// Returns the decoded image for a reference, or nullopt if it is missing.
using ImageLookup = std::function<std::optional<RawImage>(const std::string& ref)>;

/// Reads `<dir>/<ref>`; undecodable or missing files yield nullopt.
ImageLookup directory_images(const std::string& dir);

/// Records whose images are all missing are dropped with a warning. Each
/// record's augmentation stream is seeded from (seed, record index).
PackSummary pack_dataset(const std::vector<Recipe>& recipes, const ImageLookup& images, const Vocabulary& vocab,
                         const PackOptions& options, const std::string& out_path);

/// Read-only, memory-mapped view of a packed file. Records are decoded on
/// demand; concurrent `record()` calls are safe.
class PackedDataset {
 public:
  static PackedDataset open(const std::string& path);

  PackedDataset(PackedDataset&& o) noexcept;
  PackedDataset& operator=(PackedDataset&& o) noexcept;
  PackedDataset(const PackedDataset&) = delete;
  PackedDataset& operator=(const PackedDataset&) = delete;
  ~PackedDataset();

  const PackHeader& header() const { return header_; }
  std::size_t size() const { return static_cast<std::size_t>(header_.count); }
  int base_scale() const { return static_cast<int>(header_.base_scale); }
  const Vocabulary& vocabulary() const { return vocab_; }
  const std::string& path() const { return path_; }

  PackedRecord record(std::size_t i) const;
  std::uint64_t offset(std::size_t i) const;

 private:
  PackedDataset() = default;
  void release();

  std::string path_;
  const std::uint8_t* base_ = nullptr;
  std::size_t length_ = 0;
  PackHeader header_;
  Vocabulary vocab_;
};

inline PackedDataset load_packed(const std::string& path) { return PackedDataset::open(path); }

/// Streams every record front to back with buffered reads, independent of
/// the mapped random-access path.
void read_packed_sequential(const std::string& path, const std::function<void(std::size_t, const PackedRecord&)>& fn);

}  // namespace r2i::data
