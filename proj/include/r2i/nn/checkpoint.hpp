#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2i/nn/layers.hpp"
#include "r2i/nn/optim.hpp"

namespace r2i::nn {

// Checkpoint layout (little-endian):
//   char[8]  magic "R2ICKPT\0"
//   u32      version
//   u32      metadata length, then UTF-8 JSON metadata
//   u32      block count
//   per block: u32 name length, name, u32 rank, u32 dims[rank], f32 data[prod(dims)]
//   u64      FNV-1a hash of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> blocks;

  const Tensor& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws on bad magic, version mismatch (naming both versions), truncation or
/// hash mismatch.
Checkpoint read_checkpoint(const std::string& path);

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params);
/// Copies values into an existing set; names and shapes must match exactly.
void load_parameters(const Checkpoint& ckpt, const std::string& prefix, ParameterSet& params);

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params, const Adam& opt);
void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params, Adam& opt);

}  // namespace r2i::nn
