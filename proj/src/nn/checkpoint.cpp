#include "r2i/nn/checkpoint.hpp"

#include <stdexcept>

#include "r2i/util/binary_io.hpp"

namespace r2i::nn {

namespace {
constexpr char kMagic[8] = {'R', '2', 'I', 'C', 'K', 'P', 'T', '\0'};
}

const Tensor& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, t] : blocks)
    if (n == name) return t;
  throw std::runtime_error("checkpoint has no block named '" + name + "'");
}

bool Checkpoint::has_block(const std::string& name) const {
  for (const auto& [n, t] : blocks)
    if (n == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.put_raw(std::string_view(kMagic, 8));
  w.put(kCheckpointVersion);
  w.put_string(ckpt.meta.dump());
  w.put(static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, t] : ckpt.blocks) {
    w.put_string(name);
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.put(static_cast<std::uint32_t>(d));
    w.put_span(std::span<const float>(t.data));
  }
  w.put(io::fnv1a64(w.bytes()));
  io::write_file_atomic(path, w.bytes());
}

Checkpoint read_checkpoint(const std::string& path) {
  auto bytes = io::read_file(path);
  if (bytes.size() < 8 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
  io::ByteReader r(bytes, path);
  r.seek(8);
  auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error(path + ": checkpoint version " + std::to_string(version) +
                             " does not match supported version " + std::to_string(kCheckpointVersion));
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, bytes.data() + bytes.size() - 8, 8);
  if (stored_hash != io::fnv1a64(std::span(bytes.data(), bytes.size() - 8)))
    throw std::runtime_error(path + ": checkpoint is corrupted (hash mismatch)");

  io::ByteReader body(std::span(bytes.data(), bytes.size() - 8), path);
  body.seek(12);
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(body.get_string(64u << 20));
  auto count = body.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = body.get_string();
    auto rank = body.get<std::uint32_t>();
    if (rank > 8) throw std::runtime_error(path + ": block '" + name + "' has implausible rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(body.get<std::uint32_t>()));
    Tensor t(shape);
    body.get_into(std::span<float>(t.data));
    ckpt.blocks.emplace_back(std::move(name), std::move(t));
  }
  if (body.remaining() != 0) throw std::runtime_error(path + ": trailing bytes after last block");
  return ckpt;
}

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) ckpt.blocks.emplace_back(prefix + params.name(i), params[i].value());
}

void load_parameters(const Checkpoint& ckpt, const std::string& prefix, ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& src = ckpt.block(prefix + params.name(i));
    Tensor& dst = params[i].mutable_value();
    if (src.shape != dst.shape)
      throw std::runtime_error("parameter " + prefix + params.name(i) + " shape " + shape_str(src.shape) +
                               " does not match model shape " + shape_str(dst.shape));
    dst.data = src.data;
  }
}

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params, const Adam& opt) {
  ckpt.meta[prefix + "steps"] = opt.steps();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.blocks.emplace_back(prefix + "m/" + params.name(i), Tensor(params[i].shape(), opt.first_moments()[i]));
    ckpt.blocks.emplace_back(prefix + "v/" + params.name(i), Tensor(params[i].shape(), opt.second_moments()[i]));
  }
}

void load_optimizer(const Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params, Adam& opt) {
  opt.set_steps(ckpt.meta.at(prefix + "steps").get<std::int64_t>());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = ckpt.block(prefix + "m/" + params.name(i)).data;
    opt.first_moments()[i].assign(m.begin(), m.end());
    const auto& v = ckpt.block(prefix + "v/" + params.name(i)).data;
    opt.second_moments()[i].assign(v.begin(), v.end());
  }
}

}  // namespace r2i::nn
