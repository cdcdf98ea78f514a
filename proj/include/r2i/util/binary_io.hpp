#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

// All on-disk formats are little-endian; the host is required to match.
static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

namespace r2i::io {

/// Append-only byte buffer with typed little-endian writes.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put_span(std::span<const T> v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    bytes_.insert(bytes_.end(), p, p + v.size_bytes());
  }

  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  /// u32 length prefix followed by the bytes.
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_raw(s);
  }

  template <typename T>
  void patch(std::size_t offset, const T& v) {
    std::memcpy(bytes_.data() + offset, &v, sizeof(T));
  }

  std::size_t size() const { return bytes_.size(); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked cursor over a byte range. Every read past the end throws.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes, std::string context = "buffer")
      : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void get_into(std::span<T> out) {
    require(out.size_bytes());
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  std::string get_raw(std::size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::string get_string(std::size_t max_len = 1u << 20) {
    auto n = get<std::uint32_t>();
    if (n > max_len) throw std::runtime_error(context_ + ": string length " + std::to_string(n) + " too large");
    return get_raw(n);
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > bytes_.size()) throw std::runtime_error(context_ + ": seek out of range");
    pos_ = pos;
  }

 private:
  void require(std::size_t n) const {
    if (n > bytes_.size() - pos_)
      throw std::runtime_error(context_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                               std::to_string(pos_) + ", have " + std::to_string(bytes_.size() - pos_) + ")");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes to a temporary sibling then renames; throws on any I/O failure.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace r2i::io
