#include "r2i/data/packed.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "r2i/util/binary_io.hpp"
#include "r2i/util/log.hpp"

namespace r2i::data {

namespace {

constexpr char kMagic[8] = {'R', '2', 'I', 'P', 'A', 'C', 'K', '\0'};

// Same interface as io::ByteReader, over an input stream.
class StreamReader {
 public:
  StreamReader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

  template <typename T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  template <typename T>
  void get_into(std::span<T> out) {
    read(reinterpret_cast<char*>(out.data()), out.size_bytes());
  }
  std::string get_raw(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::string get_string(std::size_t max_len = 1u << 20) {
    auto n = get<std::uint32_t>();
    if (n > max_len) throw std::runtime_error(context_ + ": string length too large");
    return get_raw(n);
  }

 private:
  void read(char* dst, std::size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) throw std::runtime_error(context_ + ": truncated");
  }
  std::istream& in_;
  std::string context_;
};

template <typename Src>
PackHeader decode_header(Src& src, const std::string& path) {
  std::string magic = src.get_raw(8);
  if (std::memcmp(magic.data(), kMagic, 8) != 0) throw std::runtime_error(path + ": not a packed dataset (bad magic)");
  PackHeader h;
  h.version = src.template get<std::uint32_t>();
  if (h.version != kPackVersion)
    throw std::runtime_error(path + ": packed format version " + std::to_string(h.version) +
                             " does not match supported version " + std::to_string(kPackVersion));
  h.count = src.template get<std::uint64_t>();
  h.base_scale = src.template get<std::uint32_t>();
  h.vocab_size = src.template get<std::uint32_t>();
  h.limits.max_ingredients = static_cast<int>(src.template get<std::uint32_t>());
  h.limits.max_instructions = static_cast<int>(src.template get<std::uint32_t>());
  h.limits.max_words = static_cast<int>(src.template get<std::uint32_t>());
  h.num_classes = src.template get<std::uint32_t>();
  h.embedding_dim = src.template get<std::uint32_t>();
  h.vocab_offset = src.template get<std::uint64_t>();
  if (h.base_scale == 0 || h.base_scale > 4096 || h.limits.max_ingredients < 1 || h.limits.max_instructions < 1 ||
      h.limits.max_words < 1)
    throw std::runtime_error(path + ": implausible header values");
  return h;
}

template <typename Src>
PackedRecord decode_record(Src& src, const PackHeader& h) {
  PackedRecord r;
  r.id = src.get_string();
  r.title = src.get_string();
  r.class_label = src.template get<std::int32_t>();
  r.tokens.limits = h.limits;
  r.tokens.ingredients.resize(h.limits.max_ingredients);
  r.tokens.instructions.resize(static_cast<std::size_t>(h.limits.max_instructions) * h.limits.max_words);
  src.get_into(std::span<int>(r.tokens.ingredients));
  src.get_into(std::span<int>(r.tokens.instructions));
  r.image.base_scale = static_cast<int>(h.base_scale);
  for (int k = 0; k < 3; ++k) {
    int side = static_cast<int>(h.base_scale) << k;
    RgbImage& img = r.image.scales[k];
    img.width = img.height = side;
    img.pixels.resize(static_cast<std::size_t>(side) * side * 3);
    src.get_into(std::span<std::uint8_t>(img.pixels));
  }
  return r;
}

void encode_record(io::ByteWriter& w, const PackedRecord& r) {
  w.put_string(r.id);
  w.put_string(r.title);
  w.put(static_cast<std::int32_t>(r.class_label));
  w.put_span(std::span<const int>(r.tokens.ingredients));
  w.put_span(std::span<const int>(r.tokens.instructions));
  for (const auto& img : r.image.scales) w.put_span(std::span<const std::uint8_t>(img.pixels));
}

}  // namespace

ImageLookup directory_images(const std::string& dir) {
  return [dir](const std::string& ref) -> std::optional<RawImage> {
    auto p = std::filesystem::path(dir) / ref;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
    try {
      return decode_image_file(p.string());
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
}

PackSummary pack_dataset(const std::vector<Recipe>& recipes, const ImageLookup& images, const Vocabulary& vocab,
                         const PackOptions& options, const std::string& out_path) {
  if (options.base_scale < 1) throw std::invalid_argument("base_scale must be positive");
  std::vector<PackedRecord> records;
  PackSummary summary;
  summary.path = out_path;
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    const Recipe& rec = recipes[i];
    std::optional<RawImage> raw;
    for (const auto& ref : rec.image_refs) {
      raw = images(ref);
      if (raw) break;
    }
    if (!raw) {
      ++summary.dropped;
      log::warn({{"stage", "prep"}, {"recipe", rec.id}, {"reason", "no decodable image"}});
      continue;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    PackedRecord pr;
    pr.id = rec.id;
    pr.title = rec.title;
    pr.class_label = rec.class_label.value_or(-1);
    pr.tokens = tokenize_recipe(rec, vocab, options.limits);
    pr.image = preprocess_image_quantized(*raw, options.base_scale, options.augment, rng);
    if (pr.class_label >= 0) summary.num_classes = std::max<std::uint32_t>(summary.num_classes, pr.class_label + 1);
    records.push_back(std::move(pr));
  }

  io::ByteWriter w;
  w.put_raw(std::string_view(kMagic, 8));
  w.put(kPackVersion);
  w.put(static_cast<std::uint64_t>(records.size()));
  w.put(static_cast<std::uint32_t>(options.base_scale));
  w.put(static_cast<std::uint32_t>(vocab.size()));
  w.put(static_cast<std::uint32_t>(options.limits.max_ingredients));
  w.put(static_cast<std::uint32_t>(options.limits.max_instructions));
  w.put(static_cast<std::uint32_t>(options.limits.max_words));
  w.put(summary.num_classes);
  w.put(std::uint32_t{0});
  const std::size_t vocab_offset_pos = w.size();
  w.put(std::uint64_t{0});
  const std::size_t table_pos = w.size();
  for (std::size_t i = 0; i < records.size(); ++i) w.put(std::uint64_t{0});
  for (std::size_t i = 0; i < records.size(); ++i) {
    w.patch(table_pos + i * 8, static_cast<std::uint64_t>(w.size()));
    encode_record(w, records[i]);
  }
  w.patch(vocab_offset_pos, static_cast<std::uint64_t>(w.size()));
  for (std::size_t id = 2; id < vocab.size(); ++id) w.put_string(vocab.token(static_cast<int>(id)));

  io::write_file_atomic(out_path, w.bytes());
  summary.count = records.size();
  summary.bytes = w.size();
  return summary;
}

PackedDataset PackedDataset::open(const std::string& path) {
  PackedDataset ds;
  ds.path_ = path;
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw std::runtime_error("cannot open packed dataset " + path + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot stat " + path);
  }
  ds.length_ = static_cast<std::size_t>(st.st_size);
  if (ds.length_ < kPackHeaderSize) {
    ::close(fd);
    throw std::runtime_error(path + ": file too small to be a packed dataset");
  }
  void* p = ::mmap(nullptr, ds.length_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) throw std::runtime_error("cannot map " + path + ": " + std::strerror(errno));
  ds.base_ = static_cast<const std::uint8_t*>(p);

  io::ByteReader r(std::span(ds.base_, ds.length_), path);
  ds.header_ = decode_header(r, path);
  const auto& h = ds.header_;
  if (h.count > (ds.length_ - kPackHeaderSize) / 8) throw std::runtime_error(path + ": record count exceeds file size");
  const std::uint64_t table_end = kPackHeaderSize + h.count * 8;
  if (h.vocab_offset < table_end || h.vocab_offset > ds.length_)
    throw std::runtime_error(path + ": vocabulary offset out of bounds");
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < h.count; ++i) {
    std::uint64_t off = ds.offset(i);
    if (off < table_end || off >= h.vocab_offset || (i > 0 && off <= prev))
      throw std::runtime_error(path + ": record offset table is not strictly increasing and in bounds at index " +
                               std::to_string(i));
    prev = off;
  }
  r.seek(h.vocab_offset);
  for (std::uint32_t id = 2; id < h.vocab_size; ++id) ds.vocab_.add(r.get_string());
  if (ds.vocab_.size() != h.vocab_size) throw std::runtime_error(path + ": vocabulary has duplicate tokens");
  return ds;
}

PackedDataset::PackedDataset(PackedDataset&& o) noexcept { *this = std::move(o); }

PackedDataset& PackedDataset::operator=(PackedDataset&& o) noexcept {
  if (this != &o) {
    release();
    path_ = std::move(o.path_);
    base_ = std::exchange(o.base_, nullptr);
    length_ = std::exchange(o.length_, 0);
    header_ = o.header_;
    vocab_ = std::move(o.vocab_);
  }
  return *this;
}

PackedDataset::~PackedDataset() { release(); }

void PackedDataset::release() {
  if (base_) ::munmap(const_cast<std::uint8_t*>(base_), length_);
  base_ = nullptr;
}

std::uint64_t PackedDataset::offset(std::size_t i) const {
  if (i >= header_.count) throw std::out_of_range("record index " + std::to_string(i) + " out of range");
  std::uint64_t off;
  std::memcpy(&off, base_ + kPackHeaderSize + i * 8, 8);
  return off;
}

PackedRecord PackedDataset::record(std::size_t i) const {
  std::uint64_t begin = offset(i);
  std::uint64_t end = i + 1 < header_.count ? offset(i + 1) : header_.vocab_offset;
  io::ByteReader r(std::span(base_ + begin, end - begin), path_ + " record " + std::to_string(i));
  PackedRecord rec = decode_record(r, header_);
  if (r.remaining() != 0) throw std::runtime_error(path_ + ": record " + std::to_string(i) + " has trailing bytes");
  return rec;
}

void read_packed_sequential(const std::string& path, const std::function<void(std::size_t, const PackedRecord&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open packed dataset " + path);
  StreamReader src(in, path);
  PackHeader h = decode_header(src, path);
  for (std::uint64_t i = 0; i < h.count; ++i) src.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < h.count; ++i) fn(static_cast<std::size_t>(i), decode_record(src, h));
}

}  // namespace r2i::data
