#pragma once

// File formats.
//
// Tensor container ("FVT1"), little-endian:
//   bytes 0..3   magic "FVT1"
//   byte  4      dtype (0 = float32, 1 = float64)
//   byte  5      ndim (>= 1)
//   bytes 6..7   reserved, zero
//   ndim x u32   dims
//   payload      row-major elements
//
// Configs are "key = value" lines; '#' starts a comment. Manifests are
// "path<TAB>label" lines. Checkpoints are a metadata container followed by
// one container per backbone parameter.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "freqmask/backbone.hpp"
#include "freqmask/sampler.hpp"
#include "freqmask/scene.hpp"
#include "freqmask/tensor.hpp"

namespace freqmask::io {

// Malformed file contents.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure (cannot open, cannot write).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::array<char, 4> kMagic{'F', 'V', 'T', '1'};

inline std::size_t element_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Tensor& t, Dtype dtype = Dtype::F64) {
  if (t.rank() > 255) throw FormatError("container supports at most 255 dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + element_size(dtype) * t.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  out.push_back(0);
  out.push_back(0);
  for (auto d : t.dims()) {
    if (d > 0xffffffffu) throw FormatError("dimension exceeds u32 range");
    detail::put_le(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.values()) {
    if (dtype == Dtype::F32) {
      detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

struct Decoded {
  Tensor tensor;
  Dtype dtype = Dtype::F64;
};

// Decodes one container starting at `offset`; advances `offset` past it.
inline Decoded decode(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  auto need = [&](std::size_t n) {
    if (bytes.size() - offset < n) throw FormatError("truncated container");
  };
  need(8);
  if (std::memcmp(bytes.data() + offset, kMagic.data(), 4) != 0) {
    throw FormatError("bad magic bytes (expected FVT1)");
  }
  const std::uint8_t dt = bytes[offset + 4];
  if (dt > 1) throw FormatError("unknown dtype code " + std::to_string(dt));
  const auto dtype = static_cast<Dtype>(dt);
  const std::size_t ndim = bytes[offset + 5];
  if (ndim == 0) throw FormatError("container has zero dimensions");
  if (bytes[offset + 6] != 0 || bytes[offset + 7] != 0) throw FormatError("reserved bytes not zero");
  offset += 8;
  need(4 * ndim);
  Shape dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = detail::get_le<std::uint32_t>(bytes, offset + 4 * i);
    if (dims[i] == 0) throw FormatError("container has a zero extent");
  }
  offset += 4 * ndim;
  const std::size_t n = numel(dims);
  const std::size_t es = element_size(dtype);
  if (n > (bytes.size() - offset) / es) throw FormatError("truncated container payload");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = dtype == Dtype::F32
                    ? static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, offset + 4 * i)))
                    : std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, offset + 8 * i));
  }
  offset += n * es;
  return {Tensor(std::move(dims), std::move(values)), dtype};
}

inline Decoded decode(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  Decoded d = decode(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after container");
  return d;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Decoded read_tensor(const std::filesystem::path& path) { return decode(read_bytes(path)); }

inline void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype = Dtype::F64) {
  write_bytes(path, encode(t, dtype));
}

// --- key = value configs --------------------------------------------------

struct ConfigParseError : ConfigError {
  using ConfigError::ConfigError;
};

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigParseError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigParseError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigParseError("invalid value '" + s + "' for key '" + key + "'");
  }
  return v;
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigParseError("invalid boolean '" + s + "' for key '" + key + "'");
}

// Assigns known keys, rejects the rest.
class Binder {
 public:
  explicit Binder(KeyValues kv) : kv_(std::move(kv)) {}

  template <typename T>
  Binder& bind(const std::string& key, T& field) {
    if (auto it = kv_.find(key); it != kv_.end()) {
      field = parse_value<T>(key, it->second);
      kv_.erase(it);
    }
    return *this;
  }

  template <typename F>
  Binder& bind_with(const std::string& key, F&& parse) {
    if (auto it = kv_.find(key); it != kv_.end()) {
      parse(it->second);
      kv_.erase(it);
    }
    return *this;
  }

  void finish() const {
    if (!kv_.empty()) throw ConfigParseError("unknown config key '" + kv_.begin()->first + "'");
  }

 private:
  KeyValues kv_;
};

}  // namespace detail

struct RunConfig {
  double lambda_mask = 0.1;
  bool normalize_mask = true;
  SelectionMode sampler_mode = SelectionMode::Argmax;
  bool strict_paper_weights = false;
  std::uint64_t seed = 1;
  std::size_t T = 8;
  std::size_t frames_per_segment = 2;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t epochs = 30;

  SamplerOptions sampler() const { return {sampler_mode, strict_paper_weights, normalize_mask}; }
};

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  detail::Binder(parse_key_values(in))
      .bind("lambda_mask", c.lambda_mask)
      .bind("normalize_mask", c.normalize_mask)
      .bind_with("sampler_mode",
                 [&](const std::string& v) {
                   if (v == "argmax") {
                     c.sampler_mode = SelectionMode::Argmax;
                   } else if (v == "argmin") {
                     c.sampler_mode = SelectionMode::Argmin;
                   } else {
                     throw ConfigParseError("sampler_mode must be argmax or argmin, got '" + v + "'");
                   }
                 })
      .bind("strict_paper_weights", c.strict_paper_weights)
      .bind("seed", c.seed)
      .bind("T", c.T)
      .bind("frames_per_segment", c.frames_per_segment)
      .bind("lr", c.lr)
      .bind("momentum", c.momentum)
      .bind("weight_decay", c.weight_decay)
      .bind("epochs", c.epochs)
      .finish();
  if (c.T == 0 || c.frames_per_segment == 0) throw ConfigError("T and frames_per_segment must be >= 1");
  if (!(c.lambda_mask >= 0.0) || !(c.lr >= 0.0) || !(c.momentum >= 0.0) || !(c.weight_decay >= 0.0)) {
    throw ConfigError("rates and lambda_mask must be non-negative");
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_run_config(in);
}

inline MotionDatasetSpec parse_dataset_spec(std::istream& in) {
  MotionDatasetSpec s;
  detail::Binder(parse_key_values(in))
      .bind("num_classes", s.num_classes)
      .bind("train", s.train)
      .bind("eval", s.eval)
      .bind("T", s.segments)
      .bind("frames_per_segment", s.frames_per_segment)
      .bind("height", s.height)
      .bind("width", s.width)
      .bind("noise_sigma", s.noise_sigma)
      .bind("seed", s.seed)
      .finish();
  return s;
}

inline MotionDatasetSpec load_dataset_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec " + path.string());
  return parse_dataset_spec(in);
}

// --- manifest -------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  std::size_t label = 0;
};

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.path + "\t" + std::to_string(e.label) + "\n";
  return out;
}

inline std::vector<ManifestEntry> parse_manifest(std::istream& in) {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected path<TAB>label");
    }
    entries.push_back({line.substr(0, tab), detail::parse_value<std::size_t>("label", line.substr(tab + 1))});
  }
  return entries;
}

// --- checkpoint -----------------------------------------------------------

struct CheckpointMeta {
  BackboneShape shape;
  std::size_t T = 8;
  std::size_t height = 16;
  std::size_t width = 16;
};

inline std::vector<std::uint8_t> encode_checkpoint(const ToyBackbone& net, const CheckpointMeta& meta) {
  const auto& s = net.shape();
  const Tensor header(Shape{8}, std::vector<double>{
      static_cast<double>(s.in_channels), static_cast<double>(s.c1), static_cast<double>(s.c2),
      static_cast<double>(s.c3), static_cast<double>(s.num_classes), static_cast<double>(meta.T),
      static_cast<double>(meta.height), static_cast<double>(meta.width)});
  auto bytes = encode(header);
  for (const auto& p : net.parameters()) {
    const auto b = encode(p);
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  return bytes;
}

struct Checkpoint {
  CheckpointMeta meta;
  ToyBackbone net;
};

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  const Tensor h = decode(bytes, off).tensor;
  if (h.dims() != Shape{8}) throw FormatError("checkpoint header has wrong shape");
  auto u = [&](std::size_t i) { return static_cast<std::size_t>(h[i]); };
  CheckpointMeta meta{{u(0), u(1), u(2), u(3), u(4)}, u(5), u(6), u(7)};
  ToyBackbone net(meta.shape, 0);
  for (auto& p : net.parameters()) {
    Tensor t = decode(bytes, off).tensor;
    if (t.dims() != p.dims()) {
      throw FormatError("checkpoint parameter shape " + to_string(t.dims()) + " does not match " +
                        to_string(p.dims()));
    }
    p = std::move(t);
  }
  if (off != bytes.size()) throw FormatError("trailing bytes after checkpoint");
  return {meta, std::move(net)};
}

}  // namespace freqmask::io
