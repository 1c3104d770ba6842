#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ctxvec/embedder.hpp"
#include "ctxvec/errors.hpp"

namespace ctxvec {

// Binary model persistence. File layout:
//   bytes 0-3   magic "CTXV"
//   bytes 4-7   format version, u32 little-endian
//   bytes 8-15  header length H, u64 little-endian
//   H bytes     JSON header: {format_version, meta{model_config, tokenizer_hash},
//               tensors{name -> {dtype, shape, byte_offset, checksum}}}
//   rest        payload: tensor values, row-major, little-endian, packed in
//               header (sorted-name) order with contiguous offsets
// Round trips are bit-exact; every tensor carries an FNV-1a checksum.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xf];
  return s;
}

// Stable fingerprint of the tokenizer a model was trained with.
inline std::string tokenizer_hash(const Tokenizer& tok) {
  const std::string s = tok.to_json().dump();
  return hex64(fnv1a(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

namespace detail {

template <typename T>
struct dtype_name;
template <>
struct dtype_name<float> {
  static constexpr const char* value = "f32";
};
template <>
struct dtype_name<double> {
  static constexpr const char* value = "f64";
};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

template <typename T>
void put_scalar(std::string& out, T v) {
  if constexpr (sizeof(T) == 4)
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  else
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint64_t get_le(const unsigned char* p, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

template <typename T>
T get_scalar(const unsigned char* p) {
  if constexpr (sizeof(T) == 4)
    return std::bit_cast<T>(std::uint32_t(get_le(p, 4)));
  else
    return std::bit_cast<T>(get_le(p, 8));
}

// Duplicate-checked name->tensor view of a parameter list.
template <typename T>
std::map<std::string, Tensor<T>> by_name(const ParamList<T>& params) {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, t] : params)
    if (!out.emplace(name, t).second)
      throw ContractError("checkpoint: duplicate parameter name '" + name + "'");
  return out;
}

struct RawCheckpoint {
  nlohmann::json header;
  std::string payload;
};

inline RawCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || bytes.compare(0, 4, "CTXV") != 0)
    throw IoError("checkpoint: " + path + " is not a checkpoint file");
  const auto version = std::uint32_t(get_le(p + 4, 4));
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: format version " + std::to_string(version) +
                  " is incompatible (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t header_len = get_le(p + 8, 8);
  if (16 + header_len > bytes.size()) throw IoError("checkpoint: truncated header in " + path);
  RawCheckpoint raw;
  try {
    raw.header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (raw.header.value("format_version", 0u) != version)
    throw IoError("checkpoint: header format_version disagrees with file preamble");
  raw.payload = bytes.substr(16 + header_len);
  return raw;
}

}  // namespace detail

template <typename T>
void save_checkpoint(Embedder<T>& model, const std::string& path) {
  const auto params = detail::by_name(model.all_params());
  std::string payload;
  auto tensors = nlohmann::json::object();
  for (const auto& [name, t] : params) {
    std::string bytes;
    bytes.reserve(t.numel() * sizeof(T));
    for (const T v : t.data()) detail::put_scalar(bytes, v);
    nlohmann::json entry;
    entry["dtype"] = detail::dtype_name<T>::value;
    entry["shape"] = t.shape();
    entry["byte_offset"] = payload.size();
    entry["checksum"] =
        hex64(fnv1a(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
    tensors[name] = std::move(entry);
    payload += bytes;
  }
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["meta"] = {{"model_config", model.cfg.to_json()},
                    {"tokenizer_hash", tokenizer_hash(model.tok)}};
  header["tensors"] = std::move(tensors);
  const std::string h = header.dump();

  std::string out;
  out += "CTXV";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, h.size());
  out += h;
  out += payload;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("checkpoint: short write to " + path);
}

// Loads stored tensors into an existing model. The model must have exactly the
// stored parameter set; shapes are validated per tensor, payload per checksum.
template <typename T>
void load_checkpoint_into(Embedder<T>& model, const std::string& path) {
  const auto raw = detail::read_checkpoint_file(path);
  const std::string want_hash = raw.header.at("meta").at("tokenizer_hash");
  if (want_hash != tokenizer_hash(model.tok))
    throw IoError("checkpoint: saved with a different tokenizer (hash " + want_hash + ")");

  auto params = detail::by_name(model.all_params());
  const auto& tensors = raw.header.at("tensors");
  for (const auto& [name, t] : params)
    if (!tensors.contains(name))
      throw IoError("checkpoint: model tensor '" + name + "' missing from file");

  const auto* payload = reinterpret_cast<const unsigned char*>(raw.payload.data());
  for (const auto& [name, entry] : tensors.items()) {
    auto it = params.find(name);
    if (it == params.end())
      throw IoError("checkpoint: stored tensor '" + name + "' not present in model");
    Tensor<T>& t = it->second;
    const std::string dtype = entry.at("dtype");
    if (dtype != detail::dtype_name<T>::value)
      throw IoError("checkpoint: tensor '" + name + "' has dtype " + dtype + ", model expects " +
                    detail::dtype_name<T>::value);
    const std::vector<std::size_t> shape = entry.at("shape");
    if (shape != t.shape())
      throw DimError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                     ", model expects " + shape_str(t.shape()));
    const std::uint64_t offset = entry.at("byte_offset");
    const std::size_t nbytes = t.numel() * sizeof(T);
    if (offset + nbytes > raw.payload.size())
      throw IoError("checkpoint: payload truncated at tensor '" + name + "'");
    const std::string want_sum = entry.at("checksum");
    if (hex64(fnv1a(payload + offset, nbytes)) != want_sum)
      throw IoError("checkpoint: tensor '" + name + "' failed its checksum");
    auto& data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i)
      data[i] = detail::get_scalar<T>(payload + offset + i * sizeof(T));
  }
}

// Rebuilds a model from the stored config, validates the tokenizer against the
// stored hash, and fills in all parameters.
template <typename T>
Embedder<T> load_checkpoint(const std::string& path, Tokenizer tok) {
  const auto raw = detail::read_checkpoint_file(path);
  const auto cfg = ModelConfig::from_json(raw.header.at("meta").at("model_config"));
  auto model = Embedder<T>::make(cfg, std::move(tok));
  load_checkpoint_into(model, path);
  return model;
}

}  // namespace ctxvec
