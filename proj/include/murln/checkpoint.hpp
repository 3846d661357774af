#pragma once

// Checkpoint layout (all integers and floats little-endian):
//
//   magic        8 bytes   "MURLNCKP"
//   version      u32       currently 1
//   config       u64 transform_dim, dc_hidden_dim, rel_hidden_dim,
//                    visual_dim, embedding_dim, num_predicates, num_objects
//                u8  use_visual, use_spatial, use_external, use_internal,
//                    fusion, dc_signal, im_mode
//                f64 alpha, lambda1, lambda2
//                u64 init_seed
//   block count  u32
//   per block    u32 name length, name bytes (UTF-8),
//                u64 value count, values as f64
//
// Blocks follow Model::parameters() order: per network (union, subject,
// object), the fusion layers, then DC hidden/output, then relation
// hidden/output; each layer contributes its weight (column-major) then bias.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "murln/errors.hpp"
#include "murln/model.hpp"

namespace murln {

inline constexpr std::array<char, 8> kCheckpointMagic = {'M', 'U', 'R', 'L', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace le {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw CheckpointError("unexpected end of checkpoint");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace le

inline void write_model_config(std::ostream& out, const ModelConfig& c) {
  for (std::uint64_t v : {c.transform_dim, c.dc_hidden_dim, c.rel_hidden_dim, c.visual_dim,
                          c.embedding_dim, c.num_predicates, c.num_objects}) {
    le::put<std::uint64_t>(out, v);
  }
  for (std::uint8_t v : {static_cast<std::uint8_t>(c.use_visual),
                         static_cast<std::uint8_t>(c.use_spatial),
                         static_cast<std::uint8_t>(c.use_external),
                         static_cast<std::uint8_t>(c.use_internal),
                         static_cast<std::uint8_t>(c.fusion), static_cast<std::uint8_t>(c.dc_signal),
                         static_cast<std::uint8_t>(c.im_mode)}) {
    le::put<std::uint8_t>(out, v);
  }
  le::put<double>(out, c.alpha);
  le::put<double>(out, c.lambda1);
  le::put<double>(out, c.lambda2);
  le::put<std::uint64_t>(out, c.init_seed);
}

inline ModelConfig read_model_config(std::istream& in) {
  ModelConfig c;
  auto u64 = [&] { return static_cast<std::size_t>(le::get<std::uint64_t>(in)); };
  c.transform_dim = u64();
  c.dc_hidden_dim = u64();
  c.rel_hidden_dim = u64();
  c.visual_dim = u64();
  c.embedding_dim = u64();
  c.num_predicates = u64();
  c.num_objects = u64();
  auto flag = [&] {
    const auto v = le::get<std::uint8_t>(in);
    if (v > 1) throw CheckpointError("corrupt boolean in checkpoint header");
    return v == 1;
  };
  c.use_visual = flag();
  c.use_spatial = flag();
  c.use_external = flag();
  c.use_internal = flag();
  const auto fusion = le::get<std::uint8_t>(in);
  const auto signal = le::get<std::uint8_t>(in);
  if (fusion > 1 || signal > 1) throw CheckpointError("corrupt enum in checkpoint header");
  c.fusion = static_cast<FusionMode>(fusion);
  c.dc_signal = static_cast<DcSignal>(signal);
  c.im_mode = flag();
  c.alpha = le::get<double>(in);
  c.lambda1 = le::get<double>(in);
  c.lambda2 = le::get<double>(in);
  c.init_seed = le::get<std::uint64_t>(in);
  return c;
}

inline void save_checkpoint(std::ostream& out, Model& model) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  le::put<std::uint32_t>(out, kCheckpointVersion);
  write_model_config(out, model.config());
  const auto blocks = model.parameters();
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    le::put<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    le::put<std::uint64_t>(out, b.value.size());
    for (double v : b.value) le::put<double>(out, v);
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

inline Model load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = le::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const ModelConfig config = read_model_config(in);
  try {
    config.validate();
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid model config in checkpoint: ") + e.what());
  }
  Model model(config);
  auto blocks = model.parameters();
  const auto count = le::get<std::uint32_t>(in);
  if (count != blocks.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " blocks, model expects " +
                          std::to_string(blocks.size()));
  }
  for (auto& b : blocks) {
    const auto len = le::get<std::uint32_t>(in);
    if (len > 4096) throw CheckpointError("corrupt block name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw CheckpointError("unexpected end of checkpoint");
    if (name != b.name) {
      throw CheckpointError("block '" + name + "' found where '" + b.name + "' was expected");
    }
    const auto n = le::get<std::uint64_t>(in);
    if (n != b.value.size()) {
      throw CheckpointError("block '" + name + "' has " + std::to_string(n) +
                            " values, model expects " + std::to_string(b.value.size()));
    }
    for (auto& v : b.value) v = le::get<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after checkpoint");
  }
  return model;
}

inline void save_checkpoint(const std::string& path, Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  save_checkpoint(out, model);
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace murln
