#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "retro/numerics/tensor.hpp"

namespace retro {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Binary checkpoint layout, all integers little-endian:
//
//   magic      8 bytes  "RETROCKP"
//   version    u32      (kCheckpointVersion)
//   meta_len   u32      followed by meta_len bytes of UTF-8 JSON metadata
//   count      u32      number of tensors
//   repeated count times:
//     name_len u32, name bytes
//     rank     u32, rank x u64 extents
//     values   product(extents) x IEEE-754 binary64
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;  // JSON document describing model kind and config
  std::vector<NamedTensor> tensors;

  const Tensor& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values from `source` into same-named, same-shaped `targets`.
void assign_parameters(const Checkpoint& source, std::vector<NamedTensor>& targets);

}  // namespace retro
