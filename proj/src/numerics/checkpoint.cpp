#include "retro/numerics/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "retro/errors.hpp"

namespace retro {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'E', 'T', 'R', 'O', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw DataError("checkpoint " + path.string() + ": truncated file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::string read_string(std::istream& in, std::uint32_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) {
    throw DataError("checkpoint " + path.string() + ": truncated string");
  }
  return s;
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw ConfigError("checkpoint: missing tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
  out.write(checkpoint.metadata.data(), static_cast<std::streamsize>(checkpoint.metadata.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto extent : tensor.shape()) write_le<std::uint64_t>(out, extent);
    for (double v : tensor.data()) write_le<double>(out, v);
  }
  if (!out) throw RuntimeFailure("checkpoint: write to " + path.string() + " failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + ": unsupported version " +
                    std::to_string(version));
  }
  Checkpoint ck;
  ck.metadata = read_string(in, read_le<std::uint32_t>(in, path), path);
  const auto count = read_le<std::uint32_t>(in, path);
  ck.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = read_string(in, read_le<std::uint32_t>(in, path), path);
    Shape shape(read_le<std::uint32_t>(in, path));
    for (auto& extent : shape) extent = static_cast<std::size_t>(read_le<std::uint64_t>(in, path));
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = read_le<double>(in, path);
    nt.tensor = Tensor::from(std::move(shape), std::move(values));
    ck.tensors.push_back(std::move(nt));
  }
  return ck;
}

void assign_parameters(const Checkpoint& source, std::vector<NamedTensor>& targets) {
  for (auto& [name, tensor] : targets) {
    const Tensor& src = source.find(name);
    if (src.shape() != tensor.shape()) {
      throw ConfigError("checkpoint: tensor '" + name + "' has shape " + shape_string(src.shape()) +
                        ", model expects " + shape_string(tensor.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), tensor.mutable_data().begin());
  }
}

}  // namespace retro
