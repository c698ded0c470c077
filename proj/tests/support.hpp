#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "retro/numerics/ops.hpp"

namespace testing {

inline retro::Tensor random_tensor(retro::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                   bool requires_grad = true) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(retro::shape_size(shape));
  for (auto& x : v) x = u(rng);
  return retro::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("retro_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
