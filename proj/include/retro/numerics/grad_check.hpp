#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "retro/numerics/tensor.hpp"

namespace retro {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise at most this many per parameter,
  // chosen with `seed`.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  // max over checked coordinates of |analytic - numeric| / max(1, |numeric|)
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of the scalar `loss` against central
// differences. `loss` must be a pure function of the parameter values.
GradCheckResult grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace retro
