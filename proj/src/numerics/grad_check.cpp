#include "retro/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "retro/errors.hpp"

namespace retro {

namespace {

double evaluate(const std::function<Tensor()>& loss, const char* phase) {
  const double value = loss().item();
  if (!std::isfinite(value)) {
    throw RuntimeFailure(std::string("grad_check aborted: non-finite loss during ") + phase);
  }
  return value;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.zero_grad();
  {
    Tensor root = loss();
    if (!std::isfinite(root.item())) {
      throw RuntimeFailure("grad_check aborted: non-finite loss at the base point");
    }
    root.backward();
  }

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.empty() ? std::vector<double>(p.size(), 0.0)
                                    : std::vector<double>(g.begin(), g.end()));
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double saved = values[idx];
      values[idx] = saved + options.step;
      const double plus = evaluate(loss, "the forward perturbation");
      values[idx] = saved - options.step;
      const double minus = evaluate(loss, "the backward perturbation");
      values[idx] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = std::abs(analytic[pi][idx] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.coords_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_index = idx;
      }
    }
  }
  return result;
}

}  // namespace retro
