#include "retro/evaluation/mcnemar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "retro/errors.hpp"

namespace retro {

std::string to_string(McNemarMethod m) {
  return m == McNemarMethod::exact_binomial ? "exact_binomial" : "chi_square_corrected";
}

double binomial_upper_tail(std::size_t n, std::size_t k) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  // log C(n,i) - n log 2, summed in log space so large n does not underflow
  // term by term.
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  std::vector<double> logs;
  logs.reserve(n - k + 1);
  for (std::size_t i = k; i <= n; ++i) {
    logs.push_back(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                   std::lgamma(static_cast<double>(n - i) + 1) + log_half_n);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - top);
  return std::min(1.0, std::exp(top + std::log(acc)));
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c, std::optional<McNemarMethod> method) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const std::size_t n = b + c;
  r.method = method.value_or(n >= kChiSquareMinDiscordant ? McNemarMethod::chi_square_corrected
                                                          : McNemarMethod::exact_binomial);
  if (n == 0) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c));
  const double corrected = std::max(0.0, diff - 1.0);
  r.statistic = corrected * corrected / static_cast<double>(n);
  if (r.method == McNemarMethod::exact_binomial) {
    r.p_value = std::min(1.0, 2.0 * binomial_upper_tail(n, std::max(b, c)));
  } else {
    // survival function of chi-square with one degree of freedom
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
  }
  return r;
}

McNemarResult mcnemar_test(std::span<const int> correct_a, std::span<const int> correct_b,
                           std::optional<McNemarMethod> method) {
  if (correct_a.size() != correct_b.size()) {
    throw AlignmentError("mcnemar: " + std::to_string(correct_a.size()) + " outcomes for A but " +
                          std::to_string(correct_b.size()) + " for B");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    const int a = correct_a[i], bb = correct_b[i];
    if ((a != 0 && a != 1) || (bb != 0 && bb != 1)) {
      throw EvaluationError("mcnemar: outcome at index " + std::to_string(i) + " is not 0/1");
    }
    if (a == 1 && bb == 0) ++b;
    if (a == 0 && bb == 1) ++c;
  }
  return mcnemar_from_counts(b, c, method);
}

}  // namespace retro
