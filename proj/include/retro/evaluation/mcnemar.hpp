#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace retro {

enum class McNemarMethod { exact_binomial, chi_square_corrected };
std::string to_string(McNemarMethod m);

struct McNemarResult {
  std::size_t b = 0;  // A right, B wrong
  std::size_t c = 0;  // A wrong, B right
  // Continuity-corrected chi-square max(0, |b-c| - 1)^2 / (b+c); 0 when b+c == 0.
  double statistic = 0.0;
  double p_value = 1.0;
  McNemarMethod method = McNemarMethod::exact_binomial;
  bool degenerate = false;  // no discordant pairs
};

// Discordant count at or above which the automatic choice switches to the
// chi-square approximation.
inline constexpr std::size_t kChiSquareMinDiscordant = 25;

// P[Bin(n, 1/2) >= k]
double binomial_upper_tail(std::size_t n, std::size_t k);

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c,
                                  std::optional<McNemarMethod> method = std::nullopt);

// Paired per-question correctness (0/1) of systems A and B, aligned by
// index. Without an explicit method: exact binomial below
// kChiSquareMinDiscordant discordant pairs, chi-square otherwise.
McNemarResult mcnemar_test(std::span<const int> correct_a, std::span<const int> correct_b,
                           std::optional<McNemarMethod> method = std::nullopt);

}  // namespace retro
