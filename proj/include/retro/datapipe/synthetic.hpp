#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retro/datapipe/squad.hpp"

namespace retro {

// Small fact-lookup corpus in SQuAD2.0 shape. Each passage states three
// facts ("Alice lives in Paris ."); answerable questions ask about one of
// them, unanswerable questions ask for a fact the passage does not state.
struct SyntheticOptions {
  std::size_t size = 64;
  double unanswerable_fraction = 0.5;
  std::uint64_t seed = 7;
  std::string qid_prefix = "syn";
};

std::vector<SquadExample> make_synthetic_squad(const SyntheticOptions& options);

// Answerability toy set that is linearly separable on question tokens:
// passages only state where people live or work; answerable questions ask
// exactly that, unanswerable ones ask what they like or own.
std::vector<SquadExample> make_separable_answerability_set(std::size_t size, std::uint64_t seed);

}  // namespace retro
