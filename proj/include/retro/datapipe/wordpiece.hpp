#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "retro/datapipe/vocab.hpp"

namespace retro {

// Half-open byte range into the source text.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  static constexpr CharSpan none() { return {kNone, kNone}; }
  bool valid() const { return begin != kNone; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Tokenized {
  std::vector<std::string> tokens;
  std::vector<CharSpan> spans;
};

// Whitespace split, then ASCII punctuation split into single characters.
// Text is not lowercased here; spans index the original string.
std::vector<CharSpan> pre_tokenize(std::string_view text);

// Greedy longest-match-first wordpiece segmentation of each pre-token
// (ASCII-lowercased for lookup). A pre-token with no full segmentation
// becomes one [UNK] spanning the whole pre-token.
Tokenized wordpiece_tokenize(std::string_view text, const Vocab& vocab);

std::string ascii_lower(std::string_view text);

}  // namespace retro
