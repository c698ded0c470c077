#include "retro/datapipe/wordpiece.hpp"

#include <cctype>

namespace retro {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<CharSpan> pre_tokenize(std::string_view text) {
  std::vector<CharSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    if (is_punct(text[i])) {
      spans.push_back({i, i + 1});
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i]) && !is_punct(text[i])) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

Tokenized wordpiece_tokenize(std::string_view text, const Vocab& vocab) {
  Tokenized out;
  for (const auto& word_span : pre_tokenize(text)) {
    const std::string word = ascii_lower(text.substr(word_span.begin, word_span.end - word_span.begin));
    std::vector<std::string> pieces;
    std::vector<CharSpan> spans;
    bool failed = word.size() > kMaxCharsPerWord;
    std::size_t start = 0;
    while (!failed && start < word.size()) {
      std::size_t end = word.size();
      bool matched = false;
      while (end > start) {
        if (end == word.size() || !is_continuation_byte(word[end])) {
          std::string candidate = word.substr(start, end - start);
          if (start > 0) candidate.insert(0, kContinuationPrefix);
          if (vocab.contains(candidate)) {
            pieces.push_back(std::move(candidate));
            spans.push_back({word_span.begin + start, word_span.begin + end});
            matched = true;
            break;
          }
        }
        --end;
      }
      if (!matched) failed = true;
      start = end;
    }
    if (failed) {
      out.tokens.emplace_back(kUnkToken);
      out.spans.push_back(word_span);
    } else {
      out.tokens.insert(out.tokens.end(), pieces.begin(), pieces.end());
      out.spans.insert(out.spans.end(), spans.begin(), spans.end());
    }
  }
  return out;
}

}  // namespace retro
