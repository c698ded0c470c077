#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retro {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kContinuationPrefix = "##";

// Subword vocabulary. Ids are dense 0..size()-1; the four special tokens
// appear exactly once. Continuation pieces carry the "##" prefix.
class Vocab {
 public:
  static Vocab from_tokens(std::vector<std::string> tokens);
  // One token per line, line number (0-based) = id.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Top-K lowercased whole words by frequency (ties broken alphabetically),
  // plus every character seen, both as a word-initial and a "##" piece.
  static Vocab build(std::span<const std::string> corpus, std::size_t top_k_words);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  // -1 when absent.
  int lookup(std::string_view token) const;
  bool contains(std::string_view token) const { return lookup(token) >= 0; }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1;
};

}  // namespace retro
