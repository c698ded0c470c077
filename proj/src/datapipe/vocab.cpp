#include "retro/datapipe/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "retro/datapipe/wordpiece.hpp"
#include "retro/errors.hpp"

namespace retro {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<int>(i));
    if (!inserted) {
      throw ConfigError("vocab: token '" + v.tokens_[i] + "' appears more than once (ids " +
                        std::to_string(it->second) + " and " + std::to_string(i) + ")");
    }
  }
  auto special = [&](std::string_view name) {
    const int id = v.lookup(name);
    if (id < 0) throw ConfigError("vocab: missing special token " + std::string(name));
    return id;
  };
  v.pad_ = special(kPadToken);
  v.unk_ = special(kUnkToken);
  v.cls_ = special(kClsToken);
  v.sep_ = special(kSepToken);
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("vocab: cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("vocab: cannot open " + path.string() + " for writing");
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t top_k_words) {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> chars;
  for (const auto& text : corpus) {
    for (const auto& span : pre_tokenize(text)) {
      const std::string word = ascii_lower(std::string_view(text).substr(span.begin, span.end - span.begin));
      ++counts[word];
      for (std::size_t i = 0; i < word.size();) {
        const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
        chars.insert(word.substr(i, len));
        i += len;
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k_words) ranked.resize(top_k_words);

  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken),
                                  std::string(kClsToken), std::string(kSepToken)};
  std::set<std::string> seen(tokens.begin(), tokens.end());
  auto push = [&](std::string t) {
    if (seen.insert(t).second) tokens.push_back(std::move(t));
  };
  for (auto& [word, count] : ranked) push(word);
  for (const auto& c : chars) push(c);
  for (const auto& c : chars) push(std::string(kContinuationPrefix) + c);
  return from_tokens(std::move(tokens));
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocab: id " + std::to_string(id) + " out of range for " +
                     std::to_string(tokens_.size()) + " tokens");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::lookup(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

}  // namespace retro
