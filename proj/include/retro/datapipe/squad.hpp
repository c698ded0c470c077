#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace retro {

struct GoldAnswer {
  std::string text;
  // As stored in the file: a code-point index into the passage.
  std::size_t char_start = 0;
  // The same position as a byte offset into the UTF-8 passage.
  std::size_t byte_start = 0;
};

struct SquadExample {
  std::string qid;
  std::string passage;
  std::string question;
  std::vector<GoldAnswer> gold_answers;
  bool is_impossible = false;
};

// Reads SQuAD2.0 JSON: {data:[{paragraphs:[{context, qas:[...]}]}]}.
// One example per qa entry, in file order.
std::vector<SquadExample> load_squad(const std::filesystem::path& path);
std::vector<SquadExample> parse_squad(const std::string& json_text, const std::string& origin);

// Writes the examples back out, grouping consecutive examples that share a
// passage into one paragraph.
void save_squad(const std::filesystem::path& path, const std::vector<SquadExample>& examples);

std::size_t byte_offset_of_codepoint(const std::string& text, std::size_t codepoint_index);
std::size_t codepoint_index_of_byte(const std::string& text, std::size_t byte_offset);

}  // namespace retro
