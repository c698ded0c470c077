#include "retro/datapipe/squad.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "retro/errors.hpp"

namespace retro {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* field, const std::string& where) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw SchemaError("squad: missing required field '" + std::string(field) + "' in " + where);
  }
  return obj.at(field);
}

std::string require_string(const json& obj, const char* field, const std::string& where) {
  const json& v = require(obj, field, where);
  if (!v.is_string()) {
    throw SchemaError("squad: field '" + std::string(field) + "' must be a string in " + where);
  }
  return v.get<std::string>();
}

}  // namespace

std::size_t byte_offset_of_codepoint(const std::string& text, std::size_t codepoint_index) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
    if (seen == codepoint_index) return i;
    ++seen;
  }
  if (seen == codepoint_index) return text.size();
  throw IndexError("code-point index " + std::to_string(codepoint_index) + " beyond text end");
}

std::size_t codepoint_index_of_byte(const std::string& text, std::size_t byte_offset) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < byte_offset && i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::vector<SquadExample> parse_squad(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("squad: malformed JSON in " + origin + ": " + e.what());
  }
  std::vector<SquadExample> examples;
  const json& data = require(doc, "data", origin);
  if (!data.is_array()) throw SchemaError("squad: 'data' must be an array in " + origin);
  for (const auto& article : data) {
    const json& paragraphs = require(article, "paragraphs", origin);
    for (const auto& para : paragraphs) {
      const std::string context = require_string(para, "context", origin + " paragraph");
      for (const auto& qa : require(para, "qas", origin + " paragraph")) {
        SquadExample ex;
        ex.qid = require_string(qa, "id", origin + " qa entry");
        const std::string where = "qid " + ex.qid;
        ex.passage = context;
        ex.question = require_string(qa, "question", where);
        const json& impossible = require(qa, "is_impossible", where);
        if (!impossible.is_boolean()) {
          throw SchemaError("squad: field 'is_impossible' must be a boolean in " + where);
        }
        ex.is_impossible = impossible.get<bool>();
        const json& answers = require(qa, "answers", where);
        if (!answers.is_array()) throw SchemaError("squad: field 'answers' must be an array in " + where);
        for (const auto& a : answers) {
          GoldAnswer g;
          g.text = require_string(a, "text", where);
          const json& start = require(a, "answer_start", where);
          if (!start.is_number_integer() || start.get<long long>() < 0) {
            throw SchemaError("squad: field 'answer_start' must be a non-negative integer in " + where);
          }
          g.char_start = start.get<std::size_t>();
          try {
            g.byte_start = byte_offset_of_codepoint(context, g.char_start);
          } catch (const IndexError&) {
            throw SchemaError("squad: field 'answer_start' beyond passage end in " + where);
          }
          if (context.compare(g.byte_start, g.text.size(), g.text) != 0) {
            throw SchemaError("squad: answer text '" + g.text +
                              "' does not match the passage at 'answer_start' in " + where);
          }
          ex.gold_answers.push_back(std::move(g));
        }
        if (!ex.is_impossible && ex.gold_answers.empty()) {
          throw SchemaError("squad: answerable question without 'answers' in " + where);
        }
        examples.push_back(std::move(ex));
      }
    }
  }
  return examples;
}

std::vector<SquadExample> load_squad(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("squad: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_squad(buffer.str(), path.string());
}

void save_squad(const std::filesystem::path& path, const std::vector<SquadExample>& examples) {
  json paragraphs = json::array();
  for (const auto& ex : examples) {
    if (paragraphs.empty() || paragraphs.back()["context"] != ex.passage) {
      paragraphs.push_back({{"context", ex.passage}, {"qas", json::array()}});
    }
    json answers = json::array();
    for (const auto& a : ex.gold_answers) {
      answers.push_back({{"text", a.text}, {"answer_start", a.char_start}});
    }
    paragraphs.back()["qas"].push_back({{"id", ex.qid},
                                        {"question", ex.question},
                                        {"answers", answers},
                                        {"is_impossible", ex.is_impossible}});
  }
  json doc = {{"version", "v2.0"},
              {"data", json::array({{{"title", "synthetic"}, {"paragraphs", paragraphs}}})}};
  std::ofstream out(path);
  if (!out) throw ConfigError("squad: cannot open " + path.string() + " for writing");
  out << doc.dump(1) << '\n';
}

}  // namespace retro
