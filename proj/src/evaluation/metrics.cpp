#include "retro/evaluation/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "retro/errors.hpp"

namespace retro {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Bytes of multi-byte UTF-8 sequences count as word characters so that an
// article glued to a non-ASCII letter is not treated as a whole word.
bool is_word(unsigned char c) { return c >= 0x80 || std::isalnum(c) || c == '_'; }

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string remove_articles(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary_before = i == 0 || !is_word(static_cast<unsigned char>(s[i - 1]));
    if (boundary_before) {
      bool replaced = false;
      for (std::string_view art : {"the", "an", "a"}) {
        if (s.compare(i, art.size(), art) != 0) continue;
        const std::size_t after = i + art.size();
        if (after < s.size() && is_word(static_cast<unsigned char>(s[after]))) continue;
        out.push_back(' ');
        i = after;
        replaced = true;
        break;
      }
      if (replaced) continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

// Lowercase mapping for the two-byte UTF-8 letters the reference scorer's
// str.lower() folds most often: Latin-1, Latin Extended-A, Greek, Cyrillic.
char32_t lower_codepoint(char32_t cp) {
  if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) || (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) ||
      (cp >= 0x410 && cp <= 0x42F)) {
    return cp + 0x20;
  }
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  if ((cp >= 0x100 && cp <= 0x137 && cp != 0x130) || (cp >= 0x14A && cp <= 0x177)) return cp | 1;
  if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return cp % 2 ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  // accented Greek capitals
  if (cp == 0x386) return 0x3AC;
  if (cp >= 0x388 && cp <= 0x38A) return cp + 0x25;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
  return cp;
}

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      out.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    const auto next = i + 1 < text.size() ? static_cast<unsigned char>(text[i + 1]) : 0;
    if ((c & 0xE0) == 0xC0 && (next & 0xC0) == 0x80) {
      const char32_t cp = lower_codepoint(((c & 0x1Fu) << 6) | (next & 0x3Fu));
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      ++i;
      continue;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

double percent(double sum, std::size_t n) { return n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

Predictions load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open predictions file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError(path.string() + ": predictions must be a JSON object");
  Predictions out;
  for (const auto& [qid, text] : j.items()) {
    if (!text.is_string()) throw SchemaError(path.string() + ": prediction for '" + qid + "' is not a string");
    out[qid] = text.get<std::string>();
  }
  return out;
}

void save_predictions(const std::filesystem::path& path, const Predictions& predictions) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << nlohmann::json(predictions).dump(2) << '\n';
}

std::string normalize_answer(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (char c : lowercase(text)) {
    if (!is_punct(static_cast<unsigned char>(c))) s.push_back(c);
  }
  const auto words = split_ws(remove_articles(s));
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<std::string> answer_tokens(std::string_view text) { return split_ws(normalize_answer(text)); }

namespace {

std::vector<std::string> effective_golds(std::span<const std::string> gold_answers, bool is_impossible) {
  std::vector<std::string> golds;
  if (!is_impossible) {
    for (const auto& g : gold_answers) {
      if (!normalize_answer(g).empty()) golds.push_back(g);
    }
  }
  if (golds.empty()) golds.emplace_back();
  return golds;
}

double f1_single(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  if (gold.empty() || pred.empty()) return gold == pred ? 1.0 : 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int same = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(same) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::vector<std::string> scoring_golds(const SquadExample& example) {
  std::vector<std::string> texts;
  for (const auto& a : example.gold_answers) texts.push_back(a.text);
  return effective_golds(texts, example.is_impossible);
}

int em_score(std::string_view prediction, std::span<const std::string> gold_answers, bool is_impossible) {
  const std::string p = normalize_answer(prediction);
  for (const auto& g : effective_golds(gold_answers, is_impossible)) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

double f1_score(std::string_view prediction, std::span<const std::string> gold_answers, bool is_impossible) {
  const auto pred = answer_tokens(prediction);
  double best = 0.0;
  for (const auto& g : effective_golds(gold_answers, is_impossible)) {
    best = std::max(best, f1_single(answer_tokens(g), pred));
  }
  return best;
}

std::vector<QuestionScore> score_questions(const Predictions& predictions,
                                           std::span<const SquadExample> dataset) {
  std::vector<std::string> missing;
  std::vector<QuestionScore> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset) {
    auto it = predictions.find(ex.qid);
    if (it == predictions.end()) {
      missing.push_back(ex.qid);
      continue;
    }
    std::vector<std::string> texts;
    for (const auto& a : ex.gold_answers) texts.push_back(a.text);
    QuestionScore s;
    s.qid = ex.qid;
    s.has_answer = !ex.is_impossible && !ex.gold_answers.empty();
    s.exact = em_score(it->second, texts, ex.is_impossible);
    s.f1 = f1_score(it->second, texts, ex.is_impossible);
    out.push_back(std::move(s));
  }
  if (!missing.empty()) {
    std::string msg = "missing predictions for " + std::to_string(missing.size()) + " question(s):";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw EvaluationError(msg);
  }
  return out;
}

EvalReport evaluate(const Predictions& predictions, std::span<const SquadExample> dataset) {
  const auto scores = score_questions(predictions, dataset);
  EvalReport r;
  double em_has = 0, f1_has = 0, em_no = 0, f1_no = 0;
  for (const auto& s : scores) {
    if (s.has_answer) {
      em_has += s.exact;
      f1_has += s.f1;
      ++r.has_ans.total;
    } else {
      em_no += s.exact;
      f1_no += s.f1;
      ++r.no_ans.total;
    }
  }
  r.has_ans.exact = percent(em_has, r.has_ans.total);
  r.has_ans.f1 = percent(f1_has, r.has_ans.total);
  r.no_ans.exact = percent(em_no, r.no_ans.total);
  r.no_ans.f1 = percent(f1_no, r.no_ans.total);
  // Overall as the count-weighted mean of the splits, so the split
  // decomposition holds bit for bit.
  const auto n = static_cast<double>(scores.size());
  const auto nh = static_cast<double>(r.has_ans.total), nn = static_cast<double>(r.no_ans.total);
  r.overall.total = scores.size();
  if (!scores.empty()) {
    r.overall.exact = (r.has_ans.exact * nh + r.no_ans.exact * nn) / n;
    r.overall.f1 = (r.has_ans.f1 * nh + r.no_ans.f1 * nn) / n;
  }

  std::unordered_set<std::string> known;
  for (const auto& ex : dataset) known.insert(ex.qid);
  for (const auto& [qid, _] : predictions) {
    if (!known.count(qid)) r.warnings.push_back("prediction for unknown question '" + qid + "' ignored");
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"exact", r.overall.exact},       {"f1", r.overall.f1},
                      {"total", r.overall.total},       {"HasAns_exact", r.has_ans.exact},
                      {"HasAns_f1", r.has_ans.f1},      {"HasAns_total", r.has_ans.total},
                      {"NoAns_exact", r.no_ans.exact},  {"NoAns_f1", r.no_ans.f1},
                      {"NoAns_total", r.no_ans.total}};
  if (r.delta) j["delta"] = *r.delta;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

UnanswerableMetrics unanswerable_detection_metrics(const Predictions& predictions,
                                                   std::span<const SquadExample> dataset) {
  UnanswerableMetrics m;
  std::vector<std::string> missing;
  for (const auto& ex : dataset) {
    auto it = predictions.find(ex.qid);
    if (it == predictions.end()) {
      missing.push_back(ex.qid);
      continue;
    }
    const bool predicted_null = normalize_answer(it->second).empty();
    const bool gold_null = ex.is_impossible || ex.gold_answers.empty();
    if (predicted_null && gold_null) ++m.tp;
    else if (predicted_null) ++m.fp;
    else if (gold_null) ++m.fn;
    else ++m.tn;
  }
  if (!missing.empty()) {
    throw EvaluationError("missing predictions for " + std::to_string(missing.size()) +
                          " question(s), first: " + missing.front());
  }
  const auto n = m.tp + m.fp + m.fn + m.tn;
  m.degenerate_precision = m.tp + m.fp == 0;
  m.degenerate_recall = m.tp + m.fn == 0;
  m.precision = m.degenerate_precision ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = m.degenerate_recall ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(m.tp + m.tn) / static_cast<double>(n);
  return m;
}

nlohmann::json to_json(const UnanswerableMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},               {"accuracy", m.accuracy},
          {"tp", m.tp},               {"fp", m.fp},
          {"fn", m.fn},               {"tn", m.tn},
          {"degenerate_precision", m.degenerate_precision},
          {"degenerate_recall", m.degenerate_recall}};
}

std::string render_verification_table(std::span<const ReportRow> rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  std::ostringstream os;
  os << pad("Model") << "  All EM  All F1  Has EM  Has F1   NA EM   NA F1\n";
  for (const auto& row : rows) {
    os << pad(row.name);
    if (!row.report) {
      os << "       -       -       -       -       -       -\n";
      continue;
    }
    const auto& r = *row.report;
    for (double x : {r.overall.exact, r.overall.f1, r.has_ans.exact, r.has_ans.f1, r.no_ans.exact,
                     r.no_ans.f1}) {
      const auto s = fmt(x);
      os << std::string(8 - std::min<std::size_t>(8, s.size()), ' ') << s;
    }
    os << '\n';
  }
  return os.str();
}

std::string render_unanswerable_table(
    std::span<const std::pair<std::string, UnanswerableMetrics>> rows) {
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream os;
  os << "Model" << std::string(width - 5, ' ') << "       P       R      F1     Acc\n";
  for (const auto& [name, m] : rows) {
    os << name << std::string(width - name.size(), ' ');
    for (double x : {m.precision, m.recall, m.f1, m.accuracy}) {
      const auto s = fmt(100.0 * x);
      os << std::string(8 - std::min<std::size_t>(8, s.size()), ' ') << s;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace retro
