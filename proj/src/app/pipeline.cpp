#include "retro/app/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "retro/errors.hpp"
#include "retro/trainer/trainer.hpp"

namespace retro {

std::vector<QuestionVerdict> verify_questions(std::span<const SquadExample> examples,
                                              std::span<const Feature> features,
                                              const VerificationInputs& inputs) {
  inputs.weights.validate();
  std::unordered_map<std::string, std::vector<const Feature*>> by_qid;
  for (const auto& f : features) by_qid[f.qid].push_back(&f);

  NoGradGuard no_grad;
  const auto ctx = ForwardContext::eval();
  std::vector<QuestionVerdict> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto it = by_qid.find(ex.qid);
    if (it == by_qid.end() || it->second.empty()) {
      throw AggregationError("no features for question " + ex.qid);
    }
    std::vector<VerdictScores> windows;
    std::vector<std::vector<SpanCandidate>> window_nbest;
    for (const Feature* f : it->second) {
      const auto in = trim_padding(*f);
      VerdictScores w;
      w.qid = ex.qid;
      w.window_index = f->window_index;
      std::vector<SpanCandidate> nb;
      if (inputs.intensive) {
        const auto o = intensive_forward(*inputs.intensive, in.ids, in.types, in.mask, ctx);
        TavOptions opts;
        opts.max_answer_len = inputs.intensive->config.max_answer_len;
        opts.n_best = inputs.n_best;
        auto eligible = span_candidates(*f);
        eligible.resize(in.ids.size());
        const auto tav = tav_scores(o.span.start.data(), o.span.end.data(), eligible, opts, ex.qid);
        w.score_has = tav.scores.score_has;
        w.score_null = tav.scores.score_null;
        w.score_diff = tav.scores.score_diff;
        w.best_span = {tav.best.start, tav.best.end};
        w.answer_text = extract_answer_text(w.best_span, *f, ex.passage);
        nb = tav.n_best;
      }
      if (inputs.sketchy) w.score_ext = inputs.sketchy->forward(in.ids, in.types, in.mask, ctx).score_ext;
      w.v = rear_verify(w.score_diff, w.score_ext, inputs.weights);
      windows.push_back(std::move(w));
      window_nbest.push_back(std::move(nb));
    }
    QuestionVerdict q;
    q.scores = aggregate_windows(windows, inputs.weights);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i].window_index == q.scores.window_index) q.n_best = window_nbest[i];
    }
    q.gold_unanswerable = ex.is_impossible || ex.gold_answers.empty();
    out.push_back(std::move(q));
  }
  return out;
}

Predictions decide_all(std::span<const QuestionVerdict> verdicts, double delta) {
  Predictions p;
  for (const auto& q : verdicts) p[q.scores.qid] = decide(q.scores.v, delta, q.scores.answer_text);
  return p;
}

std::map<std::string, double> null_odds(std::span<const QuestionVerdict> verdicts) {
  std::map<std::string, double> m;
  for (const auto& q : verdicts) m[q.scores.qid] = q.scores.v;
  return m;
}

std::vector<ThresholdSample> threshold_samples(std::span<const QuestionVerdict> verdicts,
                                               std::span<const SquadExample> examples,
                                               TuneMetric metric) {
  if (verdicts.size() != examples.size()) {
    throw AlignmentError("threshold_samples: " + std::to_string(verdicts.size()) + " verdicts for " +
                         std::to_string(examples.size()) + " questions");
  }
  std::vector<ThresholdSample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (verdicts[i].scores.qid != ex.qid) {
      throw AlignmentError("threshold_samples: verdict " + verdicts[i].scores.qid + " where " + ex.qid +
                           " was expected");
    }
    std::vector<std::string> golds;
    for (const auto& a : ex.gold_answers) golds.push_back(a.text);
    const auto& text = verdicts[i].scores.answer_text;
    ThresholdSample s;
    s.v = verdicts[i].scores.v;
    if (metric == TuneMetric::exact_match) {
      s.answered_score = em_score(text, golds, ex.is_impossible);
      s.null_score = em_score("", golds, ex.is_impossible);
    } else {
      s.answered_score = f1_score(text, golds, ex.is_impossible);
      s.null_score = f1_score("", golds, ex.is_impossible);
    }
    out.push_back(s);
  }
  return out;
}

void write_verdicts_jsonl(const std::filesystem::path& path, std::span<const QuestionVerdict> verdicts) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& q : verdicts) {
    const auto& s = q.scores;
    nlohmann::json nb = nlohmann::json::array();
    for (const auto& c : q.n_best) nb.push_back({{"start", c.start}, {"end", c.end}, {"score", c.score}});
    nlohmann::json j = {{"qid", s.qid},
                        {"score_has", s.score_has},
                        {"score_null", s.score_null},
                        {"score_diff", s.score_diff},
                        {"score_ext", s.score_ext},
                        {"v", s.v},
                        {"window", s.window_index},
                        {"span", {s.best_span.start, s.best_span.end}},
                        {"answer_text", s.answer_text},
                        {"n_best", nb}};
    out << j.dump() << '\n';
  }
}

std::vector<VerdictScores> read_verdicts_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<VerdictScores> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      VerdictScores s;
      s.qid = j.at("qid").get<std::string>();
      s.score_has = j.at("score_has").get<double>();
      s.score_null = j.at("score_null").get<double>();
      s.score_diff = j.at("score_diff").get<double>();
      s.score_ext = j.at("score_ext").get<double>();
      s.v = j.at("v").get<double>();
      s.window_index = j.at("window").get<std::size_t>();
      s.best_span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
      s.answer_text = j.at("answer_text").get<std::string>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json delta_to_json(double delta) {
  if (std::isinf(delta)) return delta > 0 ? "inf" : "-inf";
  return delta;
}

double delta_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw SchemaError("threshold: delta must be a number, \"inf\" or \"-inf\"");
}

void save_threshold(const std::filesystem::path& path, const Threshold& t) {
  write_json(path, {{"delta", delta_to_json(t.delta)},
                    {"tuned_metric", to_string(t.tuned_metric)},
                    {"tuned_on", t.tuned_on},
                    {"metric_value", t.metric_value}});
}

Threshold load_threshold(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    Threshold t;
    t.delta = delta_from_json(j.at("delta"));
    t.tuned_metric = parse_tune_metric(j.value("tuned_metric", std::string("EM")));
    t.tuned_on = j.value("tuned_on", std::string());
    t.metric_value = j.value("metric_value", 0.0);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace retro
