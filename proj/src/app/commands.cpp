#include "retro/app/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "retro/errors.hpp"

namespace retro {

namespace {

void require_file(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required ") + flag);
  if (!fs::exists(p)) throw ConfigError(std::string(flag) + ": path not found: " + p.string());
}

fs::path ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

IntensiveConfig intensive_config(const RunConfig& c, const EncoderConfig& enc) {
  IntensiveConfig ic;
  ic.encoder = enc;
  ic.matching = c.train.matching;
  ic.ifv = c.train.ifv;
  ic.max_answer_len = c.max_answer_len;
  return ic;
}

EncoderConfig encoder_for(const RunConfig& c, const Vocab& vocab) {
  EncoderConfig enc = c.encoder;
  enc.vocab_size = vocab.size();
  if (c.features.max_len > enc.max_positions) {
    throw ConfigError("max_len " + std::to_string(c.features.max_len) + " exceeds max_positions " +
                      std::to_string(enc.max_positions));
  }
  enc.validate();
  return enc;
}

struct LoadedModels {
  std::optional<SketchyModel> sketchy;
  std::optional<IntensiveModel> intensive;
};

LoadedModels load_models(const RunConfig& c, const Vocab& vocab, std::ostream& err) {
  if (c.ckpt_sketchy.empty() && c.ckpt_intensive.empty()) {
    throw ConfigError("need --ckpt-sketchy and/or --ckpt-intensive");
  }
  LoadedModels m;
  if (!c.ckpt_sketchy.empty()) {
    require_file(c.ckpt_sketchy, "--ckpt-sketchy");
    m.sketchy = load_sketchy(c.ckpt_sketchy, vocab);
  } else {
    err << "warning: no sketchy checkpoint; score_ext is taken as 0\n";
  }
  if (!c.ckpt_intensive.empty()) {
    require_file(c.ckpt_intensive, "--ckpt-intensive");
    m.intensive = load_intensive(c.ckpt_intensive, vocab);
  } else {
    err << "warning: no intensive checkpoint; score_diff is taken as 0 and no spans are extracted\n";
  }
  return m;
}

std::vector<QuestionVerdict> run_verification(const std::vector<SquadExample>& examples,
                                              const Vocab& vocab, const LoadedModels& models,
                                              const RearWeights& weights, const FeatureOptions& fo) {
  const auto features = build_all_features(examples, vocab, fo);
  VerificationInputs in;
  in.sketchy = models.sketchy ? &*models.sketchy : nullptr;
  in.intensive = models.intensive ? &*models.intensive : nullptr;
  in.weights = weights;
  in.features = fo;
  return verify_questions(examples, features, in);
}

nlohmann::json to_json_map(const std::map<std::string, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

// Training-set EM with a threshold tuned on the same set; the early-stop
// signal for overfitting runs.
double tuned_em(const std::vector<SquadExample>& examples, const std::vector<Feature>& features,
                const VerificationInputs& in) {
  const auto verdicts = verify_questions(examples, features, in);
  const auto samples = threshold_samples(verdicts, examples, TuneMetric::exact_match);
  return 100.0 * search_threshold(samples, TuneMetric::exact_match).metric_value;
}

}  // namespace

std::string checkpoint_filename(const TrainConfig& c) {
  if (c.module == ModuleKind::sketchy) return "sketchy.ckpt";
  std::string name = "intensive_" + (c.ifv ? to_string(*c.ifv) : std::string("none"));
  if (c.matching != Matching::none) name += "_" + to_string(c.matching);
  return name + ".ckpt";
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_file(c.data, "--data");
  c.train.validate();
  const auto examples = load_squad(c.data);
  if (examples.empty()) throw DataError("train: " + c.data.string() + " holds no questions");
  const auto dir = ensure_out_dir(c.out);

  Vocab vocab;
  if (!c.vocab.empty()) {
    require_file(c.vocab, "--vocab");
    vocab = Vocab::load(c.vocab);
  } else {
    std::vector<std::string> corpus;
    for (const auto& ex : examples) {
      corpus.push_back(ex.passage);
      corpus.push_back(ex.question);
    }
    vocab = Vocab::build(corpus, c.vocab_top_k);
    vocab.save(dir / "vocab.txt");
    err << "note: built vocabulary of " << vocab.size() << " tokens -> " << (dir / "vocab.txt").string()
        << '\n';
  }
  const auto enc = encoder_for(c, vocab);
  const auto features = build_all_features(examples, vocab, c.features);
  const auto ckpt = dir / checkpoint_filename(c.train);

  TrainResult result;
  nlohmann::json extra = {{"train_data", c.data.string()}, {"seed", c.train.seed}};
  if (c.train.module == ModuleKind::sketchy) {
    auto model = SketchyModel::init(enc, c.train.seed);
    EpochCallback stop;
    if (c.target_em > 0.0) {
      stop = [&](std::size_t epoch, const TrainResult&) {
        if (epoch % c.eval_every != 0) return false;
        NoGradGuard ng;
        std::size_t right = 0;
        for (const auto& f : features) {
          const auto in = trim_padding(f);
          const double ext = model.forward(in.ids, in.types, in.mask, ForwardContext::eval()).score_ext;
          right += (ext > 0.0) == (f.ans_label == kUnanswerable);
        }
        return 100.0 * static_cast<double>(right) / static_cast<double>(features.size()) >= c.target_em;
      };
    }
    result = train_sketchy(model, features, c.train, stop);
    save_model(ckpt, model, vocab, extra);
  } else {
    auto model = IntensiveModel::init(intensive_config(c, enc), c.train.seed);
    EpochCallback stop;
    if (c.target_em > 0.0) {
      stop = [&](std::size_t epoch, const TrainResult&) {
        if (epoch % c.eval_every != 0) return false;
        VerificationInputs in;
        in.intensive = &model;
        in.weights = {1.0, 0.0};
        return tuned_em(examples, features, in) >= c.target_em;
      };
    }
    result = train_intensive(model, features, c.train, stop);
    save_model(ckpt, model, vocab, extra);
  }
  auto manifest = run_manifest(c.train, result, ckpt);
  manifest["encoder"] = enc;
  manifest["train_data"] = c.data.string();
  manifest["features"] = {{"max_len", c.features.max_len}, {"doc_stride", c.features.doc_stride}};
  const auto manifest_path = dir / (ckpt.stem().string() + ".manifest.json");
  write_json(manifest_path, manifest);
  out << "trained " << to_string(c.train.module) << " for " << result.epochs_run << " epoch(s), "
      << result.steps << " step(s); final loss " << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back())
      << "\ncheckpoint: " << ckpt.string() << "\nmanifest: " << manifest_path.string() << '\n';
  return 0;
}

int cmd_predict(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_file(c.data, "--data");
  require_file(c.vocab, "--vocab");
  const auto vocab = Vocab::load(c.vocab);
  const auto models = load_models(c, vocab, err);
  const auto examples = load_squad(c.data);
  const auto dir = ensure_out_dir(c.out);

  double delta = 0.0;
  std::string source = "default";
  if (c.delta) {
    delta = *c.delta;
    source = "flag";
  } else if (!c.threshold.empty()) {
    require_file(c.threshold, "--threshold");
    delta = load_threshold(c.threshold).delta;
    source = c.threshold.string();
  } else {
    err << "warning: no --delta or --threshold given; using delta = 0\n";
  }

  const auto verdicts = run_verification(examples, vocab, models, c.rear, c.features);
  const auto preds = decide_all(verdicts, delta);
  save_predictions(dir / "predictions.json", preds);
  write_json(dir / "null_odds.json", to_json_map(null_odds(verdicts)));
  write_verdicts_jsonl(dir / "verdicts.jsonl", verdicts);
  nlohmann::json ext = nlohmann::json::object(), spans = nlohmann::json::object();
  for (const auto& q : verdicts) {
    if (models.sketchy) ext[q.scores.qid] = q.scores.score_ext;
    if (!models.intensive) continue;
    nlohmann::json nb = nlohmann::json::array();
    for (const auto& cand : q.n_best) nb.push_back({{"span", {cand.start, cand.end}}, {"score", cand.score}});
    spans[q.scores.qid] = {{"score_diff", q.scores.score_diff},
                           {"best_span", {q.scores.best_span.start, q.scores.best_span.end}},
                           {"n_best", nb}};
  }
  if (models.sketchy) write_json(dir / "score_ext.json", ext);
  if (models.intensive) write_json(dir / "intensive_scores.json", spans);
  write_json(dir / "predict_manifest.json",
             {{"data", c.data.string()},
              {"vocab", c.vocab.string()},
              {"ckpt_sketchy", c.ckpt_sketchy.string()},
              {"ckpt_intensive", c.ckpt_intensive.string()},
              {"beta1", c.rear.beta1},
              {"beta2", c.rear.beta2},
              {"delta", delta_to_json(delta)},
              {"delta_source", source},
              {"questions", verdicts.size()}});
  std::size_t nulls = 0;
  for (const auto& [_, text] : preds) nulls += text.empty();
  out << "predicted " << preds.size() << " question(s), " << nulls << " null, delta = " << delta
      << "\noutput: " << dir.string() << '\n';
  return 0;
}

int cmd_tune_threshold(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path dev = c.dev.empty() ? c.data : c.dev;
  require_file(dev, "--dev");
  require_file(c.vocab, "--vocab");
  const auto vocab = Vocab::load(c.vocab);
  const auto models = load_models(c, vocab, err);
  const auto examples = load_squad(dev);
  const auto dir = ensure_out_dir(c.out);
  const auto verdicts = run_verification(examples, vocab, models, c.rear, c.features);
  const auto t = search_threshold(threshold_samples(verdicts, examples, c.metric), c.metric, dev.string());
  save_threshold(dir / "threshold.json", t);
  out << "delta = " << t.delta << " (" << to_string(t.tuned_metric) << " " << pct(100.0 * t.metric_value)
      << " on " << dev.string() << ")\nwritten: " << (dir / "threshold.json").string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_file(c.data, "--data");
  require_file(c.pred, "--pred");
  const auto examples = load_squad(c.data);
  const auto preds = load_predictions(c.pred);
  auto report = evaluate(preds, examples);
  const auto detection = unanswerable_detection_metrics(preds, examples);
  if (c.delta) {
    report.delta = *c.delta;
  } else if (!c.threshold.empty()) {
    require_file(c.threshold, "--threshold");
    report.delta = load_threshold(c.threshold).delta;
  }
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  const std::vector<ReportRow> rows{{c.pred.filename().string(), report}};
  out << render_verification_table(rows);
  const std::vector<std::pair<std::string, UnanswerableMetrics>> det{{"unanswerable", detection}};
  out << '\n' << render_unanswerable_table(det);
  if (detection.degenerate_precision) out << "note: no null predictions, precision reported as 0\n";

  auto j = to_json(report);
  j["unanswerable"] = to_json(detection);
  if (!c.out.empty() && c.out != ".") {
    ensure_out_dir(c.out);
    write_json(c.out / "eval.json", j);
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

const std::vector<std::string>& ablation_row_names() {
  static const std::vector<std::string> names{"baseline", "+E-FV",     "+I-FV-CE",
                                              "+I-FV-BE", "+I-FV-MSE", "+RV"};
  return names;
}

namespace {

struct RowPlan {
  std::string intensive;  // checkpoint file in ckpt_dir
  bool sketchy = false;
};

RowPlan plan_for(const std::string& row) {
  if (row == "baseline") return {"intensive_none.ckpt", false};
  if (row == "+E-FV") return {"intensive_none.ckpt", true};
  if (row == "+I-FV-CE") return {"intensive_ce.ckpt", false};
  if (row == "+I-FV-BE") return {"intensive_be.ckpt", false};
  if (row == "+I-FV-MSE") return {"intensive_mse.ckpt", false};
  if (row == "+RV") return {"intensive_ce.ckpt", true};
  throw ConfigError("unknown ablation row '" + row + "'");
}

std::string slug(const std::string& row) {
  std::string s;
  for (char ch : row) {
    if (std::isalnum(static_cast<unsigned char>(ch))) s.push_back(static_cast<char>(std::tolower(ch)));
    else if (!s.empty() && s.back() != '_') s.push_back('_');
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s.empty() ? "row" : s;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& c, std::ostream& err) {
  const fs::path dev = c.dev.empty() ? c.data : c.dev;
  require_file(dev, "--dev");
  require_file(c.vocab, "--vocab");
  if (c.ckpt_dir.empty() || !fs::is_directory(c.ckpt_dir)) {
    throw ConfigError("--ckpt-dir: not a directory: " + c.ckpt_dir.string());
  }
  const auto vocab = Vocab::load(c.vocab);
  const auto examples = load_squad(dev);
  const auto features = build_all_features(examples, vocab, c.features);
  const auto dir = ensure_out_dir(c.out);
  const auto& names = c.rows.empty() ? ablation_row_names() : c.rows;

  std::map<std::string, IntensiveModel> intensive_cache;
  std::optional<SketchyModel> sketchy;
  std::vector<AblationRow> rows;
  for (const auto& name : names) {
    const auto plan = plan_for(name);
    AblationRow row;
    row.name = name;
    row.weights = plan.sketchy ? c.rear : RearWeights{c.rear.beta1, 0.0};
    const auto ipath = c.ckpt_dir / plan.intensive;
    const auto spath = c.ckpt_dir / "sketchy.ckpt";
    if (!fs::exists(ipath)) row.missing = ipath.string();
    else if (plan.sketchy && !fs::exists(spath)) row.missing = spath.string();
    if (!row.missing.empty()) {
      err << "warning: ablation row " << name << " absent: missing " << row.missing << '\n';
      rows.push_back(std::move(row));
      continue;
    }
    if (!intensive_cache.count(plan.intensive)) {
      intensive_cache.emplace(plan.intensive, load_intensive(ipath, vocab));
    }
    if (plan.sketchy && !sketchy) sketchy = load_sketchy(spath, vocab);

    VerificationInputs in;
    in.intensive = &intensive_cache.at(plan.intensive);
    in.sketchy = plan.sketchy ? &*sketchy : nullptr;
    in.weights = row.weights;
    in.features = c.features;
    const auto verdicts = verify_questions(examples, features, in);
    row.threshold = search_threshold(threshold_samples(verdicts, examples, c.metric), c.metric, dev.string());
    const auto preds = decide_all(verdicts, row.threshold->delta);
    auto report = evaluate(preds, examples);
    report.delta = row.threshold->delta;

    row.dir = ensure_out_dir(dir / slug(name));
    save_predictions(row.dir / "predictions.json", preds);
    write_json(row.dir / "null_odds.json", to_json_map(null_odds(verdicts)));
    write_verdicts_jsonl(row.dir / "verdicts.jsonl", verdicts);
    auto j = to_json(report);
    j["delta"] = delta_to_json(row.threshold->delta);
    j["beta1"] = row.weights.beta1;
    j["beta2"] = row.weights.beta2;
    write_json(row.dir / "eval.json", j);
    row.report = std::move(report);
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_ablate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto rows = run_ablation(c, err);
  std::vector<ReportRow> table;
  nlohmann::json j = nlohmann::json::array();
  bool complete = true;
  for (const auto& r : rows) {
    table.push_back({r.name, r.report});
    nlohmann::json e = {{"name", r.name}};
    if (r.report) {
      e["report"] = to_json(*r.report);
      e["report"]["delta"] = delta_to_json(r.threshold->delta);
      e["beta1"] = r.weights.beta1;
      e["beta2"] = r.weights.beta2;
      e["dir"] = r.dir.string();
    } else {
      e["missing"] = r.missing;
      complete = false;
    }
    j.push_back(e);
  }
  const auto text = render_verification_table(table);
  out << text;
  write_json(c.out / "ablation.json", j);
  std::ofstream(c.out / "ablation.txt") << text;
  return complete ? 0 : 2;
}

SignificanceReport compare_predictions(const Predictions& a, const Predictions& b,
                                       std::span<const SquadExample> dataset,
                                       std::optional<McNemarMethod> method) {
  std::vector<std::string> missing;
  for (const auto& ex : dataset) {
    if (!a.count(ex.qid)) missing.push_back("A:" + ex.qid);
    if (!b.count(ex.qid)) missing.push_back("B:" + ex.qid);
  }
  if (!missing.empty()) {
    std::string msg = "significance: predictions do not cover the dataset; missing";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw AlignmentError(msg);
  }
  const auto sa = score_questions(a, dataset);
  const auto sb = score_questions(b, dataset);
  std::vector<int> ea, eb;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    ea.push_back(sa[i].exact);
    eb.push_back(sb[i].exact);
  }
  SignificanceReport r;
  r.result = mcnemar_test(ea, eb, method);
  r.questions = sa.size();
  if (!sa.empty()) {
    r.em_a = 100.0 * std::count(ea.begin(), ea.end(), 1) / static_cast<double>(sa.size());
    r.em_b = 100.0 * std::count(eb.begin(), eb.end(), 1) / static_cast<double>(sa.size());
  }
  return r;
}

std::string render_significance(const SignificanceReport& r) {
  std::ostringstream os;
  os << "questions: " << r.questions << "\nEM A: " << pct(r.em_a) << "  EM B: " << pct(r.em_b)
     << "\nb (A right, B wrong): " << r.result.b << "\nc (A wrong, B right): " << r.result.c
     << "\nmethod: " << to_string(r.result.method) << "\nstatistic: " << std::setprecision(6)
     << r.result.statistic << "\np-value: " << std::setprecision(6) << r.result.p_value << '\n';
  if (r.result.degenerate) os << "note: no discordant pairs\n";
  return os.str();
}

int cmd_significance(const RunConfig& c, std::ostream& out, std::ostream&) {
  require_file(c.data, "--data");
  require_file(c.pred_a, "--pred-a");
  require_file(c.pred_b, "--pred-b");
  const auto examples = load_squad(c.data);
  const auto r = compare_predictions(load_predictions(c.pred_a), load_predictions(c.pred_b), examples,
                                     c.mcnemar_method);
  out << render_significance(r);
  if (!c.out.empty() && c.out != ".") {
    ensure_out_dir(c.out);
    write_json(c.out / "significance.json", {{"b", r.result.b},
                                             {"c", r.result.c},
                                             {"statistic", r.result.statistic},
                                             {"p_value", r.result.p_value},
                                             {"method", to_string(r.result.method)},
                                             {"degenerate", r.result.degenerate},
                                             {"questions", r.questions},
                                             {"em_a", r.em_a},
                                             {"em_b", r.em_b}});
  }
  return 0;
}

int cmd_synth(const RunConfig& c, std::ostream& out, std::ostream&) {
  const auto dir = ensure_out_dir(c.out);
  auto train_opts = c.synth;
  const auto train = make_synthetic_squad(train_opts);
  auto dev_opts = c.synth;
  dev_opts.size = c.synth_dev_size;
  dev_opts.seed = c.synth.seed + 1000;
  dev_opts.qid_prefix = c.synth.qid_prefix + "-dev";
  const auto dev = make_synthetic_squad(dev_opts);
  save_squad(dir / "train.json", train);
  save_squad(dir / "dev.json", dev);
  std::vector<std::string> corpus;
  for (const auto* set : {&train, &dev}) {
    for (const auto& ex : *set) {
      corpus.push_back(ex.passage);
      corpus.push_back(ex.question);
    }
  }
  const auto vocab = Vocab::build(corpus, c.vocab_top_k);
  vocab.save(dir / "vocab.txt");
  out << "wrote " << train.size() << " train and " << dev.size() << " dev question(s), vocab of "
      << vocab.size() << " tokens to " << dir.string() << '\n';
  return 0;
}

}  // namespace retro
