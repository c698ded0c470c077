#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "retro/datapipe/features.hpp"
#include "retro/decision/decision.hpp"
#include "retro/errors.hpp"

using namespace retro;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VerdictScores window(std::string qid, double has, double null, double ext, std::size_t idx) {
  VerdictScores w;
  w.qid = std::move(qid);
  w.score_has = has;
  w.score_null = null;
  w.score_diff = null - has;
  w.score_ext = ext;
  w.window_index = idx;
  w.answer_text = "w" + std::to_string(idx);
  return w;
}

const std::string kPassage =
    "Southern California consists of a heavily developed urban environment, home to some of the "
    "largest urban areas in the state, along with vast areas that have been left undeveloped. It is "
    "the third most populated megalopolis in the United States, after the Great Lakes Megalopolis and "
    "the Northeastern megalopolis.";

}  // namespace

TEST_CASE("rear verification") {
  CHECK(rear_verify(0.1, 0.3, {0.5, 0.5}) == doctest::Approx(0.2));
  CHECK(rear_verify(0.7, 123.0, {1.0, 0.0}) == 0.7);
  CHECK_THROWS_AS(rear_verify(0.0, 0.0, {-0.5, 0.5}), ConfigError);
  CHECK(rear_verify(0.2, 0.0, {0.5, 0.5}) < rear_verify(0.3, 0.0, {0.5, 0.5}));
  CHECK(rear_verify(0.0, 0.2, {0.5, 0.5}) < rear_verify(0.0, 0.3, {0.5, 0.5}));
}

TEST_CASE("decide") {
  // a dominant no-answer score against a negative threshold gives null
  const double v = 1.73 - 0.03;
  CHECK(decide(v, -0.98, "Great Lakes Megalopolis").empty());
  CHECK(decide(1e300, kInf, "span") == "span");
  CHECK(decide(-1e300, -kInf, "span").empty());
  CHECK(decide(0.5, 0.5, "tie answers") == "tie answers");
}

TEST_CASE("decide nests null sets as the threshold grows") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> vs(200);
  for (auto& v : vs) v = g(rng);
  std::size_t previous = vs.size() + 1;
  std::vector<bool> was_null(vs.size(), true);
  for (double delta = -4.0; delta <= 4.0; delta += 0.05) {
    std::size_t nulls = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const bool is_null = decide(vs[i], delta, "x").empty();
      CHECK((!is_null || was_null[i]));
      was_null[i] = is_null;
      nulls += is_null;
    }
    CHECK(nulls <= previous);
    previous = nulls;
  }
}

TEST_CASE("decide depends only on ranks") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<ThresholdSample> samples(50);
  for (auto& s : samples) s.v = g(rng);
  auto f = [](double x) { return std::exp(x) * 3.0 + 1.0; };
  for (double delta : threshold_candidates(samples)) {
    const double td = std::isfinite(delta) ? f(delta) : delta;
    for (const auto& s : samples) CHECK(decide(s.v, delta, "a") == decide(f(s.v), td, "a"));
  }
}

TEST_CASE("aggregate windows") {
  const RearWeights w{0.5, 0.5};
  const auto one = window("q", 0.8, 0.9, 0.3, 0);
  auto single = aggregate_windows(std::vector<VerdictScores>{one}, w);
  CHECK(single.score_has == one.score_has);
  CHECK(single.score_null == one.score_null);
  CHECK(single.score_diff == one.score_diff);
  CHECK(single.score_ext == one.score_ext);
  CHECK(single.answer_text == one.answer_text);

  const std::vector<VerdictScores> two{window("q", 0.8, 0.5, 0.2, 0), window("q", 1.2, 0.1, 0.6, 1)};
  const auto merged = aggregate_windows(two, w);
  CHECK(merged.window_index == 1);
  CHECK(merged.answer_text == "w1");
  CHECK(merged.score_diff == doctest::Approx(0.1 - 1.2));
  CHECK(merged.score_ext == doctest::Approx(0.4));
  CHECK(merged.v == doctest::Approx(0.5 * (0.1 - 1.2) + 0.5 * 0.4));

  CHECK_THROWS_AS(aggregate_windows(std::vector<VerdictScores>{}, w), AggregationError);
  CHECK_THROWS_AS(aggregate_windows(std::vector<VerdictScores>{window("a", 0, 0, 0, 0), window("b", 0, 0, 0, 1)}, w),
                  AggregationError);
}

TEST_CASE("aggregate windows against exhaustive recomputation") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(-6, 6);
  const RearWeights w{0.7, 0.3};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<VerdictScores> ws;
    for (std::size_t i = 0; i < 3; ++i) ws.push_back(window("q", level(rng) / 2.0, level(rng) / 2.0, level(rng), i));
    // exhaustive: the window whose score_has no other window beats, earliest first
    std::size_t pick = 3;
    for (std::size_t i = 0; i < 3 && pick == 3; ++i) {
      bool is_max = true;
      for (std::size_t j = 0; j < 3; ++j) is_max = is_max && ws[j].score_has <= ws[i].score_has;
      if (is_max) pick = i;
    }
    const double ext = (ws[0].score_ext + ws[1].score_ext + ws[2].score_ext) / 3.0;
    const auto got = aggregate_windows(ws, w);
    CHECK(got.window_index == pick);
    CHECK(got.score_diff == ws[pick].score_null - ws[pick].score_has);
    CHECK(got.score_ext == doctest::Approx(ext).epsilon(1e-15));
    CHECK(got.v == doctest::Approx(0.7 * got.score_diff + 0.3 * ext).epsilon(1e-14));
  }
}

TEST_CASE("threshold candidates") {
  std::vector<ThresholdSample> s{{2.0, 1, 0}, {0.0, 1, 0}, {2.0, 0, 1}, {1.0, 0, 1}};
  const auto c = threshold_candidates(s);
  REQUIRE(c.size() == 4);
  CHECK(c[0] == -kInf);
  CHECK(c[1] == 0.5);
  CHECK(c[2] == 1.5);
  CHECK(c[3] == kInf);

  const std::vector<ThresholdSample> same(5, {0.3, 1, 0});
  CHECK(threshold_candidates(same) == std::vector<double>{-kInf, kInf});

  // neighbouring doubles: the candidate still separates them
  const double a = 1.0, b = std::nextafter(1.0, 2.0);
  const auto tight = threshold_candidates(std::vector<ThresholdSample>{{a, 0, 0}, {b, 0, 0}});
  CHECK(tight[1] >= a);
  CHECK(tight[1] < b);
}

TEST_CASE("search threshold") {
  // separable: unanswerable (null scores 1) above answerable
  std::vector<ThresholdSample> sep;
  for (int i = 0; i < 5; ++i) sep.push_back({-1.0 - i, 1.0, 0.0});
  for (int i = 0; i < 5; ++i) sep.push_back({1.0 + i, 0.0, 1.0});
  const auto t = search_threshold(sep, TuneMetric::exact_match, "sep");
  CHECK(t.metric_value == 1.0);
  CHECK(t.delta == 0.0);
  CHECK(t.tuned_on == "sep");

  // all v equal: sentinel whose decision fits the majority
  std::vector<ThresholdSample> flat{{0.0, 1, 0}, {0.0, 1, 0}, {0.0, 0, 1}};
  CHECK(search_threshold(flat, TuneMetric::f1).delta == kInf);
  flat.push_back({0.0, 0, 1});
  flat.push_back({0.0, 0, 1});
  CHECK(search_threshold(flat, TuneMetric::f1).delta == -kInf);

  CHECK_THROWS_AS(search_threshold(std::vector<ThresholdSample>{}, TuneMetric::exact_match), SearchError);
  CHECK_THROWS_AS(search_threshold(std::vector<ThresholdSample>{{kInf, 0, 1}}, TuneMetric::exact_match), SearchError);
  CHECK(parse_tune_metric("f1") == TuneMetric::f1);
  CHECK_THROWS_AS(parse_tune_metric("auc"), ConfigError);
}

TEST_CASE("search threshold matches a dense grid") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> level(0, 999);
  std::uniform_real_distribution<double> partial(0.0, 1.0);
  std::bernoulli_distribution answerable(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ThresholdSample> s(10);
    for (auto& x : s) {
      // v on a 1e-3 lattice in [-0.5, 0.5); grid below refines past every gap
      x.v = level(rng) / 1000.0 - 0.5;
      if (answerable(rng)) {
        x.answered_score = trial % 2 ? partial(rng) : 1.0;
        x.null_score = 0.0;
      } else {
        x.answered_score = 0.0;
        x.null_score = 1.0;
      }
    }
    double grid_best = metric_at(s, -kInf);
    for (int g = 0; g <= 4000; ++g) grid_best = std::max(grid_best, metric_at(s, -0.6 + g * 3e-4));
    grid_best = std::max(grid_best, metric_at(s, kInf));
    const auto t = search_threshold(s, trial % 2 ? TuneMetric::f1 : TuneMetric::exact_match);
    CHECK(t.metric_value == grid_best);
    CHECK(metric_at(s, t.delta) == t.metric_value);
    for (double c : threshold_candidates(s)) {
      if (c < t.delta) CHECK(metric_at(s, c) < t.metric_value);
    }
  }
}

TEST_CASE("extract answer text") {
  SquadExample ex;
  ex.qid = "megalopolis";
  ex.passage = kPassage;
  ex.question = "What is the largest megalopolis?";
  ex.is_impossible = true;
  const std::vector<std::string> corpus{ex.passage, ex.question};
  const auto vocab = Vocab::build(corpus, 500);
  const auto features = build_features(ex, vocab, {256, 64});
  REQUIRE(features.size() == 1);
  const auto& f = features[0];

  const std::string target = "Great Lakes Megalopolis";
  const std::size_t begin = kPassage.find(target), end = begin + target.size();
  std::size_t k = 0, l = 0;
  for (std::size_t i = f.passage_begin; i < f.passage_end; ++i) {
    if (f.offset_map[i].begin == begin) k = i;
    if (f.offset_map[i].end == end) l = i;
  }
  REQUIRE(k > 0);
  CHECK(extract_answer_text({k, l}, f, kPassage) == target);
  CHECK(extract_answer_text({k, k}, f, kPassage) == "Great");

  CHECK_THROWS_AS(extract_answer_text({0, 0}, f, kPassage), ExtractionError);
  CHECK_THROWS_AS(extract_answer_text({l, k}, f, kPassage), ExtractionError);
  CHECK_THROWS_AS(extract_answer_text({k, f.passage_end}, f, kPassage), ExtractionError);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pos(f.passage_begin, f.passage_end - 1);
  for (int i = 0; i < 200; ++i) {
    std::size_t a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    const auto text = extract_answer_text({a, b}, f, kPassage);
    CHECK(kPassage.find(text) != std::string::npos);
    CHECK(text == kPassage.substr(f.offset_map[a].begin, text.size()));
  }
}
