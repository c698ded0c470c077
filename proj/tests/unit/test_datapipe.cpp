#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "../support.hpp"
#include "retro/datapipe/features.hpp"
#include "retro/datapipe/squad.hpp"
#include "retro/datapipe/synthetic.hpp"
#include "retro/datapipe/vocab.hpp"
#include "retro/datapipe/wordpiece.hpp"
#include "retro/errors.hpp"

using namespace retro;

namespace {

const std::string kFixtures = RETRO_FIXTURE_DIR;

Vocab small_vocab(std::vector<std::string> extra) {
  std::vector<std::string> t{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  t.insert(t.end(), extra.begin(), extra.end());
  return Vocab::from_tokens(t);
}

// Vocabulary over the synthetic corpus, as cmd_synth builds it.
Vocab corpus_vocab(const std::vector<SquadExample>& examples) {
  std::vector<std::string> corpus;
  for (const auto& e : examples) {
    corpus.push_back(e.passage);
    corpus.push_back(e.question);
  }
  return Vocab::build(corpus, 150);
}

}  // namespace

TEST_CASE("vocab invariants") {
  const auto v = Vocab::build(std::vector<std::string>{"the cat sat", "the dog"}, 10);
  for (int id = 0; id < static_cast<int>(v.size()); ++id) CHECK(v.lookup(v.token(id)) == id);
  CHECK(v.token(v.pad_id()) == "[PAD]");
  CHECK(v.token(v.cls_id()) == "[CLS]");
  CHECK(v.contains("the"));
  CHECK(v.contains("##t"));
  CHECK(v.lookup("zebra") == -1);
  CHECK_THROWS_AS(Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "a"}), ConfigError);
  CHECK_THROWS_AS(Vocab::from_tokens({"[PAD]", "[UNK]", "a"}), ConfigError);

  const auto dir = testing::scratch_dir("vocab");
  v.save(dir / "v.txt");
  CHECK(Vocab::load(dir / "v.txt").tokens() == v.tokens());
}

TEST_CASE("wordpiece greedy longest match") {
  const auto v = small_vocab({"play", "##ing", "p", "##l"});
  const auto empty = wordpiece_tokenize("", v);
  CHECK(empty.tokens.empty());
  CHECK(empty.spans.empty());

  const auto playing = wordpiece_tokenize("playing", v);
  CHECK(playing.tokens == std::vector<std::string>{"play", "##ing"});
  CHECK(playing.spans == std::vector<CharSpan>{{0, 4}, {4, 7}});

  const auto unk = wordpiece_tokenize("xyzzy", v);
  CHECK(unk.tokens == std::vector<std::string>{"[UNK]"});
  CHECK(unk.spans == std::vector<CharSpan>{{0, 5}});

  // lookup is case-insensitive, spans stay on the original text
  const auto upper = wordpiece_tokenize("  PLAYING!", v);
  CHECK(upper.tokens == std::vector<std::string>{"play", "##ing", "[UNK]"});
  CHECK(upper.spans == std::vector<CharSpan>{{2, 6}, {6, 9}, {9, 10}});
}

TEST_CASE("wordpiece spans reconstruct the non-whitespace input") {
  std::vector<std::string> words;
  const auto examples = make_synthetic_squad({});
  const auto v = corpus_vocab(examples);
  for (const std::string text : {"Alice lives in Paris .", "Where, exactly; does Zoë live?", "a-b c"}) {
    const auto t = wordpiece_tokenize(text, v);
    std::string rebuilt, expected;
    for (const auto& s : t.spans) rebuilt += text.substr(s.begin, s.end - s.begin);
    for (char c : text) {
      if (c != ' ') expected.push_back(c);
    }
    CHECK(rebuilt == expected);
    for (std::size_t i = 1; i < t.spans.size(); ++i) CHECK(t.spans[i - 1].end <= t.spans[i].begin);
    CHECK(wordpiece_tokenize(text, v).tokens == t.tokens);  // deterministic
  }
}

TEST_CASE("load_squad") {
  const auto ex = load_squad(kFixtures + "/three_questions.json");
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].qid == "q-b");
  CHECK(ex[1].qid == "q-a");
  CHECK(ex[2].qid == "q-c");
  CHECK(ex[1].is_impossible);
  CHECK(ex[1].gold_answers.empty());
  // code-point offsets are kept verbatim and mapped to bytes
  CHECK(ex[2].gold_answers[0].char_start == 15);
  CHECK(ex[2].gold_answers[0].byte_start == 16);
  CHECK(ex[2].passage.substr(16, ex[2].gold_answers[0].text.size()) == "Köln");

  const auto t1 = load_squad(kFixtures + "/table1.json");
  REQUIRE(t1.size() == 1);
  CHECK(t1[0].is_impossible);
  CHECK(t1[0].gold_answers.empty());
  CHECK(t1[0].question == "What cannot be solved by mechanical application of mathematical steps?");

  CHECK(parse_squad(R"({"data":[{"paragraphs":[{"context":"x","qas":[]}]}]})", "mem").empty());
}

TEST_CASE("load_squad errors") {
  CHECK_THROWS_AS(parse_squad("{not json", "mem"), ParseError);
  try {
    parse_squad(R"({"data":[{"paragraphs":[{"context":"abc","qas":[{"id":"q9","answers":[]}]}]}]})", "mem");
    FAIL("no throw");
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    CHECK(what.find("question") != std::string::npos);
    CHECK(what.find("q9") != std::string::npos);
  }
  // gold text must match the passage at answer_start
  CHECK_THROWS_AS(parse_squad(R"({"data":[{"paragraphs":[{"context":"abc def","qas":[{"id":"q","question":"?",
      "is_impossible":false,"answers":[{"text":"def","answer_start":1}]}]}]}]})", "mem"), SchemaError);
  CHECK_THROWS_AS(load_squad(kFixtures + "/does_not_exist.json"), ConfigError);
}

TEST_CASE("save_squad round trip") {
  const auto ex = load_squad(kFixtures + "/three_questions.json");
  const auto dir = testing::scratch_dir("squad");
  save_squad(dir / "x.json", ex);
  const auto back = load_squad(dir / "x.json");
  REQUIRE(back.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].qid == ex[i].qid);
    CHECK(back[i].passage == ex[i].passage);
    CHECK(back[i].is_impossible == ex[i].is_impossible);
    CHECK(back[i].gold_answers.size() == ex[i].gold_answers.size());
  }
}

TEST_CASE("window starts") {
  CHECK(window_starts(8, 5, 3) == std::vector<std::size_t>{0, 3});
  CHECK(window_starts(5, 5, 3) == std::vector<std::size_t>{0});
  CHECK(window_starts(20, 6, 4) == std::vector<std::size_t>{0, 4, 8, 12, 16});
  CHECK_THROWS_AS(window_starts(10, 5, 5), ConfigError);
  CHECK_THROWS_AS(window_starts(10, 5, 0), ConfigError);

  // coverage and overlap property
  for (std::size_t p = 1; p < 60; ++p) {
    for (std::size_t cap = 2; cap < 12; ++cap) {
      for (std::size_t stride = 1; stride < cap; ++stride) {
        const auto s = window_starts(p, cap, stride);
        CHECK(s.front() == 0);
        CHECK(std::min(s.back() + cap, p) == p);
        for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] - s[i - 1] == stride);
      }
    }
  }
}

TEST_CASE("feature layout on a 10-token passage") {
  // words w0..w9; gold "w5 w6" sits at passage tokens 5..6
  std::vector<std::string> words;
  std::string passage;
  for (int i = 0; i < 10; ++i) {
    words.push_back("w" + std::to_string(i));
    passage += (i ? " " : "") + words.back();
  }
  words.push_back("q");
  const auto v = small_vocab(words);
  SquadExample ex;
  ex.qid = "ten";
  ex.passage = passage;
  ex.question = "q q q";
  ex.gold_answers = {{"w5 w6", 15, 15}};
  const auto fs = build_features(ex, v, {64, 8});
  REQUIRE(fs.size() == 1);
  const auto& f = fs[0];
  const std::size_t q_len = 3;
  CHECK(f.span_label == SpanLabel{q_len + 2 + 5, q_len + 2 + 6});
  CHECK(f.ans_label == 0);
  CHECK(f.input_ids[0] == v.cls_id());
  CHECK(f.input_ids[q_len + 1] == v.sep_id());
  CHECK(f.input_ids.back() == v.sep_id());
  for (std::size_t i = 0; i < f.length(); ++i) CHECK(f.type_ids[i] == (i <= q_len + 1 ? 0 : 1));
  CHECK(passage.substr(f.offset_map[f.span_label.start].begin,
                       f.offset_map[f.span_label.end].end - f.offset_map[f.span_label.start].begin) == "w5 w6");

  // window capacity 5, stride 3 on an 8-token passage
  SquadExample eight = ex;
  eight.passage = "w0 w1 w2 w3 w4 w5 w6 w7";
  eight.gold_answers = {{"w6", 18, 18}};
  const auto ws = build_features(eight, v, {q_len + 3 + 5, 3});
  REQUIRE(ws.size() == 2);
  CHECK(ws[0].passage_token_offset == 0);
  CHECK(ws[0].passage_end - ws[0].passage_begin == 5);
  CHECK(ws[1].passage_token_offset == 3);
  CHECK(ws[1].passage_end - ws[1].passage_begin == 5);
  // w6 only lives in the second window
  CHECK(ws[0].ans_label == 1);
  CHECK(ws[0].span_label == SpanLabel{0, 0});
  CHECK(ws[1].ans_label == 0);

  SquadExample longq = ex;
  longq.question = "q q q q q q q q";
  try {
    build_features(longq, v, {10, 2});
    FAIL("no throw");
  } catch (const FeatureError& e) {
    CHECK(std::string(e.what()).find("ten") != std::string::npos);
  }
}

TEST_CASE("unanswerable example gives the null label") {
  const auto ex = load_squad(kFixtures + "/three_questions.json");
  const auto v = corpus_vocab(ex);
  const auto fs = build_features(ex[1], v);
  REQUIRE(fs.size() == 1);
  CHECK(fs[0].span_label == SpanLabel{0, 0});
  CHECK(fs[0].ans_label == 1);
}

TEST_CASE("feature invariants on the synthetic corpus") {
  SyntheticOptions o;
  o.size = 200;
  const auto examples = make_synthetic_squad(o);
  const auto v = corpus_vocab(examples);
  for (const FeatureOptions fo : {FeatureOptions{64, 8}, FeatureOptions{16, 3}}) {
    for (const auto& ex : examples) {
      for (const auto& f : build_features(ex, v, fo)) {
        CHECK(f.length() <= fo.max_len);
        CHECK(f.input_ids[0] == v.cls_id());
        if (f.ans_label == 1) CHECK(f.span_label == SpanLabel{0, 0});
        std::size_t prev_end = 0;
        for (std::size_t p = f.passage_begin; p < f.passage_end; ++p) {
          CHECK(f.offset_map[p].valid());
          CHECK(f.offset_map[p].begin >= prev_end);
          prev_end = f.offset_map[p].end;
        }
        if (f.ans_label == 0) {
          CHECK(f.is_passage_position(f.span_label.start));
          CHECK(f.is_passage_position(f.span_label.end));
          const auto b = f.offset_map[f.span_label.start].begin;
          const auto e = f.offset_map[f.span_label.end].end;
          CHECK(ex.passage.substr(b, e - b) == ex.gold_answers[0].text);
        }
      }
    }
  }
}

TEST_CASE("make_batch") {
  const auto examples = make_synthetic_squad({});
  const auto v = corpus_vocab(examples);
  auto fs = build_all_features(std::span(examples).first(2), v);
  fs[0].input_ids.resize(5);
  fs[0].type_ids.resize(5);
  fs[0].attention_mask.resize(5);
  fs[1].input_ids.resize(9, 7);
  fs[1].type_ids.resize(9, 1);
  fs[1].attention_mask.resize(9, 1);
  const auto b = make_batch(fs, v.pad_id());
  CHECK(b.rows == 2);
  CHECK(b.cols == 9);
  for (std::size_t c = 5; c < 9; ++c) {
    CHECK(b.mask_row(0)[c] == 0);
    CHECK(b.ids_row(0)[c] == v.pad_id());
  }
  CHECK(b.span_labels[1] == fs[1].span_label);
  CHECK(b.qids[0] == fs[0].qid);

  const auto one = make_batch(std::span(fs).first(1), v.pad_id());
  CHECK(one.cols == 5);
  for (auto m : one.attention_mask) CHECK(m == 1);
  CHECK_THROWS_AS(make_batch(std::span<const Feature>(), v.pad_id()), EmptyBatchError);
}

TEST_CASE("feature dump is one JSON object per line") {
  const auto examples = make_synthetic_squad({});
  const auto v = corpus_vocab(examples);
  const auto fs = build_all_features(examples, v);
  const auto dir = testing::scratch_dir("features");
  write_features_jsonl(dir / "f.jsonl", fs);
  std::ifstream in(dir / "f.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("qid") == fs[n].qid);
    ++n;
  }
  CHECK(n == fs.size());
}

TEST_CASE("synthetic corpus") {
  const auto a = make_synthetic_squad({});
  const auto b = make_synthetic_squad({});
  REQUIRE(a.size() == 64);
  std::size_t unanswerable = 0;
  std::set<std::string> qids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].question == b[i].question);
    unanswerable += a[i].is_impossible;
    qids.insert(a[i].qid);
    for (const auto& g : a[i].gold_answers) CHECK(a[i].passage.substr(g.byte_start, g.text.size()) == g.text);
  }
  CHECK(unanswerable == 32);
  CHECK(qids.size() == a.size());

  const auto sep = make_separable_answerability_set(16, 3);
  REQUIRE(sep.size() == 16);
  for (std::size_t i = 0; i < sep.size(); ++i) CHECK(sep[i].is_impossible == (i % 2 == 1));
}
