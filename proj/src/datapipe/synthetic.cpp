#include "retro/datapipe/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string_view>

namespace retro {

namespace {

constexpr std::array<std::string_view, 16> kNames = {
    "Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi",
    "Ivan", "Judy", "Kevin", "Laura", "Mike", "Nina", "Oscar", "Paula"};

struct Relation {
  std::string_view fact_prefix;  // "{name} lives in "
  std::string_view question;     // "Where does {name} live ?"
  std::array<std::string_view, 8> values;
};

const std::array<Relation, 4> kRelations = {{
    {" lives in ", " live ?",
     {"Paris", "London", "Tokyo", "New York", "Cairo", "Lima", "Oslo", "Buenos Aires"}},
    {" works at the ", " work ?",
     {"bank", "museum", "library", "city hospital", "school", "bakery", "factory", "airport"}},
    {" likes ", " like ?",
     {"green tea", "apples", "jazz", "chess", "pizza", "coffee", "poetry", "rice"}},
    {" owns a ", " own ?",
     {"red car", "bike", "boat", "dog", "cat", "piano", "camera", "horse"}},
}};

std::string_view question_word(std::size_t relation) { return relation < 2 ? "Where" : "What"; }

struct Fact {
  std::size_t name;
  std::size_t relation;
  std::size_t value;
};

template <typename Rng>
std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Passage text plus the byte offset of every fact's value.
std::pair<std::string, std::vector<std::size_t>> render(const std::vector<Fact>& facts) {
  std::string text;
  std::vector<std::size_t> value_offsets;
  for (const auto& f : facts) {
    if (!text.empty()) text += ' ';
    text += kNames[f.name];
    text += kRelations[f.relation].fact_prefix;
    value_offsets.push_back(text.size());
    text += kRelations[f.relation].values[f.value];
    text += " .";
  }
  return {text, value_offsets};
}

std::string ask(std::size_t name, std::size_t relation) {
  std::string q(question_word(relation));
  q += " does ";
  q += kNames[name];
  q += kRelations[relation].question;
  return q;
}

SquadExample make_example(std::string qid, const std::vector<Fact>& facts, bool answerable,
                          std::size_t target_fact, std::size_t ask_name, std::size_t ask_relation) {
  const auto [passage, offsets] = render(facts);
  SquadExample ex;
  ex.qid = std::move(qid);
  ex.passage = passage;
  ex.is_impossible = !answerable;
  if (answerable) {
    const Fact& f = facts[target_fact];
    ex.question = ask(f.name, f.relation);
    GoldAnswer g;
    g.text = std::string(kRelations[f.relation].values[f.value]);
    g.byte_start = offsets[target_fact];
    g.char_start = g.byte_start;  // ASCII corpus
    ex.gold_answers.push_back(std::move(g));
  } else {
    ex.question = ask(ask_name, ask_relation);
  }
  return ex;
}

}  // namespace

std::vector<SquadExample> make_synthetic_squad(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<SquadExample> out;
  const auto unanswerable = static_cast<std::size_t>(
      static_cast<double>(options.size) * options.unanswerable_fraction + 0.5);
  std::vector<bool> impossible(options.size, false);
  std::fill_n(impossible.begin(), std::min(unanswerable, options.size), true);
  std::shuffle(impossible.begin(), impossible.end(), rng);

  for (std::size_t i = 0; i < options.size; ++i) {
    std::array<std::size_t, kNames.size()> names{};
    for (std::size_t k = 0; k < names.size(); ++k) names[k] = k;
    std::shuffle(names.begin(), names.end(), rng);
    std::vector<Fact> facts;
    for (std::size_t k = 0; k < 3; ++k) {
      facts.push_back({names[k], pick(rng, kRelations.size()), pick(rng, 8)});
    }
    const std::string qid = options.qid_prefix + "-" + std::to_string(i);
    if (!impossible[i]) {
      out.push_back(make_example(qid, facts, true, pick(rng, facts.size()), 0, 0));
      continue;
    }
    // Either a person from the passage with a relation not stated for them,
    // or a person who is not mentioned at all.
    std::size_t who, what;
    if (pick(rng, 2) == 0) {
      const Fact& f = facts[pick(rng, facts.size())];
      who = f.name;
      do {
        what = pick(rng, kRelations.size());
      } while (what == f.relation);
    } else {
      who = names[3 + pick(rng, names.size() - 3)];
      what = pick(rng, kRelations.size());
    }
    out.push_back(make_example(qid, facts, false, 0, who, what));
  }
  return out;
}

std::vector<SquadExample> make_separable_answerability_set(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SquadExample> out;
  for (std::size_t i = 0; i < size; ++i) {
    std::array<std::size_t, kNames.size()> names{};
    for (std::size_t k = 0; k < names.size(); ++k) names[k] = k;
    std::shuffle(names.begin(), names.end(), rng);
    std::vector<Fact> facts;
    for (std::size_t k = 0; k < 3; ++k) facts.push_back({names[k], pick(rng, 2), pick(rng, 8)});
    const std::string qid = "sep-" + std::to_string(i);
    if (i % 2 == 0) {
      out.push_back(make_example(qid, facts, true, pick(rng, facts.size()), 0, 0));
    } else {
      out.push_back(make_example(qid, facts, false, 0, facts[pick(rng, facts.size())].name,
                                 2 + pick(rng, 2)));
    }
  }
  return out;
}

}  // namespace retro
