#include "retro/datapipe/features.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "retro/errors.hpp"

namespace retro {

std::vector<std::size_t> window_starts(std::size_t passage_tokens, std::size_t capacity,
                                       std::size_t stride) {
  std::vector<std::size_t> starts{0};
  if (passage_tokens <= capacity) return starts;
  if (stride == 0 || stride >= capacity) {
    throw ConfigError("features: doc_stride " + std::to_string(stride) +
                      " must be positive and below the window capacity " + std::to_string(capacity));
  }
  std::size_t start = 0;
  while (start + capacity < passage_tokens) {
    start += stride;
    starts.push_back(start);
  }
  return starts;
}

std::vector<Feature> build_features(const SquadExample& example, const Vocab& vocab,
                                    const FeatureOptions& options) {
  const Tokenized question = wordpiece_tokenize(example.question, vocab);
  const Tokenized passage = wordpiece_tokenize(example.passage, vocab);
  const std::size_t q_len = question.tokens.size();
  if (q_len + 4 > options.max_len) {
    throw FeatureError("features: question of " + std::to_string(q_len) +
                       " tokens exceeds the max_len budget of " + std::to_string(options.max_len) +
                       " (qid " + example.qid + ")");
  }
  if (passage.tokens.empty()) {
    throw FeatureError("features: passage has no tokens (qid " + example.qid + ")");
  }
  const std::size_t capacity = options.max_len - q_len - 3;

  // Gold span in passage-token coordinates (first answer drives training).
  bool has_gold = false;
  std::size_t gold_first = 0, gold_last = 0;
  if (!example.is_impossible && !example.gold_answers.empty()) {
    const auto& gold = example.gold_answers.front();
    const std::size_t begin = gold.byte_start;
    const std::size_t end = gold.byte_start + gold.text.size();
    std::size_t first = passage.spans.size(), last = passage.spans.size();
    for (std::size_t t = 0; t < passage.spans.size(); ++t) {
      if (first == passage.spans.size() && passage.spans[t].end > begin) first = t;
      if (passage.spans[t].begin < end) last = t;
    }
    if (first < passage.spans.size() && last < passage.spans.size() && first <= last) {
      has_gold = true;
      gold_first = first;
      gold_last = last;
    }
  }

  std::vector<Feature> features;
  std::size_t window = 0;
  for (const std::size_t start : window_starts(passage.tokens.size(), capacity, options.doc_stride)) {
    const std::size_t stop = std::min(start + capacity, passage.tokens.size());
    Feature f;
    f.qid = example.qid;
    f.window_index = window++;
    f.passage_token_offset = start;

    auto push = [&](int id, int type, CharSpan span) {
      f.input_ids.push_back(id);
      f.type_ids.push_back(type);
      f.attention_mask.push_back(1);
      f.offset_map.push_back(span);
    };
    push(vocab.cls_id(), 0, CharSpan::none());
    for (const auto& t : question.tokens) push(vocab.lookup(t), 0, CharSpan::none());
    push(vocab.sep_id(), 0, CharSpan::none());
    f.passage_begin = f.input_ids.size();
    for (std::size_t t = start; t < stop; ++t) push(vocab.lookup(passage.tokens[t]), 1, passage.spans[t]);
    f.passage_end = f.input_ids.size();
    push(vocab.sep_id(), 1, CharSpan::none());

    if (has_gold && gold_first >= start && gold_last < stop) {
      f.span_label = {f.passage_begin + gold_first - start, f.passage_begin + gold_last - start};
      f.ans_label = 0;
    } else {
      f.span_label = {0, 0};
      f.ans_label = 1;
    }
    features.push_back(std::move(f));
  }
  return features;
}

std::vector<Feature> build_all_features(std::span<const SquadExample> examples, const Vocab& vocab,
                                        const FeatureOptions& options) {
  std::vector<Feature> all;
  for (const auto& ex : examples) {
    auto f = build_features(ex, vocab, options);
    std::move(f.begin(), f.end(), std::back_inserter(all));
  }
  return all;
}

Batch make_batch(std::span<const Feature* const> features, int pad_id) {
  if (features.empty()) throw EmptyBatchError("make_batch: empty feature list");
  Batch b;
  b.rows = features.size();
  for (const auto* f : features) b.cols = std::max(b.cols, f->length());
  b.input_ids.assign(b.rows * b.cols, pad_id);
  b.type_ids.assign(b.rows * b.cols, 0);
  b.attention_mask.assign(b.rows * b.cols, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const Feature& f = *features[r];
    std::copy(f.input_ids.begin(), f.input_ids.end(), b.input_ids.begin() + r * b.cols);
    std::copy(f.type_ids.begin(), f.type_ids.end(), b.type_ids.begin() + r * b.cols);
    std::copy(f.attention_mask.begin(), f.attention_mask.end(), b.attention_mask.begin() + r * b.cols);
    b.span_labels.push_back(f.span_label);
    b.ans_labels.push_back(f.ans_label);
    b.qids.push_back(f.qid);
  }
  return b;
}

Batch make_batch(std::span<const Feature> features, int pad_id) {
  std::vector<const Feature*> ptrs;
  ptrs.reserve(features.size());
  for (const auto& f : features) ptrs.push_back(&f);
  return make_batch(std::span<const Feature* const>(ptrs), pad_id);
}

void write_features_jsonl(const std::filesystem::path& path, std::span<const Feature> features) {
  std::ofstream out(path);
  if (!out) throw ConfigError("features: cannot open " + path.string() + " for writing");
  for (const auto& f : features) {
    nlohmann::json offsets = nlohmann::json::array();
    for (const auto& s : f.offset_map) {
      offsets.push_back(s.valid() ? nlohmann::json::array({s.begin, s.end}) : nlohmann::json(nullptr));
    }
    nlohmann::json row = {{"qid", f.qid},
                          {"window", f.window_index},
                          {"input_ids", f.input_ids},
                          {"type_ids", f.type_ids},
                          {"attention_mask", f.attention_mask},
                          {"offset_map", offsets},
                          {"span_label", {f.span_label.start, f.span_label.end}},
                          {"ans_label", f.ans_label}};
    out << row.dump() << '\n';
  }
}

}  // namespace retro
