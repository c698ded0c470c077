#include "retro/readers/intensive.hpp"

#include <cmath>

#include "retro/errors.hpp"
#include "retro/readers/sketchy.hpp"

namespace retro {

IfvVariant parse_ifv_variant(std::string_view text) {
  if (text == "ce") return IfvVariant::ce;
  if (text == "be") return IfvVariant::be;
  if (text == "mse") return IfvVariant::mse;
  throw ConfigError("unknown I-FV variant '" + std::string(text) + "' (expected ce, be or mse)");
}

std::string to_string(IfvVariant v) {
  switch (v) {
    case IfvVariant::ce: return "ce";
    case IfvVariant::be: return "be";
    case IfvVariant::mse: return "mse";
  }
  throw ConfigError("unknown I-FV variant");
}

Matching parse_matching(std::string_view text) {
  if (text == "none") return Matching::none;
  if (text == "ca") return Matching::cross_attention;
  if (text == "ma") return Matching::matching_attention;
  throw ConfigError("unknown matching layer '" + std::string(text) + "' (expected none, ca or ma)");
}

std::string to_string(Matching m) {
  switch (m) {
    case Matching::none: return "none";
    case Matching::cross_attention: return "ca";
    case Matching::matching_attention: return "ma";
  }
  throw ConfigError("unknown matching layer");
}

std::size_t ifv_output_size(IfvVariant v) { return v == IfvVariant::ce ? 2 : 1; }

void to_json(nlohmann::json& j, const IntensiveConfig& c) {
  j = {{"encoder", c.encoder},
       {"matching", to_string(c.matching)},
       {"ifv", c.ifv ? nlohmann::json(to_string(*c.ifv)) : nlohmann::json(nullptr)},
       {"max_answer_len", c.max_answer_len}};
}

void from_json(const nlohmann::json& j, IntensiveConfig& c) {
  j.at("encoder").get_to(c.encoder);
  c.matching = parse_matching(j.at("matching").get<std::string>());
  const auto& ifv = j.at("ifv");
  c.ifv = ifv.is_null() ? std::nullopt : std::optional(parse_ifv_variant(ifv.get<std::string>()));
  j.at("max_answer_len").get_to(c.max_answer_len);
}

IntensiveModel IntensiveModel::init(const IntensiveConfig& config, std::uint64_t seed) {
  config.encoder.validate();
  Rng rng(seed);
  const std::size_t d = config.encoder.hidden_dim;
  IntensiveModel m;
  m.config = config;
  m.encoder = EncoderWeights::init(config.encoder, rng);
  m.span_weight = normal_tensor({d, 2}, 0.02, rng);
  m.span_bias = Tensor::zeros({2}, true);
  if (config.matching == Matching::cross_attention) {
    m.cross.attention = AttentionWeights::init(d, rng);
    m.cross.norm_gamma = Tensor::full({d}, 1.0, true);
    m.cross.norm_beta = Tensor::zeros({d}, true);
  } else if (config.matching == Matching::matching_attention) {
    m.match.weight = normal_tensor({d, d}, 0.02, rng);
    m.match.bias = Tensor::zeros({d}, true);
  }
  // Drawn last so that readers with and without the verifier head share
  // every other initial weight for the same seed.
  if (config.ifv) {
    const std::size_t k = ifv_output_size(*config.ifv);
    m.ifv_weight = normal_tensor({d, k}, 0.02, rng);
    m.ifv_bias = Tensor::zeros({k}, true);
  }
  return m;
}

std::vector<NamedTensor> IntensiveModel::named_parameters() const {
  auto params = encoder.named_parameters();
  params.push_back({"span.weight", span_weight});
  params.push_back({"span.bias", span_bias});
  if (config.matching == Matching::cross_attention) {
    cross.attention.append_to(params, "matching.cross.");
    params.push_back({"matching.cross.norm.gamma", cross.norm_gamma});
    params.push_back({"matching.cross.norm.beta", cross.norm_beta});
  } else if (config.matching == Matching::matching_attention) {
    params.push_back({"matching.attention.weight", match.weight});
    params.push_back({"matching.attention.bias", match.bias});
  }
  if (config.ifv) {
    params.push_back({"ifv.weight", ifv_weight});
    params.push_back({"ifv.bias", ifv_bias});
  }
  return params;
}

QuestionPassageSplit split_question_passage(const Tensor& hidden, std::span<const int> type_ids,
                                            std::span<const std::uint8_t> mask) {
  const std::size_t n = hidden.rows();
  if (type_ids.size() != n || mask.size() != n) {
    throw DimensionError("split_question_passage: type ids / mask do not match " +
                         std::to_string(n) + " rows");
  }
  std::vector<std::size_t> segment0, segment1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (type_ids[i] == 0) {
      if (!segment1.empty()) {
        throw SegmentationError("split_question_passage: question segment resumes at position " +
                                std::to_string(i));
      }
      segment0.push_back(i);
    } else {
      segment1.push_back(i);
    }
  }
  // Drop [CLS] and the first [SEP] from the question, the final [SEP] from
  // the passage.
  if (segment0.size() < 3) throw SegmentationError("split_question_passage: empty question segment");
  if (segment1.size() < 2) throw SegmentationError("split_question_passage: empty passage segment");
  QuestionPassageSplit split;
  split.question_rows.assign(segment0.begin() + 1, segment0.end() - 1);
  split.passage_rows.assign(segment1.begin(), segment1.end() - 1);
  split.question = gather_rows(hidden, split.question_rows);
  split.passage = gather_rows(hidden, split.passage_rows);
  return split;
}

Tensor cross_attention(const Tensor& hidden, const Tensor& question, const CrossAttentionWeights& w,
                       std::size_t num_heads, double dropout_rate, const ForwardContext& ctx) {
  const std::vector<std::uint8_t> all_keys(question.rows(), 1);
  const Tensor attended = attend(hidden, question, all_keys, w.attention, num_heads);
  return layer_norm(add(hidden, dropout(attended, dropout_rate, ctx)), w.norm_gamma, w.norm_beta);
}

Tensor matching_weights(const Tensor& hidden, const Tensor& question, const Tensor& weight,
                        const Tensor& bias) {
  const std::size_t d = hidden.cols();
  if (question.cols() != d || weight.rank() != 2 || weight.dim(0) != d || weight.dim(1) != d ||
      bias.size() != d) {
    throw DimensionError("matching_attention: expected H (n," + std::to_string(d) +
                         "), H^Q (m,d), W (d,d), b (d); got H^Q " + shape_string(question.shape()) +
                         ", W " + shape_string(weight.shape()) + ", b " + shape_string(bias.shape()));
  }
  const Tensor projected = add_row(matmul_bt(question, weight), bias);  // (m, d)
  return softmax_rows(matmul_bt(hidden, projected));                    // (n, m)
}

Tensor matching_attention(const Tensor& hidden, const Tensor& question, const Tensor& weight,
                          const Tensor& bias) {
  return matmul(matching_weights(hidden, question, weight, bias), question);
}

SpanLogits span_forward(const Tensor& hidden, const Tensor& weight, const Tensor& bias,
                        std::span<const std::uint8_t> mask) {
  const std::size_t n = hidden.rows();
  if (mask.size() != n) {
    throw DimensionError("span_forward: mask of length " + std::to_string(mask.size()) + " for " +
                         std::to_string(n) + " positions");
  }
  const Tensor logits = add_row(matmul(hidden, weight), bias);  // (n, 2)
  SpanLogits out;
  out.start = masked_fill_cols(reshape(slice_cols(logits, 0, 1), {n}), mask);
  out.end = masked_fill_cols(reshape(slice_cols(logits, 1, 2), {n}), mask);
  return out;
}

Tensor span_loss(std::span<const SpanLogits> logits, std::span<const SpanLabel> labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw LabelError("span_loss: " + std::to_string(logits.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<Tensor> terms;
  terms.reserve(2 * logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& [ys, ye] = labels[i];
    const std::size_t n = logits[i].length();
    // -inf marks a masked position; NaN is left for the trainer's loss guard
    auto masked = [](double x) { return std::isinf(x) && x < 0.0; };
    if (ys > ye || ye >= n || masked(logits[i].start[ys]) || masked(logits[i].end[ye])) {
      throw LabelError("span_loss: label (" + std::to_string(ys) + "," + std::to_string(ye) +
                       ") outside the unmasked range of a length-" + std::to_string(n) + " sequence");
    }
    terms.push_back(cross_entropy_from_logits(logits[i].start, ys));
    terms.push_back(cross_entropy_from_logits(logits[i].end, ye));
  }
  return scale(add_n(terms), 1.0 / static_cast<double>(logits.size()));
}

Tensor ifv_forward(const Tensor& hidden, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(slice_rows(hidden, 0, 1), weight), bias);
}

Tensor ifv_loss(std::span<const Tensor> outputs, std::span<const int> labels, IfvVariant variant) {
  if (outputs.size() != labels.size() || outputs.empty()) {
    throw LabelError("ifv_loss: " + std::to_string(outputs.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t width = ifv_output_size(variant);
  std::vector<Tensor> terms;
  terms.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const int y = labels[i];
    if (y != kAnswerable && y != kUnanswerable) {
      throw LabelError("ifv_loss: answerability label must be 0 or 1, got " + std::to_string(y));
    }
    if (outputs[i].size() != width) {
      throw DimensionError("ifv_loss: " + to_string(variant) + " expects " + std::to_string(width) +
                           " outputs, got " + shape_string(outputs[i].shape()));
    }
    switch (variant) {
      case IfvVariant::ce:
        terms.push_back(cross_entropy_from_logits(outputs[i], static_cast<std::size_t>(y)));
        break;
      case IfvVariant::be:
        terms.push_back(bce_with_logits(outputs[i], y));
        break;
      case IfvVariant::mse:
        terms.push_back(squared_error(outputs[i], y));
        break;
    }
  }
  return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Tensor joint_loss(const Tensor& span, const Tensor& answerability, double alpha1, double alpha2) {
  if (alpha1 < 0.0 || alpha2 < 0.0) {
    throw ConfigError("joint_loss: weights must be non-negative (alpha1=" + std::to_string(alpha1) +
                      ", alpha2=" + std::to_string(alpha2) + ")");
  }
  return add(scale(span, alpha1), scale(answerability, alpha2));
}

IntensiveOutput intensive_forward(const IntensiveModel& model, std::span<const int> input_ids,
                                  std::span<const int> type_ids, std::span<const std::uint8_t> mask,
                                  const ForwardContext& ctx) {
  const auto& cfg = model.config;
  IntensiveOutput out;
  Tensor h = encode(input_ids, type_ids, mask, model.encoder, ctx);
  if (cfg.matching != Matching::none) {
    const auto split = split_question_passage(h, type_ids, mask);
    h = cfg.matching == Matching::cross_attention
            ? cross_attention(h, split.question, model.cross, cfg.encoder.num_heads,
                              cfg.encoder.dropout_rate, ctx)
            : matching_attention(h, split.question, model.match.weight, model.match.bias);
  }
  out.hidden = h;
  out.span = span_forward(h, model.span_weight, model.span_bias, mask);
  if (cfg.ifv) out.ifv = ifv_forward(h, model.ifv_weight, model.ifv_bias);
  return out;
}

}  // namespace retro
