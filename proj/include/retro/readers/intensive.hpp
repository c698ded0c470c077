#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retro/datapipe/features.hpp"
#include "retro/encoder/encoder.hpp"

namespace retro {

// Internal front verification loss family.
enum class IfvVariant { ce, be, mse };
// Optional question-aware matching layer between encoder and heads.
enum class Matching { none, cross_attention, matching_attention };

IfvVariant parse_ifv_variant(std::string_view text);
std::string to_string(IfvVariant v);
Matching parse_matching(std::string_view text);
std::string to_string(Matching m);

// Output width of the I-FV head: two logits for CE, one value otherwise.
std::size_t ifv_output_size(IfvVariant v);

struct IntensiveConfig {
  EncoderConfig encoder;
  Matching matching = Matching::none;
  // nullopt trains and runs a span-only reader (plain TAV baseline).
  std::optional<IfvVariant> ifv = IfvVariant::ce;
  std::size_t max_answer_len = 30;
};

void to_json(nlohmann::json& j, const IntensiveConfig& c);
void from_json(const nlohmann::json& j, IntensiveConfig& c);

struct CrossAttentionWeights {
  AttentionWeights attention;
  Tensor norm_gamma, norm_beta;
};

struct MatchingWeights {
  Tensor weight;  // (d, d)
  Tensor bias;    // (d)
};

// Start/end logits over the sequence; padded positions hold -inf.
struct SpanLogits {
  Tensor start;  // (n)
  Tensor end;    // (n)

  std::size_t length() const { return start.size(); }
};

struct IntensiveModel {
  IntensiveConfig config;
  EncoderWeights encoder;
  CrossAttentionWeights cross;    // used when matching == cross_attention
  MatchingWeights match;          // used when matching == matching_attention
  Tensor span_weight, span_bias;  // (d, 2), (2)
  Tensor ifv_weight, ifv_bias;    // (d, k), (k); undefined for span-only readers

  static IntensiveModel init(const IntensiveConfig& config, std::uint64_t seed);
  std::vector<NamedTensor> named_parameters() const;
};

struct IntensiveOutput {
  Tensor hidden;   // H' (n, d)
  SpanLogits span;
  Tensor ifv;      // (1, k) or undefined
};

IntensiveOutput intensive_forward(const IntensiveModel& model, std::span<const int> input_ids,
                                  std::span<const int> type_ids, std::span<const std::uint8_t> mask,
                                  const ForwardContext& ctx);

// ---- question-aware matching ----------------------------------------------

struct QuestionPassageSplit {
  Tensor question;  // H^Q: question tokens, [CLS] and [SEP] excluded
  Tensor passage;   // H^P: passage tokens, final [SEP] and padding excluded
  std::vector<std::size_t> question_rows;
  std::vector<std::size_t> passage_rows;
};

QuestionPassageSplit split_question_passage(const Tensor& hidden, std::span<const int> type_ids,
                                            std::span<const std::uint8_t> mask);

// One multi-head layer with queries from H and keys/values from H^Q,
// followed by residual + layer norm.
Tensor cross_attention(const Tensor& hidden, const Tensor& question, const CrossAttentionWeights& w,
                       std::size_t num_heads, double dropout_rate, const ForwardContext& ctx);

// M = softmax_rows(H · (H^Q W^T + 1 b^T)^T), shape (n, m).
Tensor matching_weights(const Tensor& hidden, const Tensor& question, const Tensor& weight,
                        const Tensor& bias);
// H' = M H^Q.
Tensor matching_attention(const Tensor& hidden, const Tensor& question, const Tensor& weight,
                          const Tensor& bias);

// ---- heads and losses --------------------------------------------------------

SpanLogits span_forward(const Tensor& hidden, const Tensor& weight, const Tensor& bias,
                        std::span<const std::uint8_t> mask);

// Mean over the batch of -[log p_start(y_s) + log p_end(y_e)].
Tensor span_loss(std::span<const SpanLogits> logits, std::span<const SpanLabel> labels);

Tensor ifv_forward(const Tensor& hidden, const Tensor& weight, const Tensor& bias);
Tensor ifv_loss(std::span<const Tensor> outputs, std::span<const int> labels, IfvVariant variant);

Tensor joint_loss(const Tensor& span, const Tensor& answerability, double alpha1, double alpha2);

}  // namespace retro
