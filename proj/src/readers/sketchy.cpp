#include "retro/readers/sketchy.hpp"

#include <string>

#include "retro/errors.hpp"

namespace retro {

EfvHead EfvHead::init(std::size_t hidden_dim, Rng& rng) {
  return {normal_tensor({hidden_dim, 2}, 0.02, rng), Tensor::zeros({2}, true)};
}

EfvOutput efv_forward(const Tensor& hidden, const EfvHead& head) {
  if (hidden.rank() != 2) throw DimensionError("efv_forward: expected hidden states (n, d)");
  const Tensor cls = slice_rows(hidden, 0, 1);
  EfvOutput out;
  out.logits = add_row(matmul(cls, head.weight), head.bias);
  out.logit_ans = out.logits[0];
  out.logit_na = out.logits[1];
  out.score_ext = out.logit_na - out.logit_ans;
  return out;
}

Tensor efv_loss(std::span<const Tensor> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw LabelError("efv_loss: " + std::to_string(logits.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<Tensor> terms;
  terms.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != kAnswerable && labels[i] != kUnanswerable) {
      throw LabelError("efv_loss: answerability label must be 0 or 1, got " + std::to_string(labels[i]));
    }
    if (logits[i].size() != 2) throw DimensionError("efv_loss: expected two logits per example");
    terms.push_back(cross_entropy_from_logits(logits[i], static_cast<std::size_t>(labels[i])));
  }
  return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

SketchyModel SketchyModel::init(const EncoderConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  SketchyModel m;
  m.encoder = EncoderWeights::init(config, rng);
  m.head = EfvHead::init(config.hidden_dim, rng);
  return m;
}

std::vector<NamedTensor> SketchyModel::named_parameters() const {
  auto params = encoder.named_parameters();
  params.push_back({"efv.weight", head.weight});
  params.push_back({"efv.bias", head.bias});
  return params;
}

EfvOutput SketchyModel::forward(std::span<const int> input_ids, std::span<const int> type_ids,
                                std::span<const std::uint8_t> mask, const ForwardContext& ctx) const {
  return efv_forward(encode(input_ids, type_ids, mask, encoder, ctx), head);
}

}  // namespace retro
