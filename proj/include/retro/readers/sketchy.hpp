#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "retro/encoder/encoder.hpp"

namespace retro {

// Answerability labels are shared by both readers: 1 means unanswerable.
inline constexpr int kAnswerable = 0;
inline constexpr int kUnanswerable = 1;

// Affine (hidden_dim -> 2) head on the [CLS] row. Column 0 is the
// answerable logit, column 1 the unanswerable one.
struct EfvHead {
  Tensor weight;  // (d, 2)
  Tensor bias;    // (2)

  static EfvHead init(std::size_t hidden_dim, Rng& rng);
};

struct EfvOutput {
  double logit_ans = 0.0;
  double logit_na = 0.0;
  double score_ext = 0.0;  // logit_na - logit_ans
  Tensor logits;           // (1, 2), differentiable
};

EfvOutput efv_forward(const Tensor& hidden, const EfvHead& head);

// Mean two-class cross entropy over the batch.
Tensor efv_loss(std::span<const Tensor> logits, std::span<const int> labels);

struct SketchyModel {
  EncoderWeights encoder;
  EfvHead head;

  static SketchyModel init(const EncoderConfig& config, std::uint64_t seed);
  std::vector<NamedTensor> named_parameters() const;

  EfvOutput forward(std::span<const int> input_ids, std::span<const int> type_ids,
                    std::span<const std::uint8_t> mask, const ForwardContext& ctx) const;
};

}  // namespace retro
