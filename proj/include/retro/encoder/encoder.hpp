#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retro/numerics/checkpoint.hpp"
#include "retro/numerics/ops.hpp"
#include "retro/numerics/tensor.hpp"

namespace retro {

// Desk-scale defaults; none of these are properties of the method itself.
struct EncoderConfig {
  std::size_t vocab_size = 200;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t max_positions = 64;
  std::size_t type_vocab_size = 2;
  double dropout_rate = 0.1;

  void validate() const;
  std::size_t head_dim() const { return hidden_dim / num_heads; }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Projections act on row vectors: q = x·wq + bq.
struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionWeights init(std::size_t dim, Rng& rng);
  void append_to(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

struct LayerWeights {
  AttentionWeights attention;
  Tensor attn_norm_gamma, attn_norm_beta;
  Tensor ffn_in, ffn_in_bias;    // (d, ffn), (ffn)
  Tensor ffn_out, ffn_out_bias;  // (ffn, d), (d)
  Tensor ffn_norm_gamma, ffn_norm_beta;
};

struct EncoderWeights {
  EncoderConfig config;
  Tensor token_embedding;     // (vocab, d)
  Tensor position_embedding;  // (max_positions, d)
  Tensor type_embedding;      // (type_vocab, d)
  Tensor embed_norm_gamma, embed_norm_beta;
  std::vector<LayerWeights> layers;

  static EncoderWeights init(const EncoderConfig& config, Rng& rng);
  std::vector<NamedTensor> named_parameters(const std::string& prefix = "encoder.") const;
};

// Optional capture of per-head attention probabilities (n_query, n_key).
struct AttentionTrace {
  std::vector<Tensor> probabilities;
};

// tok[id] + pos[i] + type[t], before normalisation.
Tensor embed_sum(const EncoderWeights& w, std::span<const int> input_ids,
                 std::span<const int> type_ids);
// embed_sum, then layer norm and dropout.
Tensor embed(const EncoderWeights& w, std::span<const int> input_ids, std::span<const int> type_ids,
             const ForwardContext& ctx);

// Scaled dot-product attention of `queries` over `keys_values`, split into
// heads, concatenated and passed through the output projection. Keys with
// key_mask == 0 receive no weight. No residual, no normalisation.
Tensor attend(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_mask,
              const AttentionWeights& w, std::size_t num_heads, AttentionTrace* trace = nullptr);

// Self-attention sublayer: layer_norm(x + dropout(attend(x, x))).
Tensor multi_head_self_attention(const Tensor& x, std::span<const std::uint8_t> mask,
                                 const LayerWeights& layer, const EncoderConfig& config,
                                 const ForwardContext& ctx, AttentionTrace* trace = nullptr);

// FFN sublayer: layer_norm(x + dropout(gelu(x·W1 + b1)·W2 + b2)).
Tensor feed_forward(const Tensor& x, const LayerWeights& layer, const EncoderConfig& config,
                    const ForwardContext& ctx);

// Last-layer hidden states H, shape (n, hidden_dim).
Tensor encode(std::span<const int> input_ids, std::span<const int> type_ids,
              std::span<const std::uint8_t> mask, const EncoderWeights& w, const ForwardContext& ctx);

}  // namespace retro
