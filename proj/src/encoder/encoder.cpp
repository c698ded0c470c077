#include "retro/encoder/encoder.hpp"

#include <cmath>

#include "retro/errors.hpp"

namespace retro {

namespace {

constexpr double kInitStd = 0.02;

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size == 0 || hidden_dim == 0 || num_heads == 0 || ffn_dim == 0 || max_positions == 0 ||
      type_vocab_size == 0) {
    throw ConfigError("encoder: every dimension must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("encoder: hidden_dim " + std::to_string(hidden_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("encoder: dropout_rate must lie in [0,1)");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"vocab_size", c.vocab_size},       {"hidden_dim", c.hidden_dim},
       {"num_layers", c.num_layers},       {"num_heads", c.num_heads},
       {"ffn_dim", c.ffn_dim},             {"max_positions", c.max_positions},
       {"type_vocab_size", c.type_vocab_size}, {"dropout_rate", c.dropout_rate}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("hidden_dim").get_to(c.hidden_dim);
  j.at("num_layers").get_to(c.num_layers);
  j.at("num_heads").get_to(c.num_heads);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("max_positions").get_to(c.max_positions);
  j.at("type_vocab_size").get_to(c.type_vocab_size);
  j.at("dropout_rate").get_to(c.dropout_rate);
}

AttentionWeights AttentionWeights::init(std::size_t dim, Rng& rng) {
  AttentionWeights w;
  w.wq = normal_tensor({dim, dim}, kInitStd, rng);
  w.bq = zeros_param({dim});
  w.wk = normal_tensor({dim, dim}, kInitStd, rng);
  w.bk = zeros_param({dim});
  w.wv = normal_tensor({dim, dim}, kInitStd, rng);
  w.bv = zeros_param({dim});
  w.wo = normal_tensor({dim, dim}, kInitStd, rng);
  w.bo = zeros_param({dim});
  return w;
}

void AttentionWeights::append_to(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + "query.weight", wq});
  out.push_back({prefix + "query.bias", bq});
  out.push_back({prefix + "key.weight", wk});
  out.push_back({prefix + "key.bias", bk});
  out.push_back({prefix + "value.weight", wv});
  out.push_back({prefix + "value.bias", bv});
  out.push_back({prefix + "output.weight", wo});
  out.push_back({prefix + "output.bias", bo});
}

EncoderWeights EncoderWeights::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.hidden_dim;
  EncoderWeights w;
  w.config = config;
  w.token_embedding = normal_tensor({config.vocab_size, d}, kInitStd, rng);
  w.position_embedding = normal_tensor({config.max_positions, d}, kInitStd, rng);
  w.type_embedding = normal_tensor({config.type_vocab_size, d}, kInitStd, rng);
  w.embed_norm_gamma = ones_param({d});
  w.embed_norm_beta = zeros_param({d});
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerWeights layer;
    layer.attention = AttentionWeights::init(d, rng);
    layer.attn_norm_gamma = ones_param({d});
    layer.attn_norm_beta = zeros_param({d});
    layer.ffn_in = normal_tensor({d, config.ffn_dim}, kInitStd, rng);
    layer.ffn_in_bias = zeros_param({config.ffn_dim});
    layer.ffn_out = normal_tensor({config.ffn_dim, d}, kInitStd, rng);
    layer.ffn_out_bias = zeros_param({d});
    layer.ffn_norm_gamma = ones_param({d});
    layer.ffn_norm_beta = zeros_param({d});
    w.layers.push_back(std::move(layer));
  }
  return w;
}

std::vector<NamedTensor> EncoderWeights::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out{
      {prefix + "embeddings.token", token_embedding},
      {prefix + "embeddings.position", position_embedding},
      {prefix + "embeddings.type", type_embedding},
      {prefix + "embeddings.norm.gamma", embed_norm_gamma},
      {prefix + "embeddings.norm.beta", embed_norm_beta},
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto p = prefix + "layer" + std::to_string(l) + ".";
    const auto& layer = layers[l];
    layer.attention.append_to(out, p + "attention.");
    out.push_back({p + "attention.norm.gamma", layer.attn_norm_gamma});
    out.push_back({p + "attention.norm.beta", layer.attn_norm_beta});
    out.push_back({p + "ffn.in.weight", layer.ffn_in});
    out.push_back({p + "ffn.in.bias", layer.ffn_in_bias});
    out.push_back({p + "ffn.out.weight", layer.ffn_out});
    out.push_back({p + "ffn.out.bias", layer.ffn_out_bias});
    out.push_back({p + "ffn.norm.gamma", layer.ffn_norm_gamma});
    out.push_back({p + "ffn.norm.beta", layer.ffn_norm_beta});
  }
  return out;
}

Tensor embed_sum(const EncoderWeights& w, std::span<const int> input_ids,
                 std::span<const int> type_ids) {
  const std::size_t n = input_ids.size();
  if (n == 0) throw DimensionError("embed: empty sequence");
  if (type_ids.size() != n) {
    throw DimensionError("embed: " + std::to_string(type_ids.size()) + " type ids for " +
                         std::to_string(n) + " tokens");
  }
  if (n > w.config.max_positions) {
    throw IndexError("embed: sequence length " + std::to_string(n) + " exceeds position table of " +
                     std::to_string(w.config.max_positions) + " rows");
  }
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);
  const Tensor tok = embedding_gather(w.token_embedding, input_ids, "token");
  const Tensor pos = embedding_gather(w.position_embedding, positions, "position");
  const Tensor typ = embedding_gather(w.type_embedding, type_ids, "token-type");
  return add(add(tok, pos), typ);
}

Tensor embed(const EncoderWeights& w, std::span<const int> input_ids, std::span<const int> type_ids,
             const ForwardContext& ctx) {
  Tensor e = layer_norm(embed_sum(w, input_ids, type_ids), w.embed_norm_gamma, w.embed_norm_beta);
  return dropout(e, w.config.dropout_rate, ctx);
}

Tensor attend(const Tensor& queries, const Tensor& keys_values, std::span<const std::uint8_t> key_mask,
              const AttentionWeights& w, std::size_t num_heads, AttentionTrace* trace) {
  const std::size_t d = queries.cols();
  if (keys_values.cols() != d) {
    throw DimensionError("attention: query width " + std::to_string(d) + " differs from key width " +
                         std::to_string(keys_values.cols()));
  }
  if (num_heads == 0 || d % num_heads != 0) {
    throw ConfigError("attention: hidden_dim " + std::to_string(d) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (key_mask.size() != keys_values.rows()) {
    throw DimensionError("attention: key mask of length " + std::to_string(key_mask.size()) +
                         " for " + std::to_string(keys_values.rows()) + " keys");
  }
  const std::size_t head_dim = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Tensor q = add_row(matmul(queries, w.wq), w.bq);
  const Tensor k = add_row(matmul(keys_values, w.wk), w.bk);
  const Tensor v = add_row(matmul(keys_values, w.wv), w.bv);

  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    Tensor scores = scale(matmul_bt(slice_cols(q, lo, hi), slice_cols(k, lo, hi)), inv_sqrt);
    Tensor probs = softmax_rows(masked_fill_cols(scores, key_mask));
    if (trace) trace->probabilities.push_back(probs);
    heads.push_back(matmul(probs, slice_cols(v, lo, hi)));
  }
  const Tensor merged = num_heads == 1 ? heads.front() : concat_cols(heads);
  return add_row(matmul(merged, w.wo), w.bo);
}

Tensor multi_head_self_attention(const Tensor& x, std::span<const std::uint8_t> mask,
                                 const LayerWeights& layer, const EncoderConfig& config,
                                 const ForwardContext& ctx, AttentionTrace* trace) {
  const Tensor attended = attend(x, x, mask, layer.attention, config.num_heads, trace);
  return layer_norm(add(x, dropout(attended, config.dropout_rate, ctx)), layer.attn_norm_gamma,
                    layer.attn_norm_beta);
}

Tensor feed_forward(const Tensor& x, const LayerWeights& layer, const EncoderConfig& config,
                    const ForwardContext& ctx) {
  const Tensor inner = gelu(add_row(matmul(x, layer.ffn_in), layer.ffn_in_bias));
  const Tensor outer = add_row(matmul(inner, layer.ffn_out), layer.ffn_out_bias);
  return layer_norm(add(x, dropout(outer, config.dropout_rate, ctx)), layer.ffn_norm_gamma,
                    layer.ffn_norm_beta);
}

Tensor encode(std::span<const int> input_ids, std::span<const int> type_ids,
              std::span<const std::uint8_t> mask, const EncoderWeights& w, const ForwardContext& ctx) {
  if (mask.size() != input_ids.size()) {
    throw DimensionError("encode: mask of length " + std::to_string(mask.size()) + " for " +
                         std::to_string(input_ids.size()) + " tokens");
  }
  Tensor h = embed(w, input_ids, type_ids, ctx);
  for (const auto& layer : w.layers) {
    h = multi_head_self_attention(h, mask, layer, w.config, ctx);
    h = feed_forward(h, layer, w.config, ctx);
  }
  return h;
}

}  // namespace retro
