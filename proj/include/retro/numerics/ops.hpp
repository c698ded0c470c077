#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "retro/numerics/tensor.hpp"

namespace retro {

using Rng = std::mt19937_64;

// Carries the train/eval switch and the dropout generator through a forward
// pass. Evaluation contexts never touch the generator.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;

  static ForwardContext eval() { return {}; }
};

Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad = true);

// ---- linear algebra --------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)·(k,n)
Tensor matmul_bt(const Tensor& a, const Tensor& b);  // (m,k)·(n,k)^T
Tensor transpose(const Tensor& a);

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// (m,n) + (n): bias broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor add_n(std::span<const Tensor> terms);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- layout ----------------------------------------------------------------
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
// Row lookup with range checks; `table_name` appears in the error.
Tensor embedding_gather(const Tensor& table, std::span<const int> ids, std::string_view table_name);

// ---- normalisation / regularisation ----------------------------------------
// Zero-variance rows normalise to 0 (eps keeps the denominator positive).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// Inverted dropout; identity when !ctx.training or rate == 0.
Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx);

// ---- probabilities and losses ------------------------------------------------
// Entries with keep[j] == 0 become -inf in every row (column mask).
Tensor masked_fill_cols(const Tensor& x, std::span<const std::uint8_t> keep);
// Stable softmax over `axis` of a rank-1 or rank-2 tensor. -inf entries get
// probability 0.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor softmax_rows(const Tensor& x);
// -log softmax(logits)[target] for a single logit vector; -inf entries are
// excluded from the partition function.
Tensor cross_entropy_from_logits(const Tensor& logits, std::size_t target);
// Binary cross entropy on a single pre-sigmoid logit, y in {0,1}.
Tensor bce_with_logits(const Tensor& logit, double target);
Tensor squared_error(const Tensor& prediction, double target);

double log_sum_exp(std::span<const double> values);

}  // namespace retro
