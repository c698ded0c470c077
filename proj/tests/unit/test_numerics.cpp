#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "../support.hpp"
#include "retro/errors.hpp"
#include "retro/numerics/checkpoint.hpp"
#include "retro/numerics/grad_check.hpp"
#include "retro/numerics/ops.hpp"

using namespace retro;
using testing::random_tensor;

namespace {

double check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
  return grad_check(f, params).max_rel_error;
}

// Reduce a tensor to a scalar with fixed random weights so every output
// coordinate contributes a distinct gradient.
Tensor probe(const Tensor& x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Tensor w = random_tensor(x.shape(), rng, 1.0, false);
  return sum(mul(x, w));
}

}  // namespace

TEST_CASE("tensor construction") {
  const auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({0, 2}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({}, {1}), DimensionError);
}

TEST_CASE("matmul with identity") {
  std::mt19937_64 rng(1);
  const auto a = random_tensor({3, 4}, rng);
  const auto i3 = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto r = matmul(i3, a);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(r[k] == a[k]);
}

TEST_CASE("shape mismatch names the op") {
  const auto a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("no throw");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, Tensor::zeros({3, 2})), DimensionError);
}

TEST_CASE("layer norm of a constant row is zero") {
  const auto x = Tensor::full({2, 5}, 3.25);
  const auto y = layer_norm(x, Tensor::full({5}, 1.0), Tensor::zeros({5}));
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("softmax values") {
  const auto u = softmax(Tensor::from({3}, {0, 0, 0}), 0);
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  // long double oracle
  const auto p = softmax(Tensor::from({3}, {1, 2, 3}), 0);
  long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::fabs(p[i] - static_cast<double>(std::exp(static_cast<long double>(i + 1)) / z)) < 1e-15);
  }
  CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.24472847105479767).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-14));
}

TEST_CASE("softmax properties on random rows") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_tensor({4, 7}, rng, 20.0, false);
    const auto y = softmax_rows(x);
    const auto shifted = softmax_rows(add(x, Tensor::full({4, 7}, 13.5)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        const double v = y.at(r, c);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        CHECK(std::fabs(v - shifted.at(r, c)) < 1e-12);
        s += v;
      }
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
    const auto cols = softmax(x, 0);
    for (std::size_t c = 0; c < 7; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < 4; ++r) s += cols.at(r, c);
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("masked softmax gives masked entries zero weight") {
  const auto x = Tensor::from({1, 4}, {1, 2, 3, 4});
  const std::vector<std::uint8_t> keep{1, 0, 1, 0};
  const auto y = softmax_rows(masked_fill_cols(x, keep));
  CHECK(y[1] == 0.0);
  CHECK(y[3] == 0.0);
  CHECK(y[0] + y[2] == doctest::Approx(1.0));
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy_from_logits(Tensor::from({2}, {0, 0}), 0).item() == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy_from_logits(Tensor::from({2}, {60, -60}), 0).item() < 1e-40);
  CHECK_THROWS_AS(cross_entropy_from_logits(Tensor::from({2}, {0, 0}), 2), IndexError);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = random_tensor({5}, rng, 6.0);
    const std::size_t target = trial % 5;
    const auto loss = cross_entropy_from_logits(logits, target);
    long double m = -1e300L, z = 0;
    for (double v : logits.data()) m = std::max<long double>(m, v);
    for (double v : logits.data()) z += std::exp(static_cast<long double>(v) - m);
    const long double oracle = -(logits[target] - m - std::log(z));
    CHECK(std::fabs(loss.item() - static_cast<double>(oracle)) < 1e-13);

    // gradient = softmax - one_hot
    loss.backward();
    const auto p = softmax(logits.detach(), 0);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(std::fabs(logits.grad()[i] - (p[i] - (i == target ? 1.0 : 0.0))) < 1e-13);
    }
  }
}

TEST_CASE("bce and squared error") {
  CHECK(bce_with_logits(Tensor::from({1}, {0.0}), 1).item() == doctest::Approx(std::log(2.0)));
  CHECK(squared_error(Tensor::from({1}, {0.25}), 1).item() == doctest::Approx(0.5625));
  // large logits stay finite
  CHECK(std::isfinite(bce_with_logits(Tensor::from({1}, {-800.0}), 1).item()));
}

TEST_CASE("backward accumulates into grad buffers") {
  auto w = Tensor::from({2}, {1.0, 2.0}, true);
  sum(w).backward();
  sum(w).backward();
  CHECK(w.grad()[0] == 2.0);
  w.zero_grad();
  CHECK(w.grad()[1] == 0.0);
}

TEST_CASE("primitive gradients match central differences") {
  std::mt19937_64 rng(2024);
  const double tol = 1e-4;
  auto a = random_tensor({4, 3}, rng), b = random_tensor({3, 2}, rng), c = random_tensor({4, 3}, rng);
  auto bias = random_tensor({3}, rng);

  SUBCASE("matmul") { CHECK(check([&] { return probe(matmul(a, b)); }, {a, b}) <= tol); }
  SUBCASE("matmul_bt") { CHECK(check([&] { return probe(matmul_bt(a, c)); }, {a, c}) <= tol); }
  SUBCASE("transpose") { CHECK(check([&] { return probe(transpose(a)); }, {a}) <= tol); }
  SUBCASE("add / sub / mul") {
    CHECK(check([&] { return probe(add(a, c)); }, {a, c}) <= tol);
    CHECK(check([&] { return probe(sub(a, c)); }, {a, c}) <= tol);
    CHECK(check([&] { return probe(mul(a, c)); }, {a, c}) <= tol);
  }
  SUBCASE("scale / add_row / add_n") {
    CHECK(check([&] { return probe(scale(a, -1.7)); }, {a}) <= tol);
    CHECK(check([&] { return probe(add_row(a, bias)); }, {a, bias}) <= tol);
    CHECK(check([&] { return probe(add_n(std::vector<Tensor>{a, c, a})); }, {a, c}) <= tol);
  }
  SUBCASE("gelu / sigmoid") {
    CHECK(check([&] { return probe(gelu(a)); }, {a}) <= tol);
    CHECK(check([&] { return probe(sigmoid(a)); }, {a}) <= tol);
  }
  SUBCASE("sum / mean / reshape") {
    CHECK(check([&] { return scale(mean(mul(a, a)), 3.0); }, {a}) <= tol);
    CHECK(check([&] { return probe(reshape(a, {2, 6})); }, {a}) <= tol);
  }
  SUBCASE("concat and slice") {
    CHECK(check([&] { return probe(concat_cols(std::vector<Tensor>{a, c})); }, {a, c}) <= tol);
    CHECK(check([&] { return probe(concat_rows(std::vector<Tensor>{a, c})); }, {a, c}) <= tol);
    CHECK(check([&] { return probe(slice_rows(a, 1, 3)); }, {a}) <= tol);
    CHECK(check([&] { return probe(slice_cols(a, 1, 3)); }, {a}) <= tol);
    const std::vector<std::size_t> rows{3, 0, 3};
    CHECK(check([&] { return probe(gather_rows(a, rows)); }, {a}) <= tol);
  }
  SUBCASE("embedding_gather") {
    auto table = random_tensor({6, 3}, rng);
    const std::vector<int> ids{5, 0, 5, 2};
    CHECK(check([&] { return probe(embedding_gather(table, ids, "token")); }, {table}) <= tol);
    const std::vector<int> bad{6};
    CHECK_THROWS_AS(embedding_gather(table, bad, "token"), IndexError);
  }
  SUBCASE("layer_norm") {
    auto g = random_tensor({3}, rng), be = random_tensor({3}, rng);
    CHECK(check([&] { return probe(layer_norm(a, g, be)); }, {a, g, be}) <= tol);
  }
  SUBCASE("dropout with a fixed mask") {
    CHECK(check(
              [&] {
                Rng r(7);
                return probe(dropout(a, 0.3, ForwardContext{true, &r}));
              },
              {a}) <= tol);
  }
  SUBCASE("masked softmax rows / columns") {
    const std::vector<std::uint8_t> keep{1, 0, 1};
    CHECK(check([&] { return probe(softmax_rows(masked_fill_cols(a, keep))); }, {a}) <= tol);
    CHECK(check([&] { return probe(softmax(a, 0)); }, {a}) <= tol);
  }
  SUBCASE("losses") {
    auto v = random_tensor({5}, rng, 3.0);
    auto s = random_tensor({1}, rng, 3.0);
    CHECK(check([&] { return cross_entropy_from_logits(v, 3); }, {v}) <= tol);
    CHECK(check([&] { return bce_with_logits(s, 1); }, {s}) <= tol);
    CHECK(check([&] { return bce_with_logits(s, 0); }, {s}) <= tol);
    CHECK(check([&] { return squared_error(s, 1); }, {s}) <= tol);
  }
}

TEST_CASE("dropout is inverted, seeded and train-only") {
  const auto x = Tensor::full({200, 10}, 1.0);
  CHECK(dropout(x, 0.5, ForwardContext::eval()).data()[0] == 1.0);
  Rng r1(3), r2(3);
  const auto y1 = dropout(x, 0.5, ForwardContext{true, &r1});
  const auto y2 = dropout(x, 0.5, ForwardContext{true, &r2});
  double total = 0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    CHECK(y1[i] == y2[i]);
    CHECK((y1[i] == 0.0 || y1[i] == 2.0));
    total += y1[i];
  }
  CHECK(total / 2000.0 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("grad_check on least squares matches the closed form") {
  std::mt19937_64 rng(8);
  const auto X = random_tensor({6, 3}, rng, 1.0, false);
  const auto y = random_tensor({6, 1}, rng, 1.0, false);
  auto w = random_tensor({3, 1}, rng);
  auto f = [&] {
    const auto r = sub(matmul(X, w), y);
    return sum(mul(r, r));
  };
  std::vector<Tensor> params{w};
  CHECK(grad_check(f, params).max_rel_error <= 1e-7);

  w.zero_grad();
  f().backward();
  // 2 X^T (Xw - y)
  for (std::size_t j = 0; j < 3; ++j) {
    double g = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      double r = -y[i];
      for (std::size_t k = 0; k < 3; ++k) r += X.at(i, k) * w[k];
      g += 2 * X.at(i, j) * r;
    }
    CHECK(std::fabs(w.grad()[j] - g) < 1e-12);
  }
}

TEST_CASE("grad_check edge cases") {
  auto used = Tensor::from({2}, {1.0, 2.0}, true);
  auto unused = Tensor::from({2}, {3.0, 4.0}, true);
  std::vector<Tensor> params{used, unused};
  const auto r = grad_check([&] { return sum(mul(used, used)); }, params);
  CHECK(r.max_rel_error < 1e-7);
  for (double g : unused.grad()) CHECK(g == 0.0);

  auto p = Tensor::from({1}, {0.0}, true);
  std::vector<Tensor> ps{p};
  CHECK_THROWS_AS(grad_check([&] { return scale(sum(p), std::numeric_limits<double>::infinity()); }, ps),
                  RuntimeFailure);
}

TEST_CASE("forward values are bit-identical across runs") {
  auto run = [] {
    std::mt19937_64 rng(77);
    const auto a = random_tensor({5, 4}, rng), b = random_tensor({4, 4}, rng);
    const auto g = Tensor::full({4}, 1.0), be = Tensor::zeros({4});
    return layer_norm(gelu(matmul(a, b)), g, be);
  };
  const auto x = run(), y = run();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == y[i]);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::scratch_dir("ckpt");
  std::mt19937_64 rng(4);
  Checkpoint c{R"({"kind":"test"})", {{"a", random_tensor({2, 3}, rng)}, {"b", random_tensor({4}, rng)}}};
  save_checkpoint(dir / "x.ckpt", c);
  const auto back = load_checkpoint(dir / "x.ckpt");
  CHECK(back.metadata == c.metadata);
  REQUIRE(back.tensors.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(back.tensors[t].name == c.tensors[t].name);
    CHECK(back.tensors[t].tensor.shape() == c.tensors[t].tensor.shape());
    for (std::size_t i = 0; i < c.tensors[t].tensor.size(); ++i) {
      CHECK(back.tensors[t].tensor[i] == c.tensors[t].tensor[i]);
    }
  }

  std::vector<NamedTensor> targets{{"a", Tensor::zeros({2, 3})}, {"b", Tensor::zeros({4})}};
  assign_parameters(back, targets);
  CHECK(targets[0].tensor[5] == c.tensors[0].tensor[5]);
  std::vector<NamedTensor> wrong{{"a", Tensor::zeros({3, 2})}};
  CHECK_THROWS_AS(assign_parameters(back, wrong), ConfigError);

  std::ofstream(dir / "bad.ckpt") << "NOTACKPT";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), ConfigError);
}
