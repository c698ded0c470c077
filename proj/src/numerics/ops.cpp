#include "retro/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "retro/errors.hpp"

namespace retro {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using detail::Node;

std::vector<double>* grad_of(Node& out, std::size_t parent) {
  Node* p = out.parents[parent].get();
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

const std::vector<double>& value_of(Node& out, std::size_t parent) {
  return out.parents[parent]->value;
}

[[noreturn]] void dim_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

void require_matrix(std::string_view op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_string(a.shape()));
  }
}

// c(m,n) += a(m,k) * b(k,n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c(m,n) += a(m,k) * b(n,k)^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

// c(k,n) += a(m,k)^T * b(m,n)
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace

Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) dim_error("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      gemm_nt(self.grad.data(), value_of(self, 1).data(), ga->data(), m, n, k);
    }
    if (auto* gb = grad_of(self, 1)) {
      gemm_tn(value_of(self, 0).data(), self.grad.data(), gb->data(), m, k, n);
    }
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_bt", a);
  require_matrix("matmul_bt", b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) dim_error("matmul_bt", a, b);
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    // dA = dC·B, dB = dC^T·A
    if (auto* ga = grad_of(self, 0)) {
      gemm_nn(self.grad.data(), value_of(self, 1).data(), ga->data(), m, n, k);
    }
    if (auto* gb = grad_of(self, 1)) {
      gemm_tn(self.grad.data(), value_of(self, 0).data(), gb->data(), m, n, k);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto src = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * self.grad[i];
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  if (bias.rank() != 1 || bias.size() != a.cols()) dim_error("add_row", a, bias);
  const std::size_t n = a.cols(), m = a.rows();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return Tensor::make_result(a.shape(), std::move(out), {a, bias}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
  });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw DimensionError("add_n: no terms");
  std::vector<double> out(terms[0].size(), 0.0);
  for (const auto& t : terms) {
    if (t.shape() != terms[0].shape()) dim_error("add_n", terms[0], t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t[i];
  }
  std::vector<Tensor> parents(terms.begin(), terms.end());
  return Tensor::make_result(terms[0].shape(), std::move(out), std::move(parents),
                             [](Node& self) {
                               for (std::size_t p = 0; p < self.parents.size(); ++p) {
                                 if (auto* g = grad_of(self, p))
                                   for (std::size_t i = 0; i < g->size(); ++i)
                                     (*g)[i] += self.grad[i];
                               }
                             });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& xv = value_of(self, 0);
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double v = xv[i];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        (*g)[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double y = self.value[i];
        (*g)[i] += self.grad[i] * y * (1.0 - y);
      }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1}, {total}, {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (auto& gi : *g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != m) dim_error("concat_cols", parts[0], p);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(src.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result({m, total}, std::move(out), std::move(parents),
                             [m, total, widths](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 if (auto* g = grad_of(self, k)) {
                                   for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t j = 0; j < widths[k]; ++j)
                                       (*g)[i * widths[k] + j] += self.grad[i * total + off + j];
                                 }
                                 off += widths[k];
                               }
                             });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.cols() != n) dim_error("concat_rows", parts[0], p);
    m += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result({m, n}, std::move(out), std::move(parents), [](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t len = self.parents[k]->value.size();
      if (auto* g = grad_of(self, k))
        for (std::size_t i = 0; i < len; ++i) (*g)[i] += self.grad[off + i];
      off += len;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " + shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + begin * n, x.data().begin() + end * n);
  return Tensor::make_result({end - begin, n}, std::move(out), {x}, [begin, n](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto src = x.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(src.data() + i * n + begin, w, out.data() + i * w);
  return Tensor::make_result({m, w}, std::move(out), {x}, [m, n, w, begin](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) (*g)[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t m = x.rows(), n = x.cols();
  if (rows.empty()) throw DimensionError("gather_rows: empty row selection");
  std::vector<double> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range for shape " +
                       shape_string(x.shape()));
    }
    std::copy_n(x.data().data() + rows[i] * n, n, out.data() + i * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Tensor::make_result({rows.size(), n}, std::move(out), {x},
                             [idx = std::move(idx), n](Node& self) {
                               if (auto* g = grad_of(self, 0))
                                 for (std::size_t i = 0; i < idx.size(); ++i)
                                   for (std::size_t j = 0; j < n; ++j)
                                     (*g)[idx[i] * n + j] += self.grad[i * n + j];
                             });
}

Tensor embedding_gather(const Tensor& table, std::span<const int> ids, std::string_view name) {
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " out of range for " +
                       std::string(name) + " table of " + std::to_string(table.rows()) + " rows");
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  return gather_rows(table, rows);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.cols(), m = x.rows();
  if (gamma.size() != n || beta.size() != n) dim_error("layer_norm", x, gamma);
  std::vector<double> out(x.size()), xhat(x.size()), inv_std(m);
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = value_of(self, 1);
        if (auto* gx = grad_of(self, 0)) {
          std::vector<double> dxhat(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = self.grad[i * n + j] * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * n + j];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
              (*gx)[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
          }
        }
        if (auto* gg = grad_of(self, 1))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*gg)[j] += self.grad[i * n + j] * xhat[i * n + j];
        if (auto* gb = grad_of(self, 2))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*gb)[j] += self.grad[i * n + j];
      });
}

Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must lie in [0,1)");
  if (!ctx.training || rate == 0.0) return x;
  if (ctx.rng == nullptr) throw ConfigError("dropout: training context without a generator");
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size()), out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = keep(*ctx.rng) ? factor : 0.0;
    out[i] = x[i] * mask[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * mask[i];
  });
}

Tensor masked_fill_cols(const Tensor& x, std::span<const std::uint8_t> keep) {
  const std::size_t m = x.rows(), n = x.cols();
  if (keep.size() != n) {
    throw DimensionError("masked_fill_cols: mask of length " + std::to_string(keep.size()) +
                         " for shape " + shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!keep[j]) out[i * n + j] = kNegInf;
  std::vector<std::uint8_t> k(keep.begin(), keep.end());
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m, n, k = std::move(k)](Node& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (k[j]) (*g)[i * n + j] += self.grad[i * n + j];
  });
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.size(), 0.0);
  const auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    if (mx == kNegInf) continue;  // fully masked row stays zero
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          (*g)[i * n + j] += self.value[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (x.rank() == 1) {
    if (axis != 0) throw DimensionError("softmax: axis out of range for rank-1 tensor");
    return softmax_rows(x);
  }
  require_matrix("softmax", x);
  if (axis == 1) return softmax_rows(x);
  if (axis == 0) return transpose(softmax_rows(transpose(x)));
  throw DimensionError("softmax: axis out of range for shape " + shape_string(x.shape()));
}

double log_sum_exp(std::span<const double> values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double total = 0.0;
  for (double v : values) total += std::exp(v - mx);
  return mx + std::log(total);
}

Tensor cross_entropy_from_logits(const Tensor& logits, std::size_t target) {
  const auto lv = logits.data();
  if (logits.rows() != 1) {
    throw DimensionError("cross_entropy: expected one logit vector, got shape " +
                         shape_string(logits.shape()));
  }
  if (target >= lv.size()) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                     std::to_string(lv.size()) + " classes");
  }
  if (std::isinf(lv[target]) && lv[target] < 0.0) {
    throw LabelError("cross_entropy: target " + std::to_string(target) + " is masked");
  }
  const double lse = log_sum_exp(lv);
  return Tensor::make_result({1}, {lse - lv[target]}, {logits}, [target, lse](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& v = value_of(self, 0);
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double p = std::exp(v[j] - lse);
        (*g)[j] += self.grad[0] * (p - (j == target ? 1.0 : 0.0));
      }
    }
  });
}

Tensor bce_with_logits(const Tensor& logit, double target) {
  if (logit.size() != 1) throw DimensionError("bce_with_logits: expected a single logit");
  const double z = logit[0];
  const double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  return Tensor::make_result({1}, {loss}, {logit}, [target](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const double z = value_of(self, 0)[0];
      const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      (*g)[0] += self.grad[0] * (p - target);
    }
  });
}

Tensor squared_error(const Tensor& prediction, double target) {
  if (prediction.size() != 1) throw DimensionError("squared_error: expected a single output");
  const double diff = prediction[0] - target;
  return Tensor::make_result({1}, {diff * diff}, {prediction}, [diff](Node& self) {
    if (auto* g = grad_of(self, 0)) (*g)[0] += self.grad[0] * 2.0 * diff;
  });
}

}  // namespace retro
