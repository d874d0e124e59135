#include "tanger/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "tanger/rng.hpp"

namespace tanger {

namespace {

using detail::TensorNode;

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
}

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw std::invalid_argument(std::string(op) + ": mixed dtypes are not supported");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor, got shape " +
                                shape_to_string(a.shape()));
  }
}

// values() of the node captured in a backward closure.
const std::vector<double>& vals(const std::shared_ptr<TensorNode>& n) { return n->values; }

// c (M x N) += a (M x K) . b (K x N)
void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c (M x K) += a (M x N) . b^T, with b stored K x N
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      ci[p] += s;
    }
  }
}

// c (K x N) += a^T . b, with a stored M x K and b stored M x N
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  require_same_dtype(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a, b},
                        [n = a.size()](const double* g, const std::vector<double*>& pg) {
                          for (int p = 0; p < 2; ++p) {
                            if (!pg[p]) continue;
                            for (std::size_t i = 0; i < n; ++i) pg[p][i] += g[i];
                          }
                        });
}

Tensor add_row_vector(const Tensor& m, const Tensor& v) {
  require_defined(m, "add_row_vector");
  require_defined(v, "add_row_vector");
  require_rank2(m, "add_row_vector");
  require_same_dtype(m, v, "add_row_vector");
  if (v.rank() != 1 || v.shape()[0] != m.shape()[1]) {
    throw std::invalid_argument("add_row_vector: vector shape " + shape_to_string(v.shape()) +
                                " does not match matrix columns of " +
                                shape_to_string(m.shape()));
  }
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  std::vector<double> out(m.size());
  const auto mv = m.values();
  const auto vv = v.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = mv[r * cols + c] + vv[c];
  }
  return make_op_result(m.shape(), m.dtype(), std::move(out), {m, v},
                        [rows, cols](const double* g, const std::vector<double*>& pg) {
                          if (pg[0]) {
                            for (std::size_t i = 0; i < rows * cols; ++i) pg[0][i] += g[i];
                          }
                          if (pg[1]) {
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) pg[1][c] += g[r * cols + c];
                            }
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  require_same_dtype(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result(
      a.shape(), a.dtype(), std::move(out), {a, b},
      [an = a.node_ptr(), bn = b.node_ptr()](const double* g, const std::vector<double*>& pg) {
        const std::size_t n = an->size();
        if (pg[0]) {
          const auto& bv = vals(bn);
          for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i] * bv[i];
        }
        if (pg[1]) {
          const auto& av = vals(an);
          for (std::size_t i = 0; i < n; ++i) pg[1][i] += g[i] * av[i];
        }
      });
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [s, n = a.size()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i] * s;
                        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  require_same_dtype(a, b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  matmul_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_op_result(
      {m, n}, a.dtype(), std::move(out), {a, b},
      [an = a.node_ptr(), bn = b.node_ptr(), m, k, n](const double* g,
                                                      const std::vector<double*>& pg) {
        if (pg[0]) matmul_nt(g, vals(bn).data(), pg[0], m, n, k);
        if (pg[1]) matmul_tn(vals(an).data(), g, pg[1], m, k, n);
      });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  require_rank2(a, "transpose");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  }
  return make_op_result({cols, rows}, a.dtype(), std::move(out), {a},
                        [rows, cols](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t c = 0; c < cols; ++c) {
                            for (std::size_t r = 0; r < rows; ++r) {
                              pg[0][r * cols + c] += g[c * rows + r];
                            }
                          }
                        });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_defined(a, "softmax");
  if (a.rank() != 1 && a.rank() != 2) {
    throw std::invalid_argument("softmax: expected rank 1 or 2, got shape " +
                                shape_to_string(a.shape()));
  }
  if (axis >= a.rank()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_to_string(a.shape()));
  }
  // Treat the normalized axis as contiguous "lines".
  const bool rank1 = a.rank() == 1;
  const std::size_t rows = rank1 ? 1 : a.shape()[0];
  const std::size_t cols = rank1 ? a.shape()[0] : a.shape()[1];
  const bool along_cols = rank1 || axis == 1;
  const std::size_t lines = along_cols ? rows : cols;
  const std::size_t line_len = along_cols ? cols : rows;

  const auto av = a.values();
  auto at = [&](std::size_t line, std::size_t j) -> double {
    return along_cols ? av[line * cols + j] : av[j * cols + line];
  };
  std::vector<double> out(a.size());
  auto out_at = [&](std::size_t line, std::size_t j) -> double& {
    return along_cols ? out[line * cols + j] : out[j * cols + line];
  };
  for (std::size_t l = 0; l < lines; ++l) {
    double m = at(l, 0);
    for (std::size_t j = 1; j < line_len; ++j) m = std::max(m, at(l, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < line_len; ++j) {
      const double e = std::exp(at(l, j) - m);
      out_at(l, j) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < line_len; ++j) out_at(l, j) *= inv;
  }

  std::vector<double> y = out;  // keep normalized values for the backward pass
  return make_op_result(
      a.shape(), a.dtype(), std::move(out), {a},
      [y = std::move(y), lines, line_len, along_cols, cols](const double* g,
                                                            const std::vector<double*>& pg) {
        if (!pg[0]) return;
        auto idx = [&](std::size_t line, std::size_t j) {
          return along_cols ? line * cols + j : j * cols + line;
        };
        for (std::size_t l = 0; l < lines; ++l) {
          double dot = 0.0;
          for (std::size_t j = 0; j < line_len; ++j) {
            const std::size_t i = idx(l, j);
            dot += g[i] * y[i];
          }
          for (std::size_t j = 0; j < line_len; ++j) {
            const std::size_t i = idx(l, j);
            pg[0][i] += y[i] * (g[i] - dot);
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  require_rank2(x, "layer_norm");
  require_same_dtype(x, gamma, "layer_norm");
  require_same_dtype(x, beta, "layer_norm");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (gamma.rank() != 1 || gamma.shape()[0] != cols || beta.rank() != 1 ||
      beta.shape()[0] != cols) {
    throw std::invalid_argument("layer_norm: affine parameters must be vectors of length " +
                                std::to_string(cols));
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");

  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * is;
      xhat[r * cols + c] = h;
      out[r * cols + c] = gv[c] * h + bv[c];
    }
  }

  return make_op_result(
      x.shape(), x.dtype(), std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), gn = gamma.node_ptr(), rows,
       cols](const double* g, const std::vector<double*>& pg) {
        const auto& gv = vals(gn);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g + r * cols;
          const double* hrow = xhat.data() + r * cols;
          if (pg[0]) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dh = grow[c] * gv[c];
              mean_dh += dh;
              mean_dh_h += dh * hrow[c];
            }
            mean_dh /= static_cast<double>(cols);
            mean_dh_h /= static_cast<double>(cols);
            for (std::size_t c = 0; c < cols; ++c) {
              const double dh = grow[c] * gv[c];
              pg[0][r * cols + c] += (dh - mean_dh - hrow[c] * mean_dh_h) * inv_std[r];
            }
          }
          if (pg[1]) {
            for (std::size_t c = 0; c < cols; ++c) pg[1][c] += grow[c] * hrow[c];
          }
          if (pg[2]) {
            for (std::size_t c = 0; c < cols; ++c) pg[2][c] += grow[c];
          }
        }
      });
}

Tensor gelu(const Tensor& a) {
  require_defined(a, "gelu");
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * kInvSqrt2));
  }
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [an = a.node_ptr()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          const auto& av = vals(an);
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            const double x = av[i];
                            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                            pg[0][i] += g[i] * (cdf + x * pdf);
                          }
                        });
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [an = a.node_ptr()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          const auto& av = vals(an);
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            if (av[i] > 0.0) pg[0][i] += g[i];
                          }
                        });
}

Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  std::vector<double> y = out;
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [y = std::move(y)](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < y.size(); ++i) {
                            pg[0][i] += g[i] * y[i] * (1.0 - y[i]);
                          }
                        });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(av[i] > 0.0)) {
      throw std::runtime_error("log: non-positive input " + std::to_string(av[i]) +
                               " at index " + std::to_string(i));
    }
    out[i] = std::log(av[i]);
  }
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [an = a.node_ptr()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          const auto& av = vals(an);
                          for (std::size_t i = 0; i < av.size(); ++i) pg[0][i] += g[i] / av[i];
                        });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  std::vector<double> y = out;
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [y = std::move(y)](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < y.size(); ++i) pg[0][i] += g[i] * y[i];
                        });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  require_defined(a, "mean");
  require_rank2(a, "mean");
  if (axis > 1) {
    throw std::invalid_argument("mean: axis " + std::to_string(axis) +
                                " out of range for rank-2 tensor");
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  const auto av = a.values();
  if (axis == 0) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += av[r * cols + c];
    }
    for (double& v : out) v /= static_cast<double>(rows);
    return make_op_result({cols}, a.dtype(), std::move(out), {a},
                          [rows, cols](const double* g, const std::vector<double*>& pg) {
                            if (!pg[0]) return;
                            const double inv = 1.0 / static_cast<double>(rows);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                pg[0][r * cols + c] += g[c] * inv;
                              }
                            }
                          });
  }
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += av[r * cols + c];
    out[r] /= static_cast<double>(cols);
  }
  return make_op_result({rows}, a.dtype(), std::move(out), {a},
                        [rows, cols](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          const double inv = 1.0 / static_cast<double>(cols);
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < cols; ++c) {
                              pg[0][r * cols + c] += g[r] * inv;
                            }
                          }
                        });
}

Tensor mean_all(const Tensor& a) {
  require_defined(a, "mean_all");
  if (a.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  s /= static_cast<double>(a.size());
  return make_op_result({1}, a.dtype(), {s}, {a},
                        [n = a.size()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          const double inv = g[0] / static_cast<double>(n);
                          for (std::size_t i = 0; i < n; ++i) pg[0][i] += inv;
                        });
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op_result({1}, a.dtype(), {s}, {a},
                        [n = a.size()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[0];
                        });
}

Tensor max_along(const Tensor& a, std::size_t axis) {
  require_defined(a, "max_along");
  require_rank2(a, "max_along");
  if (axis > 1) {
    throw std::invalid_argument("max_along: axis " + std::to_string(axis) +
                                " out of range for rank-2 tensor");
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  const auto av = a.values();
  const std::size_t out_len = axis == 0 ? cols : rows;
  std::vector<double> out(out_len);
  std::vector<std::size_t> arg(out_len);
  if (axis == 0) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = 0;
      double bv = av[c];
      for (std::size_t r = 1; r < rows; ++r) {
        const double v = av[r * cols + c];
        if (v > bv) {
          bv = v;
          best = r;
        }
      }
      out[c] = bv;
      arg[c] = best * cols + c;
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t best = 0;
      double bv = av[r * cols];
      for (std::size_t c = 1; c < cols; ++c) {
        const double v = av[r * cols + c];
        if (v > bv) {
          bv = v;
          best = c;
        }
      }
      out[r] = bv;
      arg[r] = r * cols + best;
    }
  }
  return make_op_result({out_len}, a.dtype(), std::move(out), {a},
                        [arg = std::move(arg)](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < arg.size(); ++i) pg[0][arg[i]] += g[i];
                        });
}

Tensor max_pool1d(const Tensor& a, std::size_t window, std::size_t stride) {
  require_defined(a, "max_pool1d");
  require_rank2(a, "max_pool1d");
  if (window == 0 || stride == 0) {
    throw std::invalid_argument("max_pool1d: window and stride must be positive");
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  const std::size_t out_rows = (rows + stride - 1) / stride;
  const auto av = a.values();
  std::vector<double> out(out_rows * cols);
  std::vector<std::size_t> arg(out_rows * cols);
  for (std::size_t o = 0; o < out_rows; ++o) {
    const std::size_t lo = o * stride;
    const std::size_t hi = std::min(lo + window, rows);
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = lo;
      double bv = av[lo * cols + c];
      for (std::size_t r = lo + 1; r < hi; ++r) {
        const double v = av[r * cols + c];
        if (v > bv) {
          bv = v;
          best = r;
        }
      }
      out[o * cols + c] = bv;
      arg[o * cols + c] = best * cols + c;
    }
  }
  return make_op_result({out_rows, cols}, a.dtype(), std::move(out), {a},
                        [arg = std::move(arg)](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < arg.size(); ++i) pg[0][arg[i]] += g[i];
                        });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no tensors given");
  for (const Tensor& p : parts) {
    require_defined(p, "concat");
    require_rank2(p, "concat");
    require_same_dtype(parts[0], p, "concat");
  }
  if (axis > 1) throw std::invalid_argument("concat: axis out of range for rank-2 tensors");

  const std::size_t fixed = axis == 0 ? parts[0].shape()[1] : parts[0].shape()[0];
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const std::size_t f = axis == 0 ? p.shape()[1] : p.shape()[0];
    if (f != fixed) {
      throw std::invalid_argument("concat: mismatched shape " + shape_to_string(p.shape()) +
                                  " along axis " + std::to_string(axis));
    }
    total += p.shape()[axis];
  }

  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets(parts.size());
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    offsets[p] = off;
    const auto pv = parts[p].values();
    const std::size_t prows = parts[p].shape()[0], pcols = parts[p].shape()[1];
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + off * cols);
    } else {
      for (std::size_t r = 0; r < prows; ++r) {
        std::copy(pv.begin() + r * pcols, pv.begin() + (r + 1) * pcols,
                  out.begin() + r * cols + off);
      }
    }
    off += parts[p].shape()[axis];
  }

  std::vector<std::size_t> extents(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) extents[p] = parts[p].shape()[axis];
  return make_op_result(
      {rows, cols}, parts[0].dtype(), std::move(out), parts,
      [offsets = std::move(offsets), extents = std::move(extents), axis, rows,
       cols](const double* g, const std::vector<double*>& pg) {
        for (std::size_t p = 0; p < offsets.size(); ++p) {
          if (!pg[p]) continue;
          if (axis == 0) {
            const std::size_t n = extents[p] * cols;
            const double* src = g + offsets[p] * cols;
            for (std::size_t i = 0; i < n; ++i) pg[p][i] += src[i];
          } else {
            for (std::size_t r = 0; r < rows; ++r) {
              const double* src = g + r * cols + offsets[p];
              double* dst = pg[p] + r * extents[p];
              for (std::size_t c = 0; c < extents[p]; ++c) dst[c] += src[c];
            }
          }
        }
      });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  require_defined(a, "slice");
  if (a.rank() == 1) {
    if (axis != 0) throw std::invalid_argument("slice: axis out of range for rank-1 tensor");
    if (start + len > a.shape()[0] || len == 0) {
      throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                  std::to_string(start + len) + ") invalid for shape " +
                                  shape_to_string(a.shape()));
    }
    const auto av = a.values();
    std::vector<double> out(av.begin() + start, av.begin() + start + len);
    return make_op_result({len}, a.dtype(), std::move(out), {a},
                          [start, len](const double* g, const std::vector<double*>& pg) {
                            if (!pg[0]) return;
                            for (std::size_t i = 0; i < len; ++i) pg[0][start + i] += g[i];
                          });
  }
  require_rank2(a, "slice");
  if (axis > 1) throw std::invalid_argument("slice: axis out of range for rank-2 tensor");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (start + len > a.shape()[axis] || len == 0) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") invalid for shape " +
                                shape_to_string(a.shape()) + " axis " + std::to_string(axis));
  }
  const auto av = a.values();
  if (axis == 0) {
    std::vector<double> out(av.begin() + start * cols, av.begin() + (start + len) * cols);
    return make_op_result({len, cols}, a.dtype(), std::move(out), {a},
                          [start, len, cols](const double* g, const std::vector<double*>& pg) {
                            if (!pg[0]) return;
                            for (std::size_t i = 0; i < len * cols; ++i) {
                              pg[0][start * cols + i] += g[i];
                            }
                          });
  }
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av.begin() + r * cols + start, av.begin() + r * cols + start + len,
              out.begin() + r * len);
  }
  return make_op_result({rows, len}, a.dtype(), std::move(out), {a},
                        [start, len, rows, cols](const double* g,
                                                 const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < len; ++c) {
                              pg[0][r * cols + start + c] += g[r * len + c];
                            }
                          }
                        });
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
  require_defined(a, "reshape");
  if (shape_size(new_shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot reshape " + shape_to_string(a.shape()) +
                                " into " + shape_to_string(new_shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op_result(std::move(new_shape), a.dtype(), std::move(out), {a},
                        [n = a.size()](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i];
                        });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
  require_defined(table, "embedding_lookup");
  require_rank2(table, "embedding_lookup");
  const std::size_t rows = table.shape()[0], cols = table.shape()[1];
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty index list");
  for (std::size_t id : ids) {
    if (id >= rows) {
      throw std::out_of_range("embedding_lookup: index " + std::to_string(id) +
                              " out of range for table with " + std::to_string(rows) + " rows");
    }
  }
  const auto tv = table.values();
  std::vector<double> out(ids.size() * cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(tv.begin() + ids[i] * cols, tv.begin() + (ids[i] + 1) * cols,
              out.begin() + i * cols);
  }
  return make_op_result({ids.size(), cols}, table.dtype(), std::move(out), {table},
                        [ids, cols](const double* g, const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < ids.size(); ++i) {
                            double* dst = pg[0] + ids[i] * cols;
                            const double* src = g + i * cols;
                            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                          }
                        });
}

Tensor dropout(const Tensor& a, double rate, std::uint64_t key, bool training) {
  require_defined(a, "dropout");
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;  // identity outside of training

  const CounterRng rng(key);
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto av = a.values();
  std::vector<double> out(a.size());
  std::vector<double> mask(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double keep = rng.uniform(i) >= rate ? keep_scale : 0.0;
    mask[i] = keep;
    out[i] = av[i] * keep;
  }
  return make_op_result(a.shape(), a.dtype(), std::move(out), {a},
                        [mask = std::move(mask)](const double* g,
                                                 const std::vector<double*>& pg) {
                          if (!pg[0]) return;
                          for (std::size_t i = 0; i < mask.size(); ++i) {
                            pg[0][i] += g[i] * mask[i];
                          }
                        });
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_defined(logits, "cross_entropy");
  require_defined(targets, "cross_entropy");
  require_rank2(logits, "cross_entropy");
  require_same_shape(logits, targets, "cross_entropy");
  if (targets.traced()) {
    throw std::invalid_argument("cross_entropy: traced targets are not supported");
  }
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  const auto lv = logits.values();
  const auto tv = targets.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += tv[r * cols + c];
    if (std::abs(s - 1.0) > 1e-6) {
      throw std::invalid_argument("cross_entropy: target row " + std::to_string(r) +
                                  " sums to " + std::to_string(s) + ", expected 1");
    }
  }

  // Row loss: logsumexp(x) - sum_c t_c * x_c, averaged over rows.
  std::vector<double> probs(rows * cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = lv.data() + r * cols;
    double m = row[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(row[c] - m);
      probs[r * cols + c] = e;
      sum += e;
    }
    const double lse = m + std::log(sum);
    const double inv = 1.0 / sum;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] *= inv;
      dot += tv[r * cols + c] * row[c];
    }
    loss += lse - dot;
  }
  loss /= static_cast<double>(rows);

  return make_op_result(
      {1}, logits.dtype(), {loss}, {logits, targets},
      [probs = std::move(probs), tn = targets.node_ptr(), rows, cols](
          const double* g, const std::vector<double*>& pg) {
        if (!pg[0]) return;
        const auto& tv = vals(tn);
        const double s = g[0] / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows * cols; ++i) pg[0][i] += s * (probs[i] - tv[i]);
      });
}

}  // namespace tanger
