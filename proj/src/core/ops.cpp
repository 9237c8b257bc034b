#include "crat/core/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "crat/core/errors.hpp"

namespace crat::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Array2& a) { return {a.data.data(), Eigen::Index(a.rows), Eigen::Index(a.cols)}; }
MutMap view(Array2& a) { return {a.data.data(), Eigen::Index(a.rows), Eigen::Index(a.cols)}; }

[[noreturn]] void shape_fail(std::string_view op, const Array2& a, const Array2& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

Graph& same_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw ShapeError("operands recorded on different graphs");
  return a.graph();
}

template <class F>
Array2 map_values(const Array2& a, F f) {
  Array2 out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

double stable_softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Array2& av = a.value();
  const Array2& bv = b.value();
  if (av.cols != bv.rows) shape_fail("matmul", av, bv);
  Array2 out(av.rows, bv.cols);
  view(out).noalias() = view(av) * view(bv);
  return g.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Graph& g, const Array2& go) {
    if (a.requires_grad()) view(g.grad_buffer(a)).noalias() += view(go) * view(b.value()).transpose();
    if (b.requires_grad()) view(g.grad_buffer(b)).noalias() += view(a.value()).transpose() * view(go);
  });
}

Var matmul_bt(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Array2& av = a.value();
  const Array2& bv = b.value();
  if (av.cols != bv.cols) shape_fail("matmul_bt", av, bv);
  Array2 out(av.rows, bv.rows);
  view(out).noalias() = view(av) * view(bv).transpose();
  return g.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Graph& g, const Array2& go) {
    if (a.requires_grad()) view(g.grad_buffer(a)).noalias() += view(go) * view(b.value());
    if (b.requires_grad()) view(g.grad_buffer(b)).noalias() += view(go).transpose() * view(a.value());
  });
}

Var add(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("add", a.value(), b.value());
  Array2 out = a.value();
  view(out) += view(b.value());
  return g.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Graph& g, const Array2& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var sub(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("sub", a.value(), b.value());
  Array2 out = a.value();
  view(out) -= view(b.value());
  return g.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Graph& g, const Array2& go) {
    g.accumulate(a, go);
    if (b.requires_grad()) view(g.grad_buffer(b)) -= view(go);
  });
}

Var mul(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("mul", a.value(), b.value());
  Array2 out(a.rows(), a.cols());
  view(out) = view(a.value()).cwiseProduct(view(b.value()));
  return g.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Graph& g, const Array2& go) {
    if (a.requires_grad()) view(g.grad_buffer(a)) += view(go).cwiseProduct(view(b.value()));
    if (b.requires_grad()) view(g.grad_buffer(b)) += view(go).cwiseProduct(view(a.value()));
  });
}

Var add_row(const Var& a, const Var& row) {
  Graph& g = same_graph(a, row);
  const Array2& av = a.value();
  const Array2& rv = row.value();
  if (rv.rows != 1 || rv.cols != av.cols) shape_fail("add_row", av, rv);
  Array2 out = av;
  view(out).rowwise() += view(rv).row(0);
  return g.record(std::move(out), a.requires_grad() || row.requires_grad(), [a, row](Graph& g, const Array2& go) {
    g.accumulate(a, go);
    if (row.requires_grad()) view(g.grad_buffer(row)).row(0) += view(go).colwise().sum();
  });
}

Var scale(const Var& a, double s) {
  Array2 out = a.value();
  view(out) *= s;
  return a.graph().record(std::move(out), a.requires_grad(), [a, s](Graph& g, const Array2& go) {
    view(g.grad_buffer(a)) += s * view(go);
  });
}

Var sigmoid(const Var& a) {
  Array2 out = map_values(a.value(), logistic);
  return a.graph().record(std::move(out), a.requires_grad(), [a](Graph& g, const Array2& go) {
    const Array2& x = a.value();
    Array2& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = logistic(x.data[i]);
      ga.data[i] += go.data[i] * y * (1.0 - y);
    }
  });
}

Var tanh(const Var& a) {
  Array2 out = map_values(a.value(), [](double x) { return std::tanh(x); });
  return a.graph().record(std::move(out), a.requires_grad(), [a](Graph& g, const Array2& go) {
    const Array2& x = a.value();
    Array2& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = std::tanh(x.data[i]);
      ga.data[i] += go.data[i] * (1.0 - y * y);
    }
  });
}

Var softplus(const Var& a) {
  Array2 out = map_values(a.value(), stable_softplus);
  return a.graph().record(std::move(out), a.requires_grad(), [a](Graph& g, const Array2& go) {
    const Array2& x = a.value();
    Array2& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x.data[i] > 20.0 ? 1.0 : logistic(x.data[i]);
      ga.data[i] += go.data[i] * d;
    }
  });
}

Var relu(const Var& a) {
  Array2 out = map_values(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.graph().record(std::move(out), a.requires_grad(), [a](Graph& g, const Array2& go) {
    const Array2& x = a.value();
    Array2& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.data[i] > 0.0) ga.data[i] += go.data[i];
    }
  });
}

namespace {

Array2 softmax_rows(const Array2& x) {
  Array2 out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

}  // namespace

Var row_softmax(const Var& a) {
  Array2 y = softmax_rows(a.value());
  Array2 saved = a.requires_grad() ? y : Array2{};
  return a.graph().record(std::move(y), a.requires_grad(), [a, y = std::move(saved)](Graph& g, const Array2& go) {
    Array2& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < y.rows; ++r) {
      auto yr = y.row(r);
      auto gr = go.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols; ++c) dot += yr[c] * gr[c];
      auto out = ga.row(r);
      for (std::size_t c = 0; c < y.cols; ++c) out[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = parts.front().graph();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool needs = false;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw ShapeError("concat_cols: operands recorded on different graphs");
    if (p.rows() != rows) shape_fail("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
    needs = needs || p.requires_grad();
  }
  Array2 out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    view(out).middleCols(Eigen::Index(offset), Eigen::Index(p.cols())) = view(p.value());
    offset += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), needs, [inputs](Graph& g, const Array2& go) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      if (p.requires_grad()) {
        view(g.grad_buffer(p)) += view(go).middleCols(Eigen::Index(offset), Eigen::Index(p.cols()));
      }
      offset += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = parts.front().graph();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool needs = false;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw ShapeError("concat_rows: operands recorded on different graphs");
    if (p.cols() != cols) shape_fail("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
    needs = needs || p.requires_grad();
  }
  Array2 out(rows, cols);
  auto it = out.data.begin();
  for (const Var& p : parts) it = std::copy(p.value().data.begin(), p.value().data.end(), it);
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), needs, [inputs](Graph& g, const Array2& go) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        Array2& gp = g.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) gp.data[i] += go.data[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const Array2& x = a.value();
  if (begin > end || end > x.cols) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " + x.shape_str());
  }
  Array2 out(x.rows, end - begin);
  view(out) = view(x).middleCols(Eigen::Index(begin), Eigen::Index(end - begin));
  return a.graph().record(std::move(out), a.requires_grad(), [a, begin, end](Graph& g, const Array2& go) {
    view(g.grad_buffer(a)).middleCols(Eigen::Index(begin), Eigen::Index(end - begin)) += view(go);
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const Array2& x = a.value();
  if (begin > end || end > x.rows) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " + x.shape_str());
  }
  Array2 out(end - begin, x.cols,
              std::vector<double>(x.data.begin() + long(begin * x.cols), x.data.begin() + long(end * x.cols)));
  return a.graph().record(std::move(out), a.requires_grad(), [a, begin](Graph& g, const Array2& go) {
    Array2& ga = g.grad_buffer(a);
    const std::size_t off = begin * ga.cols;
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[off + i] += go.data[i];
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  const Array2& x = a.value();
  Array2 out(index.size(), x.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= x.rows) {
      throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " + x.shape_str());
    }
    std::copy_n(x.data.begin() + long(index[r] * x.cols), x.cols, out.data.begin() + long(r * x.cols));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.graph().record(std::move(out), a.requires_grad(), [a, idx](Graph& g, const Array2& go) {
    Array2& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto src = go.row(r);
      auto dst = ga.row(idx[r]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t out_rows) {
  const Array2& x = a.value();
  if (index.size() != x.rows) {
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " + x.shape_str());
  }
  Array2 out(out_rows, x.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= out_rows) {
      throw ShapeError("scatter_add_rows: index " + std::to_string(index[r]) + " >= " + std::to_string(out_rows));
    }
    auto src = x.row(r);
    auto dst = out.row(index[r]);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.graph().record(std::move(out), a.requires_grad(), [a, idx](Graph& g, const Array2& go) {
    Array2& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto src = go.row(idx[r]);
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var sum(const Var& a) {
  Array2 out(1, 1, view(a.value()).sum());
  return a.graph().record(std::move(out), a.requires_grad(), [a](Graph& g, const Array2& go) {
    view(g.grad_buffer(a)).array() += go.data[0];
  });
}

Var mean(const Var& a) {
  const double n = double(a.value().size());
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

namespace {

void check_affine(std::string_view op, const Array2& x, const Array2& gamma, const Array2& beta) {
  if (gamma.rows != 1 || gamma.cols != x.cols) shape_fail(op, x, gamma);
  if (beta.rows != 1 || beta.cols != x.cols) shape_fail(op, x, beta);
}

}  // namespace

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats) {
  Graph& g = same_graph(x, gamma);
  const Array2& xv = x.value();
  check_affine("batch_norm_train", xv, gamma.value(), beta.value());
  if (xv.rows == 0) throw ShapeError("batch_norm_train: empty batch");
  const std::size_t m = xv.rows;
  const std::size_t c = xv.cols;
  Array2 mu(1, c);
  Array2 var(1, c);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) mu.data[j] += xv(r, j);
  for (double& v : mu.data) v /= double(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv(r, j) - mu.data[j];
      var.data[j] += d * d;
    }
  for (double& v : var.data) v /= double(m);

  Array2 xhat(m, c);
  Array2 out(m, c);
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var.data[j] + eps);
  const Array2& gv = gamma.value();
  const Array2& bv = beta.value();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      xhat(r, j) = (xv(r, j) - mu.data[j]) * inv_std[j];
      out(r, j) = xhat(r, j) * gv.data[j] + bv.data[j];
    }
  if (stats) *stats = BatchStats{mu, var};

  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  return g.record(std::move(out), needs,
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Array2& go) {
                    const std::size_t m = go.rows;
                    const std::size_t c = go.cols;
                    const Array2& gv = gamma.value();
                    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t j = 0; j < c; ++j) {
                        sum_g[j] += go(r, j);
                        sum_gx[j] += go(r, j) * xhat(r, j);
                      }
                    if (gamma.requires_grad()) {
                      Array2& gg = g.grad_buffer(gamma);
                      for (std::size_t j = 0; j < c; ++j) gg.data[j] += sum_gx[j];
                    }
                    if (beta.requires_grad()) {
                      Array2& gb = g.grad_buffer(beta);
                      for (std::size_t j = 0; j < c; ++j) gb.data[j] += sum_g[j];
                    }
                    if (x.requires_grad()) {
                      Array2& gx = g.grad_buffer(x);
                      const double inv_m = 1.0 / double(m);
                      for (std::size_t r = 0; r < m; ++r)
                        for (std::size_t j = 0; j < c; ++j) {
                          gx(r, j) += gv.data[j] * inv_std[j] *
                                      (go(r, j) - inv_m * sum_g[j] - xhat(r, j) * inv_m * sum_gx[j]);
                        }
                    }
                  });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Array2& running_mean,
                    const Array2& running_var, double eps) {
  Graph& g = same_graph(x, gamma);
  const Array2& xv = x.value();
  check_affine("batch_norm_eval", xv, gamma.value(), beta.value());
  check_affine("batch_norm_eval", xv, running_mean, running_var);
  const std::size_t c = xv.cols;
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(running_var.data[j] + eps);
  Array2 xhat(xv.rows, c);
  Array2 out(xv.rows, c);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      xhat(r, j) = (xv(r, j) - running_mean.data[j]) * inv_std[j];
      out(r, j) = xhat(r, j) * gamma.value().data[j] + beta.value().data[j];
    }
  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  return g.record(std::move(out), needs,
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Array2& go) {
                    const std::size_t c = go.cols;
                    if (gamma.requires_grad()) {
                      Array2& gg = g.grad_buffer(gamma);
                      for (std::size_t r = 0; r < go.rows; ++r)
                        for (std::size_t j = 0; j < c; ++j) gg.data[j] += go(r, j) * xhat(r, j);
                    }
                    if (beta.requires_grad()) {
                      Array2& gb = g.grad_buffer(beta);
                      for (std::size_t r = 0; r < go.rows; ++r)
                        for (std::size_t j = 0; j < c; ++j) gb.data[j] += go(r, j);
                    }
                    if (x.requires_grad()) {
                      Array2& gx = g.grad_buffer(x);
                      for (std::size_t r = 0; r < go.rows; ++r)
                        for (std::size_t j = 0; j < c; ++j)
                          gx(r, j) += go(r, j) * gamma.value().data[j] * inv_std[j];
                    }
                  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, std::size_t groups, double eps) {
  Graph& g = same_graph(x, gamma);
  const Array2& xv = x.value();
  check_affine("group_norm", xv, gamma.value(), beta.value());
  if (groups == 0 || xv.cols % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(groups) + " groups do not divide " + std::to_string(xv.cols) +
                     " channels");
  }
  const std::size_t width = xv.cols / groups;
  Array2 xhat(xv.rows, xv.cols);
  Array2 inv_std(xv.rows, groups);
  Array2 out(xv.rows, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t c0 = grp * width;
      double mu = 0.0;
      for (std::size_t j = 0; j < width; ++j) mu += xv(r, c0 + j);
      mu /= double(width);
      double var = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const double d = xv(r, c0 + j) - mu;
        var += d * d;
      }
      var /= double(width);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std(r, grp) = is;
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t c = c0 + j;
        xhat(r, c) = (xv(r, c) - mu) * is;
        out(r, c) = xhat(r, c) * gamma.value().data[c] + beta.value().data[c];
      }
    }
  }
  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  return g.record(
      std::move(out), needs,
      [x, gamma, beta, groups, width, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g,
                                                                                          const Array2& go) {
        if (gamma.requires_grad()) {
          Array2& gg = g.grad_buffer(gamma);
          for (std::size_t r = 0; r < go.rows; ++r)
            for (std::size_t c = 0; c < go.cols; ++c) gg.data[c] += go(r, c) * xhat(r, c);
        }
        if (beta.requires_grad()) {
          Array2& gb = g.grad_buffer(beta);
          for (std::size_t r = 0; r < go.rows; ++r)
            for (std::size_t c = 0; c < go.cols; ++c) gb.data[c] += go(r, c);
        }
        if (!x.requires_grad()) return;
        Array2& gx = g.grad_buffer(x);
        const double inv_w = 1.0 / double(width);
        for (std::size_t r = 0; r < go.rows; ++r) {
          for (std::size_t grp = 0; grp < groups; ++grp) {
            const std::size_t c0 = grp * width;
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t c = c0 + j;
              const double d = go(r, c) * gamma.value().data[c];
              sum_d += d;
              sum_dx += d * xhat(r, c);
            }
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t c = c0 + j;
              const double d = go(r, c) * gamma.value().data[c];
              gx(r, c) += inv_std(r, grp) * (d - inv_w * sum_d - xhat(r, c) * inv_w * sum_dx);
            }
          }
        }
      });
}

namespace {

double smooth_l1_value(double x, double beta) {
  const double ax = std::abs(x);
  return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
}

double smooth_l1_slope(double x, double beta) {
  if (std::abs(x) < beta) return x / beta;
  return x > 0 ? 1.0 : -1.0;
}

}  // namespace

Var smooth_l1(const Var& pred, const Array2& target, double beta) {
  const Array2& p = pred.value();
  if (!p.same_shape(target)) shape_fail("smooth_l1", p, target);
  if (p.empty()) throw ShapeError("smooth_l1: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += smooth_l1_value(p.data[i] - target.data[i], beta);
  const double n = double(p.size());
  return pred.graph().record(Array2(1, 1, total / n), pred.requires_grad(),
                             [pred, target, beta, n](Graph& g, const Array2& go) {
                               const Array2& p = pred.value();
                               Array2& gp = g.grad_buffer(pred);
                               for (std::size_t i = 0; i < p.size(); ++i)
                                 gp.data[i] += go.data[0] * smooth_l1_slope(p.data[i] - target.data[i], beta) / n;
                             });
}

Var row_smooth_l1(const Var& pred, const Array2& target, double beta) {
  const Array2& p = pred.value();
  if (!p.same_shape(target)) shape_fail("row_smooth_l1", p, target);
  if (p.cols == 0) throw ShapeError("row_smooth_l1: empty rows");
  Array2 out(p.rows, 1);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < p.cols; ++c) total += smooth_l1_value(p(r, c) - target(r, c), beta);
    out.data[r] = total / double(p.cols);
  }
  return pred.graph().record(std::move(out), pred.requires_grad(), [pred, target, beta](Graph& g, const Array2& go) {
    const Array2& p = pred.value();
    Array2& gp = g.grad_buffer(pred);
    const double n = double(p.cols);
    for (std::size_t r = 0; r < p.rows; ++r)
      for (std::size_t c = 0; c < p.cols; ++c)
        gp(r, c) += go.data[r] * smooth_l1_slope(p(r, c) - target(r, c), beta) / n;
  });
}

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::matmul: return "matmul";
    case Primitive::add: return "add";
    case Primitive::concat_cols: return "concat-cols";
    case Primitive::elementwise_mul: return "elementwise-mul";
    case Primitive::sigmoid: return "sigmoid";
    case Primitive::tanh: return "tanh";
    case Primitive::softplus: return "softplus";
    case Primitive::relu: return "relu";
    case Primitive::row_softmax: return "row-softmax";
    case Primitive::scale: return "scale";
  }
  return "?";
}

std::size_t primitive_arity(Primitive p) {
  switch (p) {
    case Primitive::matmul:
    case Primitive::add:
    case Primitive::concat_cols:
    case Primitive::elementwise_mul: return 2;
    default: return 1;
  }
}

Var forward_primitive(Primitive op, std::span<const Var> inputs, double scale_factor) {
  if (op == Primitive::concat_cols) return concat_cols(inputs);
  if (inputs.size() != primitive_arity(op)) {
    throw ShapeError(std::string(primitive_name(op)) + ": expected " + std::to_string(primitive_arity(op)) +
                     " inputs, got " + std::to_string(inputs.size()));
  }
  switch (op) {
    case Primitive::matmul: return matmul(inputs[0], inputs[1]);
    case Primitive::add: return add(inputs[0], inputs[1]);
    case Primitive::elementwise_mul: return mul(inputs[0], inputs[1]);
    case Primitive::sigmoid: return sigmoid(inputs[0]);
    case Primitive::tanh: return tanh(inputs[0]);
    case Primitive::softplus: return softplus(inputs[0]);
    case Primitive::relu: return relu(inputs[0]);
    case Primitive::row_softmax: return row_softmax(inputs[0]);
    case Primitive::scale: return scale(inputs[0], scale_factor);
    case Primitive::concat_cols: break;
  }
  throw ShapeError("forward_primitive: unknown primitive");
}

}  // namespace crat::ad
