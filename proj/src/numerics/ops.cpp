#include "pnerf/numerics/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace pnerf::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

CMap cmap(std::span<const double> v, std::size_t r, std::size_t c) {
  return CMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MMap mmap(std::span<double> v, std::size_t r, std::size_t c) {
  return MMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename F, typename D>
Tensor unary(const char* name, const Tensor& a, F f, D dfdx) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make_op(name, a.shape(), std::move(out), {&a}, [a, dfdx](const Node& o) {
    auto ga = grad_sink(a);
    if (ga.empty()) return;
    auto av = a.values();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * dfdx(av[i], o.value[i]);
  });
}

// dst[c] += sum_r g[r, c] in row order. A plain loop for the same reason as
// row_sum: Eigen's partial reductions depend on operand alignment.
void add_column_sums(std::span<double> dst, std::span<const double> g, std::size_t n, std::size_t m) {
  std::vector<double> acc(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) acc[c] += g[r * m + c];
  for (std::size_t c = 0; c < m; ++c) dst[c] += acc[c];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  mmap(out, m, n).noalias() = cmap(a.values(), m, k) * cmap(b.values(), k, n);
  return make_op("matmul", {m, n}, std::move(out), {&a, &b}, [a, b, m, k, n](const Node& o) {
    auto g = cmap(o.grad, m, n);
    if (auto ga = grad_sink(a); !ga.empty()) mmap(ga, m, k).noalias() += g * cmap(b.values(), k, n).transpose();
    if (auto gb = grad_sink(b); !gb.empty()) mmap(gb, k, n).noalias() += cmap(a.values(), m, k).transpose() * g;
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner extents differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(m * n);
  mmap(out, m, n).noalias() = cmap(a.values(), m, k) * cmap(b.values(), n, k).transpose();
  return make_op("matmul_nt", {m, n}, std::move(out), {&a, &b}, [a, b, m, k, n](const Node& o) {
    auto g = cmap(o.grad, m, n);
    if (auto ga = grad_sink(a); !ga.empty()) mmap(ga, m, k).noalias() += g * cmap(b.values(), n, k);
    if (auto gb = grad_sink(b); !gb.empty()) mmap(gb, n, k).noalias() += g.transpose() * cmap(a.values(), m, k);
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  mmap(out, n, m) = cmap(a.values(), m, n).transpose();
  return make_op("transpose", {n, m}, std::move(out), {&a}, [a, m, n](const Node& o) {
    if (auto ga = grad_sink(a); !ga.empty()) mmap(ga, m, n) += cmap(o.grad, n, m).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op("reshape", std::move(shape), std::move(out), {&a}, [a](const Node& o) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const std::size_t n = x.rows(), in = x.cols(), out_dim = w.cols();
  if (w.rows() != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " does not match weight " +
                     shape_str(w.shape()));
  }
  if (bias.defined() && bias.numel() != out_dim) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " for output width " + std::to_string(out_dim));
  }
  std::vector<double> out(n * out_dim);
  auto om = mmap(out, n, out_dim);
  om.noalias() = cmap(x.values(), n, in) * cmap(w.values(), in, out_dim);
  if (bias.defined()) om.rowwise() += cmap(bias.values(), 1, out_dim).row(0);
  return make_op("linear", {n, out_dim}, std::move(out), {&x, &w, &bias},
                 [x, w, bias, n, in, out_dim](const Node& o) {
                   auto g = cmap(o.grad, n, out_dim);
                   if (auto gx = grad_sink(x); !gx.empty())
                     mmap(gx, n, in).noalias() += g * cmap(w.values(), in, out_dim).transpose();
                   if (auto gw = grad_sink(w); !gw.empty())
                     mmap(gw, in, out_dim).noalias() += cmap(x.values(), n, in).transpose() * g;
                   if (auto gb = grad_sink(bias); !gb.empty()) add_column_sums(gb, o.grad, n, out_dim);
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_op("add", a.shape(), std::move(out), {&a, &b}, [a, b](const Node& o) {
    for (const Tensor* t : {&a, &b}) {
      auto g = grad_sink(*t);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_op("sub", a.shape(), std::move(out), {&a, &b}, [a, b](const Node& o) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_op("mul", a.shape(), std::move(out), {&a, &b}, [a, b](const Node& o) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * b.at(i);
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * a.at(i);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = a.rows(), m = a.cols();
  if (row.numel() != m) {
    throw ShapeError("add_row: row " + shape_str(row.shape()) + " for matrix " + shape_str(a.shape()));
  }
  std::vector<double> out(n * m);
  mmap(out, n, m) = cmap(a.values(), n, m).rowwise() + cmap(row.values(), 1, m).row(0);
  return make_op("add_row", a.shape(), std::move(out), {&a, &row}, [a, row, n, m](const Node& o) {
    auto g = cmap(o.grad, n, m);
    if (auto ga = grad_sink(a); !ga.empty()) mmap(ga, n, m) += g;
    if (auto gr = grad_sink(row); !gr.empty()) add_column_sums(gr, o.grad, n, m);
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op("sum", {}, {s}, {&a}, [a](const Node& o) {
    auto ga = grad_sink(a);
    for (auto& g : ga) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor row_sum(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> out(n);
  // Plain loop: Eigen's vectorised reductions peel by address, which would
  // make the summation order depend on allocation alignment.
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += av[i * m + j];
    out[i] = s;
  }
  return make_op("row_sum", {n, 1}, std::move(out), {&a}, [a, n, m](const Node& o) {
    if (auto ga = grad_sink(a); !ga.empty())
      mmap(ga, n, m).colwise() += cmap(o.grad, n, 1).col(0);
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
    total += p.cols();
  }
  std::vector<double> out(n * total);
  auto om = mmap(out, n, total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    om.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols())) =
        cmap(p.values(), n, p.cols());
    off += p.cols();
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  return make_op("concat_cols", {n, total}, std::move(out), any, [parts, n, total](const Node& o) {
    auto g = cmap(o.grad, n, total);
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (auto gp = grad_sink(p); !gp.empty())
        mmap(gp, n, p.cols()) +=
            g.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols()));
      off += p.cols();
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t m = parts[0].cols();
  std::size_t total = 0;
  bool any = false;
  for (const auto& p : parts) {
    if (p.cols() != m) throw ShapeError("concat_rows: column counts differ");
    total += p.rows();
    any = any || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(total * m);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_op("concat_rows", {total, m}, std::move(out), any, [parts](const Node& o) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      auto gp = grad_sink(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += o.grad[off + i];
      off += p.numel();
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t n = a.rows(), m = a.cols();
  if (start + count > m) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + shape_str(a.shape()));
  }
  std::vector<double> out(n * count);
  mmap(out, n, count) =
      cmap(a.values(), n, m).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return make_op("slice_cols", {n, count}, std::move(out), {&a}, [a, n, m, start, count](const Node& o) {
    if (auto ga = grad_sink(a); !ga.empty())
      mmap(ga, n, m).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) +=
          cmap(o.grad, n, count);
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> out(index.size() * m);
  auto av = a.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range");
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(index[i] * m), m,
                out.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_op("gather_rows", {index.size(), m}, std::move(out), {&a},
                 [a, idx = std::move(idx), m](const Node& o) {
                   auto ga = grad_sink(a);
                   if (ga.empty()) return;
                   for (std::size_t i = 0; i < idx.size(); ++i)
                     for (std::size_t c = 0; c < m; ++c) ga[idx[i] * m + c] += o.grad[i * m + c];
                 });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> out(n * m);
  auto av = a.values();
  for (std::size_t r = 0; r < n; ++r) {
    const double* in = av.data() + r * m;
    double* y = out.data() + r * m;
    const double mx = *std::max_element(in, in + m);
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) z += (y[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < m; ++c) y[c] /= z;
  }
  return make_op("softmax_rows", a.shape(), std::move(out), {&a}, [a, n, m](const Node& o) {
    auto ga = grad_sink(a);
    if (ga.empty()) return;
    for (std::size_t r = 0; r < n; ++r) {
      const double* y = o.value.data() + r * m;
      const double* g = o.grad.data() + r * m;
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += y[c] * g[c];
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += y[c] * (g[c] - dot);
    }
  });
}

void backward(const Tensor& output) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw ContractError("backward() called with no active tape");
  tape->backward(output);
}

}  // namespace pnerf::num
