#include "pnmt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "pnmt/kernels.hpp"

namespace pnmt {

Tape::Tape(uint64_t dropout_seed, bool grad_enabled, bool training)
    : rng_(dropout_seed), grad_enabled_(grad_enabled), training_(training) {
  nodes_.reserve(256);
}

Val Tape::push(Shape shape, bool requires_grad) {
  Node nd;
  nd.n = shape_numel(shape);
  nd.shape = std::move(shape);
  nd.buf.assign(static_cast<size_t>(nd.n), 0.0);
  nd.cdata = nd.buf.data();
  nd.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(nd));
  return Val{static_cast<int32_t>(nodes_.size() - 1)};
}

Val Tape::leaf(const Tensor& t, bool requires_grad) {
  Val v = push(t.shape, requires_grad || t.requires_grad);
  std::copy(t.data.begin(), t.data.end(), out(v));
  return v;
}

Val Tape::param(const Tensor& t) {
  Node nd;
  nd.shape = t.shape;
  nd.n = t.numel();
  nd.cdata = t.data.data();
  nd.requires_grad = t.requires_grad && grad_enabled_;
  nodes_.push_back(std::move(nd));
  return Val{static_cast<int32_t>(nodes_.size() - 1)};
}

const Shape& Tape::shape(Val v) const { return node(v).shape; }

std::span<const double> Tape::data(Val v) const {
  return {node(v).cdata, static_cast<size_t>(node(v).n)};
}

std::span<const double> Tape::grad(Val v) const {
  const auto i = static_cast<size_t>(v.i);
  if (i >= gacc_.size() || gacc_[i].empty()) return {};
  return {gacc_[i].data(), gacc_[i].size()};
}

double Tape::scalar(Val v) const {
  if (node(v).n != 1) throw std::logic_error("scalar() on tensor " + shape_str(node(v).shape));
  return node(v).cdata[0];
}

Tensor Tape::tensor(Val v) const {
  Tensor t(node(v).shape);
  std::copy_n(node(v).cdata, node(v).n, t.data.begin());
  return t;
}

std::vector<double>& Tape::gw(int32_t i) {
  auto idx = static_cast<size_t>(i);
  if (gwork_.size() <= idx) gwork_.resize(nodes_.size());
  if (gwork_[idx].empty()) gwork_[idx].assign(static_cast<size_t>(nodes_[idx].n), 0.0);
  return gwork_[idx];
}

void Tape::check_same_shape(Val a, Val b, const char* op) const {
  if (node(a).shape != node(b).shape)
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(node(a).shape) +
                                " and " + shape_str(node(b).shape) + " differ");
}

void Tape::check_matrix(Val a, const char* op) const {
  if (node(a).shape.size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                shape_str(node(a).shape));
}

Val Tape::matmul(Val a, Val b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  const int64_t m = shape(a)[0], k = shape(a)[1], k2 = shape(b)[0], n = shape(b)[1];
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(shape(a)) +
                                " vs " + shape_str(shape(b)));
  Val c = push({m, n}, node(a).requires_grad || node(b).requires_grad);
  kern::matmul(m, k, n, in(a), in(b), out(c));
  if (node(c).requires_grad)
    node(c).backprop = [a, b, c, m, k, n](Tape& t) {
      const auto& dc = t.gw(c.i);
      if (t.node(a).requires_grad)
        kern::matmul_nt(m, n, k, dc.data(), t.in(b), t.gw(a.i).data(), true);
      if (t.node(b).requires_grad)
        kern::matmul_tn(k, m, n, t.in(a), dc.data(), t.gw(b.i).data(), true);
    };
  return c;
}

Val Tape::matmul_nt(Val a, Val b) {
  check_matrix(a, "matmul_nt");
  check_matrix(b, "matmul_nt");
  const int64_t m = shape(a)[0], k = shape(a)[1], n = shape(b)[0];
  if (k != shape(b)[1])
    throw std::invalid_argument("matmul_nt: inner dimensions disagree, " + shape_str(shape(a)) +
                                " vs " + shape_str(shape(b)) + " transposed");
  Val c = push({m, n}, node(a).requires_grad || node(b).requires_grad);
  kern::matmul_nt(m, k, n, in(a), in(b), out(c));
  if (node(c).requires_grad)
    node(c).backprop = [a, b, c, m, k, n](Tape& t) {
      const auto& dc = t.gw(c.i);
      // C = A B^T: dA += dC B, dB += dC^T A
      if (t.node(a).requires_grad)
        kern::matmul(m, n, k, dc.data(), t.in(b), t.gw(a.i).data(), true);
      if (t.node(b).requires_grad)
        kern::matmul_tn(n, m, k, dc.data(), t.in(a), t.gw(b.i).data(), true);
    };
  return c;
}

Val Tape::add(Val a, Val b) { return axpby(1.0, a, 1.0, b); }

Val Tape::axpby(double ca, Val a, double cb, Val b) {
  check_same_shape(a, b, "axpby");
  Val c = push(shape(a), node(a).requires_grad || node(b).requires_grad);
  const double *pa = in(a), *pb = in(b);
  double* pc = out(c);
  const int64_t n = node(c).n;
  for (int64_t i = 0; i < n; ++i) pc[i] = ca * pa[i] + cb * pb[i];
  if (node(c).requires_grad)
    node(c).backprop = [a, b, c, ca, cb, n](Tape& t) {
      const auto& dc = t.gw(c.i);
      if (t.node(a).requires_grad) {
        auto& da = t.gw(a.i);
        for (int64_t i = 0; i < n; ++i) da[i] += ca * dc[i];
      }
      if (t.node(b).requires_grad) {
        auto& db = t.gw(b.i);
        for (int64_t i = 0; i < n; ++i) db[i] += cb * dc[i];
      }
    };
  return c;
}

Val Tape::add_rowvec(Val a, Val bias) {
  check_matrix(a, "add_rowvec");
  const int64_t m = shape(a)[0], n = shape(a)[1];
  if (node(bias).shape != Shape{n})
    throw std::invalid_argument("add_rowvec: bias " + shape_str(shape(bias)) +
                                " does not match row width " + std::to_string(n));
  Val c = push(shape(a), node(a).requires_grad || node(bias).requires_grad);
  const double *pa = in(a), *pb = in(bias);
  double* pc = out(c);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) pc[i * n + j] = pa[i * n + j] + pb[j];
  if (node(c).requires_grad)
    node(c).backprop = [a, bias, c, m, n](Tape& t) {
      const auto& dc = t.gw(c.i);
      if (t.node(a).requires_grad) {
        auto& da = t.gw(a.i);
        for (int64_t i = 0; i < m * n; ++i) da[i] += dc[i];
      }
      if (t.node(bias).requires_grad) {
        auto& db = t.gw(bias.i);
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) db[j] += dc[i * n + j];
      }
    };
  return c;
}

Val Tape::add_const(Val a, const Tensor& cst) {
  if (node(a).shape != cst.shape)
    throw std::invalid_argument("add_const: shapes " + shape_str(node(a).shape) + " and " +
                                shape_str(cst.shape) + " differ");
  Val c = push(shape(a), node(a).requires_grad);
  const double* pa = in(a);
  double* pc = out(c);
  const int64_t n = node(c).n;
  for (int64_t i = 0; i < n; ++i) pc[i] = pa[i] + cst.data[static_cast<size_t>(i)];
  if (node(c).requires_grad)
    node(c).backprop = [a, c, n](Tape& t) {
      auto& da = t.gw(a.i);
      const auto& dc = t.gw(c.i);
      for (int64_t i = 0; i < n; ++i) da[i] += dc[i];
    };
  return c;
}

Val Tape::mul_scalar(Val a, double s) {
  Val c = push(shape(a), node(a).requires_grad);
  const double* pa = in(a);
  double* pc = out(c);
  const int64_t n = node(c).n;
  for (int64_t i = 0; i < n; ++i) pc[i] = s * pa[i];
  if (node(c).requires_grad)
    node(c).backprop = [a, c, s, n](Tape& t) {
      auto& da = t.gw(a.i);
      const auto& dc = t.gw(c.i);
      for (int64_t i = 0; i < n; ++i) da[i] += s * dc[i];
    };
  return c;
}

Val Tape::mul_elem(Val a, Val b) {
  check_same_shape(a, b, "mul_elem");
  Val c = push(shape(a), node(a).requires_grad || node(b).requires_grad);
  const double *pa = in(a), *pb = in(b);
  double* pc = out(c);
  const int64_t n = node(c).n;
  for (int64_t i = 0; i < n; ++i) pc[i] = pa[i] * pb[i];
  if (node(c).requires_grad)
    node(c).backprop = [a, b, c, n](Tape& t) {
      const auto& dc = t.gw(c.i);
      if (t.node(a).requires_grad) {
        auto& da = t.gw(a.i);
        const double* pb2 = t.in(b);
        for (int64_t i = 0; i < n; ++i) da[i] += dc[i] * pb2[i];
      }
      if (t.node(b).requires_grad) {
        auto& db = t.gw(b.i);
        const double* pa2 = t.in(a);
        for (int64_t i = 0; i < n; ++i) db[i] += dc[i] * pa2[i];
      }
    };
  return c;
}

Val Tape::relu(Val a) {
  Val c = push(shape(a), node(a).requires_grad);
  kern::relu(node(c).n, in(a), out(c));
  if (node(c).requires_grad)
    node(c).backprop = [a, c](Tape& t) {
      kern::relu_backward(t.node(c).n, t.in(a), t.gw(c.i).data(), t.gw(a.i).data());
    };
  return c;
}

Val Tape::softmax_rows(Val a) {
  check_matrix(a, "softmax_rows");
  const int64_t m = shape(a)[0], n = shape(a)[1];
  Val c = push(shape(a), node(a).requires_grad);
  kern::softmax_rows(m, n, in(a), out(c));
  if (node(c).requires_grad)
    node(c).backprop = [a, c, m, n](Tape& t) {
      kern::softmax_rows_backward(m, n, t.in(c), t.gw(c.i).data(), t.gw(a.i).data());
    };
  return c;
}

Val Tape::layer_norm(Val x, Val gain, Val bias, double eps) {
  check_matrix(x, "layer_norm");
  const int64_t m = shape(x)[0], n = shape(x)[1];
  if (node(gain).shape != Shape{n} || node(bias).shape != Shape{n})
    throw std::invalid_argument("layer_norm: gain/bias must be [" + std::to_string(n) + "]");
  Val c = push(shape(x),
               node(x).requires_grad || node(gain).requires_grad || node(bias).requires_grad);
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(m * n));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(m));
  kern::layer_norm(m, n, in(x), in(gain), in(bias), eps, out(c), xhat->data(), inv_std->data());
  if (node(c).requires_grad)
    node(c).backprop = [x, gain, bias, c, m, n, xhat, inv_std](Tape& t) {
      kern::layer_norm_backward(m, n, t.gw(c.i).data(), t.in(gain), xhat->data(),
                                inv_std->data(), t.gw(x.i).data(), t.gw(gain.i).data(),
                                t.gw(bias.i).data());
    };
  return c;
}

Val Tape::slice_cols(Val a, int64_t col0, int64_t ncols) {
  check_matrix(a, "slice_cols");
  const int64_t m = shape(a)[0], n = shape(a)[1];
  if (col0 < 0 || ncols <= 0 || col0 + ncols > n)
    throw std::invalid_argument("slice_cols: [" + std::to_string(col0) + ", " +
                                std::to_string(col0 + ncols) + ") outside width " +
                                std::to_string(n));
  Val c = push({m, ncols}, node(a).requires_grad);
  const double* pa = in(a);
  double* pc = out(c);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < ncols; ++j) pc[i * ncols + j] = pa[i * n + col0 + j];
  if (node(c).requires_grad)
    node(c).backprop = [a, c, m, n, col0, ncols](Tape& t) {
      auto& da = t.gw(a.i);
      const auto& dc = t.gw(c.i);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < ncols; ++j) da[i * n + col0 + j] += dc[i * ncols + j];
    };
  return c;
}

Val Tape::concat_cols(std::span<const Val> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const int64_t m = shape(parts[0])[0];
  int64_t total = 0;
  bool rg = false;
  for (Val p : parts) {
    check_matrix(p, "concat_cols");
    if (shape(p)[0] != m)
      throw std::invalid_argument("concat_cols: row counts differ, " +
                                  shape_str(shape(parts[0])) + " vs " + shape_str(shape(p)));
    total += shape(p)[1];
    rg = rg || node(p).requires_grad;
  }
  Val c = push({m, total}, rg);
  double* pc = out(c);
  int64_t off = 0;
  for (Val p : parts) {
    const int64_t w = shape(p)[1];
    const double* pp = in(p);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j) pc[i * total + off + j] = pp[i * w + j];
    off += w;
  }
  if (node(c).requires_grad) {
    std::vector<Val> ps(parts.begin(), parts.end());
    node(c).backprop = [ps, c, m, total](Tape& t) {
      const auto& dc = t.gw(c.i);
      int64_t off2 = 0;
      for (Val p : ps) {
        const int64_t w = t.shape(p)[1];
        if (t.node(p).requires_grad) {
          auto& dp = t.gw(p.i);
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j) dp[i * w + j] += dc[i * total + off2 + j];
        }
        off2 += w;
      }
    };
  }
  return c;
}

Val Tape::renorm_rows(Val a, double alpha) {
  check_matrix(a, "renorm_rows");
  if (alpha <= 0.0) throw std::invalid_argument("renorm_rows: alpha must be positive");
  const int64_t m = shape(a)[0], n = shape(a)[1];
  const double* pa = in(a);
  for (int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      if (pa[i * n + j] < 0.0)
        throw std::invalid_argument("renorm_rows: negative entry in row " + std::to_string(i));
      s += pa[i * n + j];
    }
    if (s <= 0.0) throw std::invalid_argument("renorm_rows: row " + std::to_string(i) + " is all zero");
  }
  Val c = push(shape(a), node(a).requires_grad);
  kern::renorm_rows(m, n, pa, alpha, out(c));
  if (node(c).requires_grad)
    node(c).backprop = [a, c, m, n, alpha](Tape& t) {
      kern::renorm_rows_backward(m, n, t.in(a), t.in(c), t.gw(c.i).data(), alpha,
                                 t.gw(a.i).data());
    };
  return c;
}

Val Tape::dropout(Val a, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate outside [0, 1)");
  if (!training_ || rate == 0.0) return a;
  const int64_t n = node(a).n;
  auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (int64_t i = 0; i < n; ++i) (*mask)[static_cast<size_t>(i)] = u(rng_) < rate ? 0.0 : keep_scale;
  Val c = push(shape(a), node(a).requires_grad);
  const double* pa = in(a);
  double* pc = out(c);
  for (int64_t i = 0; i < n; ++i) pc[i] = pa[i] * (*mask)[static_cast<size_t>(i)];
  if (node(c).requires_grad)
    node(c).backprop = [a, c, n, mask](Tape& t) {
      auto& da = t.gw(a.i);
      const auto& dc = t.gw(c.i);
      for (int64_t i = 0; i < n; ++i) da[i] += dc[i] * (*mask)[static_cast<size_t>(i)];
    };
  return c;
}

Val Tape::cross_entropy(Val logits, std::span<const int> targets, double label_smoothing,
                        int pad_id) {
  check_matrix(logits, "cross_entropy");
  const int64_t rows = shape(logits)[0], vocab = shape(logits)[1];
  if (static_cast<int64_t>(targets.size()) != rows)
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(rows) + " rows");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("cross_entropy: label_smoothing outside [0, 1)");
  for (int tgt : targets)
    if (tgt < 0 || tgt >= vocab)
      throw std::out_of_range("cross_entropy: target " + std::to_string(tgt) +
                              " outside vocabulary of " + std::to_string(vocab));

  // Smoothed target distribution q = (1 - ls) * onehot + ls / V, uniform
  // over the whole vocabulary. Loss is the plain sum over non-pad rows;
  // normalization is left to the caller.
  auto tgts = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * vocab));
  kern::softmax_rows(rows, vocab, in(logits), probs->data());
  const double* pl = in(logits);
  double total = 0.0;
  for (int64_t t = 0; t < rows; ++t) {
    const int tgt = (*tgts)[static_cast<size_t>(t)];
    if (tgt == pad_id) continue;
    const double* row = pl + t * vocab;
    double mx = row[0];
    for (int64_t v = 1; v < vocab; ++v) mx = row[v] > mx ? row[v] : mx;
    double se = 0.0, rowsum = 0.0;
    for (int64_t v = 0; v < vocab; ++v) {
      se += std::exp(row[v] - mx);
      rowsum += row[v];
    }
    const double lse = mx + std::log(se);
    total += lse - (1.0 - label_smoothing) * row[tgt] -
             label_smoothing / static_cast<double>(vocab) * rowsum;
  }
  Val c = push({1}, node(logits).requires_grad);
  out(c)[0] = total;
  if (node(c).requires_grad)
    node(c).backprop = [logits, c, rows, vocab, label_smoothing, pad_id, tgts, probs](Tape& t) {
      const double dl = t.gw(c.i)[0];
      auto& dx = t.gw(logits.i);
      const double uni = label_smoothing / static_cast<double>(vocab);
      for (int64_t r = 0; r < rows; ++r) {
        const int tgt = (*tgts)[static_cast<size_t>(r)];
        if (tgt == pad_id) continue;
        const double* p = probs->data() + r * vocab;
        for (int64_t v = 0; v < vocab; ++v) {
          double q = uni + (v == tgt ? 1.0 - label_smoothing : 0.0);
          dx[r * vocab + v] += dl * (p[v] - q);
        }
      }
    };
  return c;
}

Val Tape::sum(Val a) {
  Val c = push({1}, node(a).requires_grad);
  const double* pa = in(a);
  const int64_t n = node(a).n;
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += pa[i];
  out(c)[0] = s;
  if (node(c).requires_grad)
    node(c).backprop = [a, c, n](Tape& t) {
      auto& da = t.gw(a.i);
      const double dc = t.gw(c.i)[0];
      for (int64_t i = 0; i < n; ++i) da[i] += dc;
    };
  return c;
}

void Tape::backward(Val loss) {
  if (!grad_enabled_)
    throw std::logic_error("backward: tape was recorded with gradients disabled");
  if (!loss.valid() || static_cast<size_t>(loss.i) >= nodes_.size())
    throw std::logic_error("backward: loss is not on this tape");
  if (node(loss).n != 1)
    throw std::logic_error("backward: loss must be scalar, got " +
                           shape_str(node(loss).shape));
  gwork_.clear();
  gwork_.resize(nodes_.size());
  gw(loss.i)[0] = 1.0;
  for (int32_t i = loss.i; i >= 0; --i) {
    Node& nd = nodes_[static_cast<size_t>(i)];
    if (!nd.requires_grad || !has_gw(i) || !nd.backprop) continue;
    nd.backprop(*this);
  }
  if (gacc_.size() < nodes_.size()) gacc_.resize(nodes_.size());
  for (size_t i = 0; i < gwork_.size(); ++i) {
    if (gwork_[i].empty() || !nodes_[i].requires_grad) continue;
    if (gacc_[i].empty())
      gacc_[i] = std::move(gwork_[i]);
    else
      for (size_t j = 0; j < gacc_[i].size(); ++j) gacc_[i][j] += gwork_[i][j];
  }
}

GradCheckReport grad_check(const std::function<Val(Tape&, Val)>& f, const Tensor& x, double eps,
                           double tol) {
  Tensor xg = x;
  xg.requires_grad = true;
  Tape tape(0, true, false);
  Val xv = tape.leaf(xg, true);
  Val loss = f(tape, xv);
  if (tape.shape(loss) != Shape{1})
    throw std::invalid_argument("grad_check: f must be scalar-valued");
  tape.backward(loss);
  auto analytic = tape.grad(xv);

  auto eval = [&](const Tensor& xt) {
    Tape t(0, false, false);
    Val v = t.leaf(xt, false);
    return t.scalar(f(t, v));
  };

  GradCheckReport rep;
  Tensor xp = x;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double orig = xp.data[i];
    xp.data[i] = orig + eps;
    const double hi = eval(xp);
    xp.data[i] = orig - eps;
    const double lo = eval(xp);
    xp.data[i] = orig;
    const double fd = (hi - lo) / (2.0 * eps);
    const double a = analytic.empty() ? 0.0 : analytic[i];
    const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
  }
  rep.passed = rep.max_rel_err < tol;
  return rep;
}

}  // namespace pnmt
