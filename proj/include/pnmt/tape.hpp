#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pnmt/tensor.hpp"

namespace pnmt {

class Tape;

// Handle to a value recorded on a tape.
struct Val {
  int32_t i = -1;
  bool valid() const { return i >= 0; }
};

// Reverse-mode tape over dense float64 tensors. Operations append nodes in
// execution order (so the record is already topological); backward() walks
// the record once in reverse. Gradients accumulate across backward() calls.
// A tape is single-threaded; tensors referenced via param() must outlive it.
class Tape {
 public:
  explicit Tape(uint64_t dropout_seed = 0, bool grad_enabled = true, bool training = false);

  // Leaves. leaf() copies the tensor in; param() aliases external storage.
  Val leaf(const Tensor& t, bool requires_grad = false);
  Val param(const Tensor& t);

  const Shape& shape(Val v) const;
  std::span<const double> data(Val v) const;
  std::span<const double> grad(Val v) const;  // accumulated; empty if never reached
  double scalar(Val v) const;
  Tensor tensor(Val v) const;

  Val matmul(Val a, Val b);
  Val matmul_nt(Val a, Val b);  // a [m x k] times b [n x k] transposed
  Val add(Val a, Val b);
  Val axpby(double ca, Val a, double cb, Val b);
  Val add_rowvec(Val a, Val bias);
  Val add_const(Val a, const Tensor& c);  // no gradient into c
  Val mul_scalar(Val a, double s);
  Val mul_elem(Val a, Val b);
  Val relu(Val a);
  Val softmax_rows(Val a);
  Val layer_norm(Val x, Val gain, Val bias, double eps = 1e-5);
  Val slice_cols(Val a, int64_t col0, int64_t ncols);
  Val concat_cols(std::span<const Val> parts);
  Val renorm_rows(Val a, double alpha);
  Val dropout(Val a, double rate);
  Val cross_entropy(Val logits, std::span<const int> targets, double label_smoothing,
                    int pad_id);
  Val sum(Val a);

  void backward(Val loss);

  bool grad_enabled() const { return grad_enabled_; }
  bool training() const { return training_; }
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> buf;        // owned storage; empty when aliasing
    const double* cdata = nullptr;  // buf.data() or external
    int64_t n = 0;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;
  };

  Val push(Shape shape, bool requires_grad);
  Node& node(Val v) { return nodes_[static_cast<size_t>(v.i)]; }
  const Node& node(Val v) const { return nodes_[static_cast<size_t>(v.i)]; }
  double* out(Val v) { return node(v).buf.data(); }
  const double* in(Val v) const { return node(v).cdata; }
  // per-backward-call gradient buffer, zero on first touch
  std::vector<double>& gw(int32_t i);
  bool has_gw(int32_t i) const {
    return static_cast<size_t>(i) < gwork_.size() && !gwork_[static_cast<size_t>(i)].empty();
  }
  void check_same_shape(Val a, Val b, const char* op) const;
  void check_matrix(Val a, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> gwork_;  // this call
  std::vector<std::vector<double>> gacc_;   // accumulated over calls
  std::mt19937_64 rng_;
  bool grad_enabled_;
  bool training_;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_err = 0.0;
};

// Central-difference check of d f / d x against the tape gradient.
// Relative error uses max(1, |analytic|) in the denominator.
GradCheckReport grad_check(const std::function<Val(Tape&, Val)>& f, const Tensor& x,
                           double eps = 1e-5, double tol = 1e-4);

}  // namespace pnmt
