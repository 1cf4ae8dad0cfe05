#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "qtrack/params.hpp"

namespace qtrack::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to one node of a Tape. Cheap to copy; valid as long as the tape
/// lives and is not reset.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), idx_(index) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

/// Append-only reverse-mode tape over dense double matrices. One tape per
/// forward pass; backward() runs a single reverse sweep and accumulates
/// parameter gradients into the owning ParamSet.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf (no gradient tracked).
  Var input(Matrix v);
  /// Differentiable leaf bound to a named ParamSet tensor.
  Var param(ParamSet& ps, const std::string& name);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);          // elementwise
  Var cwise_div(Var a, Var b);    // elementwise
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  Var add_rowvec(Var a, Var row);  // broadcast a 1 x c row over all rows
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int r0, int n);
  Var select_rows(Var a, std::vector<int> rows);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int c0, int n);

  Var softmax_rows(Var a);
  Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var log(Var a);
  Var abs(Var a);
  Var cwise_max(Var a, Var b);
  Var cwise_min(Var a, Var b);
  Var sum(Var a);  // 1x1
  Var mean(Var a); // 1x1
  /// Elementwise x^p for non-negative x (negatives are treated as zero).
  Var pow_scalar(Var a, double p);

  /// log(x / (1-x)) with inputs clamped to [eps, 1-eps]; gradient is zero in
  /// the clamped region.
  Var logit(Var a, double eps = 1e-5);

  /// Sinusoidal box encoding as a fused op: input n x 4 (cx, cy, w, h) ->
  /// n x d_model, differentiable in the box coordinates.
  Var posenc_boxes(Var boxes, int d_model, double temperature);

  /// Reverse sweep from a 1x1 scalar node.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() w.r.t. an arbitrary node (test hook);
  /// empty matrix if the node was never reached.
  Matrix gradient(Var v) const;

  size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;  // lazily allocated during backward
    std::function<void(Tape&)> back;
    ParamSet* pset = nullptr;
    int pname = -1;  // index into param_names_
  };

  Var make(Matrix v, std::function<void(Tape&)> back = nullptr);
  Matrix& grad_buf(int idx);
  bool has_grad(int idx) const;
  const Matrix& val(int idx) const { return nodes_[idx].value; }

  std::vector<Node> nodes_;
  std::vector<std::string> param_names_;
  int cursor_ = -1;  // node whose backward closure is currently running
};

}  // namespace qtrack::ad
