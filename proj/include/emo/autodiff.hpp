#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace emo::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Rows [offset, offset + length) of a token matrix belonging to one sequence.
struct Segment {
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

/// Reference to one row of one source in gather_rows.
struct RowRef {
  int source = 0;
  Eigen::Index row = 0;
};

/// Records every operation applied to its nodes and replays them in reverse
/// to accumulate gradients. Node storage is a deque, so value references stay
/// valid while the tape grows.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Leaves that reference an external matrix instead of copying it. The
  /// matrix must outlive the tape and stay unchanged while it is in use.
  Var constant_ref(const Matrix& value);
  Var variable_ref(const Matrix& value);

  /// Appends an op result. requires_grad is inherited from the inputs.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
  void backward(Var root);

  const Matrix& value(Var v) const { return value_at(v.id()); }
  const Matrix& value_at(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }

  /// Gradient after backward(); a zero matrix of the value's shape if nothing flowed.
  Matrix grad(Var v) const;

  /// Accumulation slot used by op backward functions; zero-initialized on first use.
  Matrix& grad_slot(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// Linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Adds a 1 x cols bias to every row.
Var add_row(Var a, Var bias);
Var concat_cols(Var a, Var b);

// Nonlinearities and normalization.
Var gelu(Var a);
/// Row-wise layer norm with 1 x cols gain and offset.
Var layer_norm(Var x, Var gain, Var offset, double eps = 1e-5);
/// Multiplies by a fixed mask (inverted dropout masks are pre-scaled).
Var mask(Var a, const Matrix& m);

// Structural ops.
Var gather_rows(std::span<const Var> sources, std::span<const RowRef> rows);
/// Per-segment row mean: output row i is the mean of segment i.
Var segment_mean(Var x, std::span<const Segment> segments);

/// Receives softmax probability matrices (one per segment and head, in
/// segment-major order) for inspection.
using AttentionProbe = std::vector<Matrix>;

/// Multi-head self-attention inside each segment. qkv holds [Q | K | V]
/// column blocks of width model_dim each; returns the concatenated heads.
Var segment_attention(Var qkv, std::span<const Segment> segments, int num_heads, AttentionProbe* probe = nullptr);

// Reductions and losses; all return 1x1.
Var sum(Var a);
Var mean(Var a);
/// Mean binary cross-entropy of sigmoid(logits) against labels, in logit space.
Var bce_with_logits(Var logits, std::span<const double> labels);
/// Mean over rows of y*d^2 + (1-y)*max(0, m-d)^2 with d the Euclidean
/// distance between the L2-normalized rows of a and b. Zero rows throw.
Var contrastive_margin(Var a, Var b, std::span<const double> pair_labels, double margin);

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace emo::ad
