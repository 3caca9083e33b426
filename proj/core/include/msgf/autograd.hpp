#pragma once

// Reverse-mode automatic differentiation over Tensor.
//
// A Var is a shared handle to a node holding a value and an optional
// gradient. Primitive ops below compute their forward value eagerly and, when
// a Tape is active on the calling thread and at least one input requires a
// gradient, append an entry with the hand-derived backward rule. Without an
// active tape the ops are plain numeric functions (inference mode).
//
// Tapes are thread-confined; distinct tapes on distinct threads share no
// mutable state as long as their leaves are disjoint or read-only.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msgf/tensor.hpp"

namespace msgf {

class Tape;

struct VarNode {
  Tensor value;
  Tensor grad;  // empty until a backward pass touches this node
  bool requires_grad = false;
  const Tape* producer = nullptr;  // tape that recorded this node, null for leaves
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var leaf(Tensor value) { return Var(std::move(value), true); }
  static Var constant(Tensor value) { return Var(std::move(value), false); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  double item() const { return node_->value.item(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->producer == nullptr; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient accumulated by backward; throws if none was produced.
  const Tensor& grad() const;
  void zero_grad();

  const std::shared_ptr<VarNode>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<VarNode> node_;
};

// Backward rule: receives the output value, the upstream gradient and one
// pointer per input (null when that input needs no gradient) into which the
// rule must ADD its contribution.
using BackwardFn =
    std::function<void(const Tensor& out, const Tensor& gout, std::span<Tensor* const> gin)>;

class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<std::shared_ptr<VarNode>> inputs;
    std::shared_ptr<VarNode> output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Populates grad on every requires_grad node reachable from `loss`.
  // Requires a one-element loss produced on this tape (or a leaf).
  // Leaves recorded on the tape but unreachable from the loss get zeros.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  void clear() { entries_.clear(); }

  Var record(std::string_view op, Tensor out, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(std::string_view op, Tensor out, std::span<const Var> inputs, BackwardFn fn);

 private:
  std::vector<Entry> entries_;
};

// Makes `tape` the recording target for ops on this thread until destroyed.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording (e.g. for finite-difference probes) within a scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

namespace detail {
// Records `out` on the active tape when any input requires grad; otherwise
// wraps it in a constant Var. `make_fn` is only invoked when recording.
Var emit(std::string_view op, Tensor out, std::span<const Var> inputs,
         const std::function<BackwardFn()>& make_fn);
}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

enum class Activation { sigmoid, tanh, leaky_relu };
enum class ReduceKind { sum, mean, max };

inline constexpr double kDefaultLeakySlope = 0.2;

// Elementwise binary ops. `b` must have the same rank as `a` and each of its
// dims must equal a's or be 1 (broadcast); gradients sum over broadcast axes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
// Elementwise max of two same-shape tensors; ties route gradient to `a`.
Var maximum(const Var& a, const Var& b);

Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double s);
Var one_minus(const Var& x);
Var square(const Var& x);
Var abs(const Var& x);
// sqrt(max(x, 0)); gradient is zero where x <= 0.
Var sqrt_clamped(const Var& x);

Var activation(const Var& x, Activation kind, double slope = kDefaultLeakySlope);
inline Var sigmoid(const Var& x) { return activation(x, Activation::sigmoid); }
inline Var tanh(const Var& x) { return activation(x, Activation::tanh); }
inline Var leaky_relu(const Var& x, double slope = kDefaultLeakySlope) {
  return activation(x, Activation::leaky_relu, slope);
}

// [m x k] * [k x n] -> [m x n]
Var matmul(const Var& a, const Var& b);
// [m x k] * [k] -> [m]
Var matvec(const Var& w, const Var& x);
// <a, b> for equal-shape tensors, result shape {1}
Var dot(const Var& a, const Var& b);
Var transpose(const Var& x);
Var reshape(const Var& x, Shape shape);

// Row-wise softmax with max subtraction. Rank-1 input is treated as one row.
Var softmax_rows(const Var& x);

Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);
// Row `i` of a rank-2 tensor as a rank-1 tensor.
Var row(const Var& x, std::size_t i);
// Stacks equal-shape rank-1 tensors into [n x d].
Var stack_rows(std::span<const Var> rows);

// Reduction over one axis (removing it) or, with axis < 0, over all elements.
// Result of a full reduction has shape {1}. max routes gradient to the first
// argmax.
Var reduce(const Var& x, ReduceKind kind, int axis = -1);
inline Var sum(const Var& x) { return reduce(x, ReduceKind::sum); }
inline Var mean(const Var& x) { return reduce(x, ReduceKind::mean); }

// Elementwise sum / mean of equal-shape tensors. Each coordinate is summed
// in ascending order, so the result is bit-identical under any permutation of
// `parts`. Both throw EmptyReductionError on an empty list.
Var add_n(std::span<const Var> parts);
Var mean_of(std::span<const Var> parts);

// Same-padded 2-D cross-correlation. x [C x H x W], k [O x C x kh x kw],
// kh and kw odd. Output [O x ceil(H/stride) x ceil(W/stride)].
Var conv2d(const Var& x, const Var& k, std::size_t stride = 1);

// Mean over a window x window neighbourhood with edge replication.
// Input [H x W]; window odd.
Var box_mean(const Var& x, std::size_t window);

// Row `index` of an embedding table [V x d] as a rank-1 tensor.
Var embedding_lookup(const Var& table, std::size_t index);

struct PoolBox {
  std::size_t x0, y0, x1, y1;  // half-open pixel extent
};
// Max-pools feature map [C x H x W] over a p x p grid laid on `box`.
// Output is the flattened [C * p * p] (channel-major, then cell row, cell col).
Var roi_max_pool(const Var& feature_map, const PoolBox& box, std::size_t p);

// Gated recurrent unit parameters. W* are [d x e], U* are [d x d], b* are [d].
struct GruParams {
  Var w_z, w_r, w_h;
  Var u_z, u_r, u_h;
  Var b_z, b_r, b_h;
};

// One GRU step: update gate, reset gate, candidate state, interpolation.
Var gru_cell(const Var& input, const Var& h_prev, const GruParams& p);

}  // namespace msgf
