#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace gridrl::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
/// Row-wise selection mask; same shape as the logits it applies to.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kLeakySlope = 0.01;

// ---------------------------------------------------------------------------
// Forward kernels on plain matrices. Broadcasting rules:
//   add/sub:  b is same shape, 1 x cols (row broadcast) or 1 x 1.
//   mul/div:  b is same shape, rows x 1 (column broadcast) or 1 x 1.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);
Matrix div(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix concat_cols(std::span<const Matrix> parts);
Matrix gather_rows(const Matrix& a, std::span<const int> rows);
Matrix scatter_add_rows(const Matrix& a, std::span<const int> rows, Index n_rows);
Matrix relu(const Matrix& a);
Matrix leaky_relu(const Matrix& a);
Matrix exp(const Matrix& a);
Matrix log(const Matrix& a);
Matrix square(const Matrix& a);
Matrix sum(const Matrix& a);
Matrix mean(const Matrix& a);
Matrix minimum(const Matrix& a, const Matrix& b);
Matrix clip(const Matrix& a, double lo, double hi);
/// Softmax along each row over `mask`; exactly 0 off-mask.
Matrix masked_softmax(const Matrix& a, const Mask& mask);
/// Log-softmax along each row over `mask`; 0 off-mask.
Matrix masked_log_softmax(const Matrix& a, const Mask& mask);
/// Softmax of a column of logits within groups sharing a segment id.
Matrix segment_softmax(const Matrix& logits, std::span<const int> segment, Index n_segments);

// ---------------------------------------------------------------------------

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records primitive applications; `backward` walks them in reverse order.
/// Parents always carry smaller ids, so reverse id order is a reverse
/// topological order. Values live in a deque so references stay valid.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& out_grad, Tape& tape)>;

  Var constant(Matrix value);
  /// Leaf tied to external storage; registering the same storage twice
  /// returns the same node so gradients accumulate.
  Var parameter(const Matrix& storage);

  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  /// Seeds d(loss)/d(loss) = 1. Throws UsageError for a non-scalar loss.
  void backward(const Var& loss);

  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  void accumulate(const Var& v, const Matrix& g);
  /// Gradient of a recorded value (zeros if never reached).
  Matrix gradient(const Var& v) const;
  /// Gradient w.r.t. registered parameter storage; zeros if not on the tape.
  Matrix gradient_of(const Matrix& storage) const;

  const Matrix& value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Matrix*, int> params_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(const Var& a, std::span<const int> rows);
Var scatter_add_rows(const Var& a, std::span<const int> rows, Index n_rows);
Var relu(const Var& a);
Var leaky_relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var minimum(const Var& a, const Var& b);
Var clip(const Var& a, double lo, double hi);
Var masked_softmax(const Var& a, const Mask& mask);
Var masked_log_softmax(const Var& a, const Mask& mask);
Var segment_softmax(const Var& logits, std::span<const int> segment, Index n_segments);

/// Reverse-mode gradients of a scalar loss w.r.t. parameter storage.
/// Parameters not on the path get zero gradients.
std::vector<Matrix> grad(Tape& tape, const Var& loss, std::span<const Matrix* const> params);

// ---------------------------------------------------------------------------
// Evaluation contexts let the same network code run with or without a tape.

struct EvalContext {
  using Value = Matrix;
  const Matrix& param(const Matrix& p) const { return p; }
  Matrix constant(Matrix m) const { return m; }
};

struct TapeContext {
  using Value = Var;
  Tape& tape;
  Var param(const Matrix& p) const { return tape.parameter(p); }
  Var constant(Matrix m) const { return tape.constant(std::move(m)); }
};

}  // namespace gridrl::ad
