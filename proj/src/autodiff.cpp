#include "gridrl/autodiff.hpp"

#include <cmath>
#include <limits>

#include "gridrl/errors.hpp"

namespace gridrl::ad {

namespace {

enum class Broadcast { Same, Row, Column, Scalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, bool row_wise) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (row_wise && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (!row_wise && b.cols() == 1 && b.rows() == a.rows()) return Broadcast::Column;
  throw ShapeError("incompatible shapes " + std::to_string(a.rows()) + "x" +
                   std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                   std::to_string(b.cols()));
}

/// Reduce a gradient of a's shape back to b's broadcast shape.
Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same: return g;
    case Broadcast::Row: return g.colwise().sum();
    case Broadcast::Column: return g.rowwise().sum();
    case Broadcast::Scalar: return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

/// Expand b to a's shape.
Matrix expand(const Matrix& b, Index rows, Index cols, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same: return b;
    case Broadcast::Row: return b.replicate(rows, 1);
    case Broadcast::Column: return b.replicate(1, cols);
    case Broadcast::Scalar: return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

void check_mask(const Matrix& a, const Mask& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw ShapeError("mask shape mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward kernels

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul inner dimensions differ");
  return a * b;
}

Matrix add(const Matrix& a, const Matrix& b) {
  switch (broadcast_kind(a, b, true)) {
    case Broadcast::Same: return a + b;
    case Broadcast::Row: return a.rowwise() + b.row(0);
    default: return (a.array() + b(0, 0)).matrix();
  }
}

Matrix sub(const Matrix& a, const Matrix& b) {
  switch (broadcast_kind(a, b, true)) {
    case Broadcast::Same: return a - b;
    case Broadcast::Row: return a.rowwise() - b.row(0);
    default: return (a.array() - b(0, 0)).matrix();
  }
}

Matrix mul(const Matrix& a, const Matrix& b) {
  switch (broadcast_kind(a, b, false)) {
    case Broadcast::Same: return a.cwiseProduct(b);
    case Broadcast::Column: return (a.array().colwise() * b.col(0).array()).matrix();
    default: return a * b(0, 0);
  }
}

Matrix div(const Matrix& a, const Matrix& b) {
  switch (broadcast_kind(a, b, false)) {
    case Broadcast::Same: return a.cwiseQuotient(b);
    case Broadcast::Column: return (a.array().colwise() / b.col(0).array()).matrix();
    default: return a / b(0, 0);
  }
}

Matrix scale(const Matrix& a, double s) { return a * s; }

Matrix concat_cols(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Index cols = 0;
  for (const Matrix& p : parts) {
    if (p.rows() != parts[0].rows()) throw ShapeError("concat_cols row counts differ");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  Index c = 0;
  for (const Matrix& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const int> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= a.rows()) throw ShapeError("gather index out of range");
    out.row(static_cast<Index>(k)) = a.row(rows[k]);
  }
  return out;
}

Matrix scatter_add_rows(const Matrix& a, std::span<const int> rows, Index n_rows) {
  if (static_cast<Index>(rows.size()) != a.rows()) throw ShapeError("scatter index count mismatch");
  Matrix out = Matrix::Zero(n_rows, a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= n_rows) throw ShapeError("scatter index out of range");
    out.row(rows[k]) += a.row(static_cast<Index>(k));
  }
  return out;
}

Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }

Matrix leaky_relu(const Matrix& a) {
  return a.unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; });
}

Matrix exp(const Matrix& a) { return a.array().exp().matrix(); }
Matrix log(const Matrix& a) { return a.array().log().matrix(); }
Matrix square(const Matrix& a) { return a.array().square().matrix(); }
Matrix sum(const Matrix& a) { return Matrix::Constant(1, 1, a.sum()); }

Matrix mean(const Matrix& a) {
  return Matrix::Constant(1, 1, a.size() == 0 ? 0.0 : a.sum() / static_cast<double>(a.size()));
}

Matrix minimum(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("minimum shape mismatch");
  return a.cwiseMin(b);
}

Matrix clip(const Matrix& a, double lo, double hi) { return a.cwiseMax(lo).cwiseMin(hi); }

Matrix masked_softmax(const Matrix& a, const Mask& mask) {
  check_mask(a, mask);
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c)) m = std::max(m, a(r, c));
    }
    if (!std::isfinite(m)) continue;
    double z = 0.0;
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c)) z += (out(r, c) = std::exp(a(r, c) - m));
    }
    out.row(r) /= z;
  }
  return out;
}

Matrix masked_log_softmax(const Matrix& a, const Mask& mask) {
  check_mask(a, mask);
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c)) m = std::max(m, a(r, c));
    }
    if (!std::isfinite(m)) continue;
    double z = 0.0;
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c)) z += std::exp(a(r, c) - m);
    }
    const double lse = m + std::log(z);
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c)) out(r, c) = a(r, c) - lse;
    }
  }
  return out;
}

Matrix segment_softmax(const Matrix& logits, std::span<const int> segment, Index n_segments) {
  if (logits.cols() != 1 || static_cast<Index>(segment.size()) != logits.rows()) {
    throw ShapeError("segment_softmax expects a column with one segment id per row");
  }
  Eigen::VectorXd maxima =
      Eigen::VectorXd::Constant(n_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < segment.size(); ++k) {
    maxima[segment[k]] = std::max(maxima[segment[k]], logits(static_cast<Index>(k), 0));
  }
  Matrix out(logits.rows(), 1);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(n_segments);
  for (std::size_t k = 0; k < segment.size(); ++k) {
    const auto i = static_cast<Index>(k);
    out(i, 0) = std::exp(logits(i, 0) - maxima[segment[k]]);
    totals[segment[k]] += out(i, 0);
  }
  for (std::size_t k = 0; k < segment.size(); ++k) out(static_cast<Index>(k), 0) /= totals[segment[k]];
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(const Matrix& storage) {
  if (auto it = params_.find(&storage); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{storage, {}, {}, true, false});
  const int id = static_cast<int>(nodes_.size()) - 1;
  params_.emplace(&storage, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw UsageError("mixing values from different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw UsageError("loss recorded on another tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw UsageError("backward needs a scalar loss");
  for (Node& n : nodes_) n.has_grad = false;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(n.grad, *this);
  }
}

Matrix Tape::gradient(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
}

Matrix Tape::gradient_of(const Matrix& storage) const {
  if (auto it = params_.find(&storage); it != params_.end()) {
    const Node& n = nodes_[it->second];
    if (n.has_grad) return n.grad;
  }
  return Matrix::Zero(storage.rows(), storage.cols());
}

std::vector<Matrix> grad(Tape& tape, const Var& loss, std::span<const Matrix* const> params) {
  tape.backward(loss);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Matrix* p : params) out.push_back(tape.gradient_of(*p));
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable primitives

Var matmul(const Var& a, const Var& b) {
  return a.tape().record(matmul(a.value(), b.value()), {a, b}, [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), true);
  return a.tape().record(add(a.value(), b.value()), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, reduce_to(g, kind));
  });
}

Var sub(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), true);
  return a.tape().record(sub(a.value(), b.value()), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -reduce_to(g, kind));
  });
}

Var mul(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), false);
  return a.tape().record(mul(a.value(), b.value()), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    const Matrix& av = a.value();
    if (t.requires_grad(a)) t.accumulate(a, mul(g, b.value()));
    if (t.requires_grad(b)) t.accumulate(b, reduce_to(g.cwiseProduct(av), kind));
  });
}

Var div(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), false);
  return a.tape().record(div(a.value(), b.value()), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    const Matrix& bv = b.value();
    if (t.requires_grad(a)) t.accumulate(a, div(g, bv));
    if (t.requires_grad(b)) {
      const Matrix full_b = expand(bv, g.rows(), g.cols(), kind);
      const Matrix local = -(g.array() * a.value().array() / full_b.array().square()).matrix();
      t.accumulate(b, reduce_to(local, kind));
    }
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(scale(a.value(), s), {a},
                         [a, s](const Matrix& g, Tape& t) { t.accumulate(a, g * s); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  std::vector<Matrix> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape().record(concat_cols(values), parts, [ps](const Matrix& g, Tape& t) {
    Index c = 0;
    for (const Var& p : ps) {
      const Index w = p.cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(c, w));
      c += w;
    }
  });
}

Var gather_rows(const Var& a, std::span<const int> rows) {
  std::vector<int> idx(rows.begin(), rows.end());
  return a.tape().record(gather_rows(a.value(), rows), {a},
                         [a, idx = std::move(idx)](const Matrix& g, Tape& t) {
                           t.accumulate(a, scatter_add_rows(g, idx, a.rows()));
                         });
}

Var scatter_add_rows(const Var& a, std::span<const int> rows, Index n_rows) {
  std::vector<int> idx(rows.begin(), rows.end());
  return a.tape().record(scatter_add_rows(a.value(), rows, n_rows), {a},
                         [a, idx = std::move(idx)](const Matrix& g, Tape& t) {
                           t.accumulate(a, gather_rows(g, idx));
                         });
}

Var relu(const Var& a) {
  return a.tape().record(relu(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var leaky_relu(const Var& a) {
  return a.tape().record(leaky_relu(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, kLeakySlope * g).matrix());
  });
}

Var exp(const Var& a) {
  Matrix out = exp(a.value());
  Matrix saved = out;
  return a.tape().record(std::move(out), {a}, [a, saved = std::move(saved)](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(saved));
  });
}

Var log(const Var& a) {
  return a.tape().record(log(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var square(const Var& a) {
  return a.tape().record(square(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var sum(const Var& a) {
  return a.tape().record(sum(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  return a.tape().record(mean(a.value()), {a}, [a](const Matrix& g, Tape& t) {
    const double n = static_cast<double>(a.value().size());
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var minimum(const Var& a, const Var& b) {
  return a.tape().record(minimum(a.value(), b.value()), {a, b}, [a, b](const Matrix& g, Tape& t) {
    const auto take_a = (a.value().array() <= b.value().array());
    if (t.requires_grad(a)) t.accumulate(a, take_a.select(g, 0.0).matrix());
    if (t.requires_grad(b)) t.accumulate(b, take_a.select(Matrix::Zero(g.rows(), g.cols()), g).matrix());
  });
}

Var clip(const Var& a, double lo, double hi) {
  return a.tape().record(clip(a.value(), lo, hi), {a}, [a, lo, hi](const Matrix& g, Tape& t) {
    const auto inside = (a.value().array() > lo) && (a.value().array() < hi);
    t.accumulate(a, inside.select(g, 0.0).matrix());
  });
}

Var masked_softmax(const Var& a, const Mask& mask) {
  Matrix p = masked_softmax(a.value(), mask);
  Matrix pc = p;
  return a.tape().record(std::move(p), {a}, [a, p = std::move(pc)](const Matrix& g, Tape& t) {
    const Eigen::VectorXd dot = p.cwiseProduct(g).rowwise().sum();
    t.accumulate(a, p.cwiseProduct(g - dot.replicate(1, g.cols())));
  });
}

Var masked_log_softmax(const Var& a, const Mask& mask) {
  const Matrix p = masked_softmax(a.value(), mask);
  return a.tape().record(masked_log_softmax(a.value(), mask), {a},
                         [a, p, mask](const Matrix& g, Tape& t) {
                           const Matrix gm = mask.select(g, 0.0);
                           const Eigen::VectorXd total = gm.rowwise().sum();
                           t.accumulate(a, gm - p.cwiseProduct(total.replicate(1, g.cols())));
                         });
}

Var segment_softmax(const Var& logits, std::span<const int> segment, Index n_segments) {
  Matrix p = segment_softmax(logits.value(), segment, n_segments);
  std::vector<int> seg(segment.begin(), segment.end());
  Matrix pc = p;
  return logits.tape().record(
      std::move(p), {logits},
      [logits, seg = std::move(seg), n_segments, p = std::move(pc)](const Matrix& g, Tape& t) {
        const Matrix pg = p.cwiseProduct(g);
        const Matrix totals = scatter_add_rows(pg, seg, n_segments);
        t.accumulate(logits, pg - p.cwiseProduct(gather_rows(totals, seg)));
      });
}

}  // namespace gridrl::ad
