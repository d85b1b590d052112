#pragma once

// Reverse-mode automatic differentiation over a dynamic tape.
//
// Every node holds a dense row-major matrix; scalars are 1×1 matrices.
// Elementwise binary ops broadcast a dimension of size 1 against the other
// operand (NumPy rules restricted to two dimensions). The tape is rebuilt
// for every optimization step, so graph shape may depend on sampled data.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "evdeblur/errors.hpp"
#include "evdeblur/lie_generic.hpp"

namespace evdeblur::ad {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
class Tape;

template <typename S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, int id) : tape_(tape), id_(id) {}

  Tape<S>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<S>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  S scalar() const { return value()(0, 0); }

 private:
  Tape<S>* tape_ = nullptr;
  int id_ = -1;
};

template <typename S>
class Tape {
 public:
  using Mat = Matrix<S>;
  using Backprop = std::function<void(Tape&, const Mat&)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is requested.
  Var<S> variable(Mat value) { return push(std::move(value), true, {}); }
  Var<S> variable(S value) { return variable(Mat::Constant(1, 1, value)); }
  Var<S> constant(Mat value) { return push(std::move(value), false, {}); }
  Var<S> constant(S value) { return constant(Mat::Constant(1, 1, value)); }

  /// Records an op result. The backprop closure is dropped when no input
  /// needs a gradient.
  Var<S> record(Mat value, std::initializer_list<Var<S>> inputs, Backprop backprop) {
    bool needs = false;
    for (const Var<S>& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backprop) : Backprop{});
  }
  Var<S> record(Mat value, std::span<const Var<S>> inputs, Backprop backprop) {
    bool needs = false;
    for (const Var<S>& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backprop) : Backprop{});
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar output. Each node is visited once.
  void backward(const Var<S>& output) {
    const Mat& out = value(output.id());
    if (out.rows() != 1 || out.cols() != 1) {
      throw NonScalarOutput("backward needs a 1x1 output, got " + std::to_string(out.rows()) + "x" +
                            std::to_string(out.cols()));
    }
    grads_.assign(nodes_.size(), Mat());
    grads_[output.id()] = Mat::Ones(1, 1);
    for (int id = output.id(); id >= 0; --id) {
      if (grads_[id].size() == 0 || !nodes_[id].backprop) continue;
      nodes_[id].backprop(*this, grads_[id]);
    }
  }

  /// Gradient of the last backward output; zeros for unreached nodes.
  Mat grad(const Var<S>& v) const {
    if (v.id() < static_cast<int>(grads_.size()) && grads_[v.id()].size() != 0) return grads_[v.id()];
    const Mat& val = value(v.id());
    return Mat::Zero(val.rows(), val.cols());
  }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    if (!nodes_[id].requires_grad) return;
    Mat& dst = grads_[id];
    if (dst.size() == 0) {
      dst = g;
    } else {
      dst += g;
    }
  }

 private:
  struct Node {
    Mat value;
    bool requires_grad = false;
    Backprop backprop;
  };

  Var<S> push(Mat value, bool requires_grad, Backprop backprop) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(backprop)});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
};

template <typename S>
S value_of(const Var<S>& v) {
  return v.scalar();
}

namespace detail {

inline Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeMismatch(std::string(op) + ": cannot broadcast " + std::to_string(a) + " against " +
                      std::to_string(b));
}

template <typename S>
Matrix<S> expand(const Matrix<S>& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to the operand's shape.
template <typename S>
Matrix<S> reduce_to(const Matrix<S>& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix<S>::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <typename S>
Tape<S>* tape_of(const Var<S>& a, const Var<S>& b) {
  return a.tape() ? a.tape() : b.tape();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops with broadcasting.

template <typename S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto r = detail::broadcast_dim(av.rows(), bv.rows(), "add");
  const auto c = detail::broadcast_dim(av.cols(), bv.cols(), "add");
  Matrix<S> out;
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    out = av + bv;
  } else if (bv.rows() == 1 && bv.cols() == c && av.rows() == r) {
    out = av.rowwise() + bv.row(0);
  } else {
    out = detail::expand(av, r, c) + detail::expand(bv, r, c);
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (t.requires_grad(ia)) t.accumulate(ia, detail::reduce_to(g, A.rows(), A.cols()));
    if (t.requires_grad(ib)) t.accumulate(ib, detail::reduce_to(g, B.rows(), B.cols()));
  });
}

template <typename S>
Var<S> operator-(const Var<S>& a) {
  const int ia = a.id();
  return a.tape()->record(-a.value(), {a}, [ia](Tape<S>& t, const Matrix<S>& g) { t.accumulate(ia, -g); });
}

template <typename S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) {
  return a + (-b);
}

template <typename S>
Var<S> operator*(const Var<S>& a, const Var<S>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto r = detail::broadcast_dim(av.rows(), bv.rows(), "mul");
  const auto c = detail::broadcast_dim(av.cols(), bv.cols(), "mul");
  Matrix<S> out;
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    out = av.cwiseProduct(bv);
  } else {
    out = detail::expand(av, r, c).cwiseProduct(detail::expand(bv, r, c));
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, r, c](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (t.requires_grad(ia)) {
      t.accumulate(ia, detail::reduce_to<S>(g.cwiseProduct(detail::expand(B, r, c)), A.rows(), A.cols()));
    }
    if (t.requires_grad(ib)) {
      t.accumulate(ib, detail::reduce_to<S>(g.cwiseProduct(detail::expand(A, r, c)), B.rows(), B.cols()));
    }
  });
}

template <typename S>
Var<S> operator/(const Var<S>& a, const Var<S>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto r = detail::broadcast_dim(av.rows(), bv.rows(), "div");
  const auto c = detail::broadcast_dim(av.cols(), bv.cols(), "div");
  Matrix<S> out = detail::expand(av, r, c).cwiseQuotient(detail::expand(bv, r, c));
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, r, c](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    const Matrix<S> Be = detail::expand(B, r, c);
    if (t.requires_grad(ia)) {
      t.accumulate(ia, detail::reduce_to<S>(g.cwiseQuotient(Be), A.rows(), A.cols()));
    }
    if (t.requires_grad(ib)) {
      const Matrix<S> Ae = detail::expand(A, r, c);
      Matrix<S> gb = -(g.array() * Ae.array() / (Be.array() * Be.array())).matrix();
      t.accumulate(ib, detail::reduce_to<S>(gb, B.rows(), B.cols()));
    }
  });
}

// Constant operands. Plain doubles are accepted for both precisions so the
// generic Lie code can mix literals with variables.

template <typename S>
Var<S> operator+(const Var<S>& a, double k) {
  const int ia = a.id();
  Matrix<S> out = (a.value().array() + static_cast<S>(k)).matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<S>& t, const Matrix<S>& g) { t.accumulate(ia, g); });
}
template <typename S>
Var<S> operator+(double k, const Var<S>& a) {
  return a + k;
}
template <typename S>
Var<S> operator-(const Var<S>& a, double k) {
  return a + (-k);
}
template <typename S>
Var<S> operator-(double k, const Var<S>& a) {
  return (-a) + k;
}

template <typename S>
Var<S> operator*(const Var<S>& a, double k) {
  const int ia = a.id();
  const S ks = static_cast<S>(k);
  return a.tape()->record(a.value() * ks, {a}, [ia, ks](Tape<S>& t, const Matrix<S>& g) { t.accumulate(ia, g * ks); });
}
template <typename S>
Var<S> operator*(double k, const Var<S>& a) {
  return a * k;
}
template <typename S>
Var<S> operator/(const Var<S>& a, double k) {
  return a * (1.0 / k);
}
template <typename S>
Var<S> operator/(double k, const Var<S>& a) {
  const int ia = a.id();
  const S ks = static_cast<S>(k);
  Matrix<S> out = (ks / a.value().array()).matrix();
  return a.tape()->record(std::move(out), {a}, [ia, ks](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    t.accumulate(ia, (-ks * g.array() / (A.array() * A.array())).matrix());
  });
}

/// Elementwise product with a constant matrix (broadcast allowed).
template <typename S>
Var<S> mul_const(const Var<S>& a, const Matrix<S>& k) {
  return a * a.tape()->constant(k);
}

// ---------------------------------------------------------------------------
// Unary elementwise ops.

namespace detail {

// f computes the value; df(x, y) the local derivative given input and output.
template <typename S, typename F, typename DF>
Var<S> unary(const Var<S>& a, F f, DF df) {
  Matrix<S> out = a.value().unaryExpr(f);
  const int ia = a.id();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [ia, io, df](Tape<S>& t, const Matrix<S>& g) {
    const auto& x = t.value(ia);
    const auto& y = t.value(io);
    t.accumulate(ia, g.cwiseProduct(x.binaryExpr(y, df)));
  });
}

template <typename S>
S softplus_value(S x) {
  return x > S(20) ? x : std::log1p(std::exp(x));
}

template <typename S>
S sigmoid_value(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

template <typename S>
Var<S> sin(const Var<S>& a) {
  return detail::unary(a, [](S x) { return std::sin(x); }, [](S x, S) { return std::cos(x); });
}
template <typename S>
Var<S> cos(const Var<S>& a) {
  return detail::unary(a, [](S x) { return std::cos(x); }, [](S x, S) { return -std::sin(x); });
}
template <typename S>
Var<S> exp(const Var<S>& a) {
  return detail::unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}
template <typename S>
Var<S> log(const Var<S>& a) {
  return detail::unary(a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}
/// log(x + eps) as its own primitive, so the guard is part of the derivative.
template <typename S>
Var<S> log_guarded(const Var<S>& a, double eps) {
  const S e = static_cast<S>(eps);
  return detail::unary(a, [e](S x) { return std::log(x + e); }, [e](S x, S) { return S(1) / (x + e); });
}
template <typename S>
Var<S> sqrt(const Var<S>& a) {
  return detail::unary(a, [](S x) { return std::sqrt(x); }, [](S, S y) { return S(0.5) / y; });
}
template <typename S>
Var<S> square(const Var<S>& a) {
  return detail::unary(a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}
template <typename S>
Var<S> softplus(const Var<S>& a) {
  return detail::unary(a, [](S x) { return detail::softplus_value(x); },
                       [](S x, S) { return detail::sigmoid_value(x); });
}
template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  return detail::unary(a, [](S x) { return detail::sigmoid_value(x); }, [](S, S y) { return y * (S(1) - y); });
}
template <typename S>
Var<S> relu(const Var<S>& a) {
  return detail::unary(a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

/// Elementwise atan2(y, x); shapes must match.
template <typename S>
Var<S> atan2(const Var<S>& y, const Var<S>& x) {
  const auto& yv = y.value();
  const auto& xv = x.value();
  if (yv.rows() != xv.rows() || yv.cols() != xv.cols()) throw ShapeMismatch("atan2 operands differ in shape");
  Matrix<S> out = yv.binaryExpr(xv, [](S a, S b) { return std::atan2(a, b); });
  const int iy = y.id(), ix = x.id();
  return y.tape()->record(std::move(out), {y, x}, [iy, ix](Tape<S>& t, const Matrix<S>& g) {
    const auto& Y = t.value(iy);
    const auto& X = t.value(ix);
    const Matrix<S> denom = (X.array() * X.array() + Y.array() * Y.array()).matrix();
    if (t.requires_grad(iy)) t.accumulate(iy, (g.array() * X.array() / denom.array()).matrix());
    if (t.requires_grad(ix)) t.accumulate(ix, (-g.array() * Y.array() / denom.array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions.

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) + " times " +
                        std::to_string(bv.rows()) + "x" + std::to_string(bv.cols()));
  }
  Matrix<S> out = av * bv;
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<S>& t, const Matrix<S>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  const int ia = a.id();
  return a.tape()->record(Matrix<S>::Constant(1, 1, a.value().sum()), {a}, [ia](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    t.accumulate(ia, Matrix<S>::Constant(A.rows(), A.cols(), g(0, 0)));
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  return sum(a) * (1.0 / static_cast<double>(a.value().size()));
}

/// Euclidean norm over all entries.
template <typename S>
Var<S> norm(const Var<S>& a) {
  const int ia = a.id();
  const int io = static_cast<int>(a.tape()->size());
  return a.tape()->record(Matrix<S>::Constant(1, 1, a.value().norm()), {a}, [ia, io](Tape<S>& t, const Matrix<S>& g) {
    const S n = t.value(io)(0, 0);
    t.accumulate(ia, t.value(ia) * (g(0, 0) / n));
  });
}

/// Per-row sum: r×c → r×1.
template <typename S>
Var<S> row_sum(const Var<S>& a) {
  const int ia = a.id();
  Matrix<S> out = a.value().rowwise().sum();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(ia, g.replicate(1, t.value(ia).cols()));
  });
}

// ---------------------------------------------------------------------------
// Structural ops.

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeMismatch("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  Tape<S>* tape = parts.front().tape();
  return tape->record(std::move(out), std::span<const Var<S>>(parts), [ids, offsets](Tape<S>& t, const Matrix<S>& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) t.accumulate(ids[k], g.middleCols(offsets[k], t.value(ids[k]).cols()));
    }
  });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeMismatch("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  Tape<S>* tape = parts.front().tape();
  return tape->record(std::move(out), std::span<const Var<S>>(parts), [ids, offsets](Tape<S>& t, const Matrix<S>& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) t.accumulate(ids[k], g.middleRows(offsets[k], t.value(ids[k]).rows()));
    }
  });
}

template <typename S>
Var<S> slice_rows(const Var<S>& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || begin + count > a.rows()) throw ShapeMismatch("slice_rows out of range");
  const int ia = a.id();
  Matrix<S> out = a.value().middleRows(begin, count);
  return a.tape()->record(std::move(out), {a}, [ia, begin, count](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    Matrix<S> full = Matrix<S>::Zero(A.rows(), A.cols());
    full.middleRows(begin, count) = g;
    t.accumulate(ia, full);
  });
}

/// Repeats every row k times consecutively: r×c → (r·k)×c.
template <typename S>
Var<S> repeat_rows(const Var<S>& a, Eigen::Index k) {
  const auto& av = a.value();
  Matrix<S> out(av.rows() * k, av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) out.middleRows(i * k, k) = av.row(i).replicate(k, 1);
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, k](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    Matrix<S> acc(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) acc.row(i) = g.middleRows(i * k, k).colwise().sum();
    t.accumulate(ia, acc);
  });
}

template <typename S>
Var<S> element(const Var<S>& a, Eigen::Index r, Eigen::Index c) {
  const int ia = a.id();
  return a.tape()->record(Matrix<S>::Constant(1, 1, a.value()(r, c)), {a}, [ia, r, c](Tape<S>& t, const Matrix<S>& g) {
    const auto& A = t.value(ia);
    Matrix<S> full = Matrix<S>::Zero(A.rows(), A.cols());
    full(r, c) = g(0, 0);
    t.accumulate(ia, full);
  });
}

/// Assembles 1×1 variables into a rows×cols matrix (row-major order).
template <typename S>
Var<S> stack(const std::vector<Var<S>>& scalars, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(scalars.size()) != rows * cols) throw ShapeMismatch("stack: wrong element count");
  Matrix<S> out(rows, cols);
  std::vector<int> ids;
  ids.reserve(scalars.size());
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    out(k / cols, k % cols) = scalars[k].scalar();
    ids.push_back(scalars[k].id());
  }
  Tape<S>* tape = scalars.front().tape();
  return tape->record(std::move(out), std::span<const Var<S>>(scalars), [ids, cols](Tape<S>& t, const Matrix<S>& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], Matrix<S>::Constant(1, 1, g(k / cols, k % cols)));
    }
  });
}

/// Column vector split into consecutive segments of length seg; returns for
/// every entry the sum of the entries before it within its segment.
template <typename S>
Var<S> segment_exclusive_cumsum(const Var<S>& a, Eigen::Index seg) {
  const auto& av = a.value();
  if (av.cols() != 1 || av.rows() % seg != 0) throw ShapeMismatch("segment_exclusive_cumsum expects (n*seg)x1");
  Matrix<S> out(av.rows(), 1);
  for (Eigen::Index s0 = 0; s0 < av.rows(); s0 += seg) {
    S run = S(0);
    for (Eigen::Index i = 0; i < seg; ++i) {
      out(s0 + i, 0) = run;
      run += av(s0 + i, 0);
    }
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, seg](Tape<S>& t, const Matrix<S>& g) {
    Matrix<S> acc(g.rows(), 1);
    for (Eigen::Index s0 = 0; s0 < g.rows(); s0 += seg) {
      S run = S(0);
      for (Eigen::Index i = seg - 1; i >= 0; --i) {
        acc(s0 + i, 0) = run;
        run += g(s0 + i, 0);
      }
    }
    t.accumulate(ia, acc);
  });
}

/// Sums consecutive row segments of length seg: (n·seg)×c → n×c.
template <typename S>
Var<S> segment_sum(const Var<S>& a, Eigen::Index seg) {
  const auto& av = a.value();
  if (av.rows() % seg != 0) throw ShapeMismatch("segment_sum: rows not divisible by segment length");
  const Eigen::Index n = av.rows() / seg;
  Matrix<S> out(n, av.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = av.middleRows(i * seg, seg).colwise().sum();
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, seg](Tape<S>& t, const Matrix<S>& g) {
    Matrix<S> acc(g.rows() * seg, g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) acc.middleRows(i * seg, seg) = g.row(i).replicate(seg, 1);
    t.accumulate(ia, acc);
  });
}

/// Sums `blocks` equal-height row blocks: (blocks·r)×c → r×c.
template <typename S>
Var<S> sum_row_blocks(const Var<S>& a, Eigen::Index blocks) {
  const auto& av = a.value();
  if (av.rows() % blocks != 0) throw ShapeMismatch("sum_row_blocks: rows not divisible by block count");
  const Eigen::Index r = av.rows() / blocks;
  Matrix<S> out = av.topRows(r);
  for (Eigen::Index b = 1; b < blocks; ++b) out += av.middleRows(b * r, r);
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, blocks](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(ia, g.replicate(blocks, 1));
  });
}

}  // namespace evdeblur::ad

namespace evdeblur::lie {
template <>
struct SmallAngle<ad::Var<float>> {
  static constexpr double threshold = SmallAngle<float>::threshold;
  static constexpr double series = SmallAngle<float>::series;
};
template <>
struct SmallAngle<ad::Var<double>> {
  static constexpr double threshold = SmallAngle<double>::threshold;
  static constexpr double series = SmallAngle<double>::series;
};
}  // namespace evdeblur::lie
