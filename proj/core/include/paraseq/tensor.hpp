#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraseq {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
// Dense kernels (Eigen-backed, see kernels.cpp). C is row-major m x n.
template <class Real>
void mm_nn(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate);
template <class Real>
void mm_tn(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate);  // C = A^T(m,k from k,m) ... a is [k,m]
template <class Real>
void mm_nt(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate);  // b is [n,k]
}  // namespace detail

template <class Real>
struct TensorNode {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // lazily allocated
  bool needs_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
  }
};

template <class Real>
class Tensor;

/// Records backward closures for one forward pass. Constructing a Tape makes
/// it the active recorder on the current thread (previous one is restored on
/// destruction); independent tapes on different threads never interact.
template <class Real>
class Tape {
public:
  Tape() : prev_(active_ref()) { active_ref() = this; }
  ~Tape() { active_ref() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_ref(); }

  void push(std::function<void()> step) { steps_.push_back(std::move(step)); }
  std::size_t recorded() const { return steps_.size(); }

  /// Seeds d(loss)/d(loss)=1 and replays recorded steps in reverse, then
  /// clears the tape. Gradients accumulate into every needs_grad leaf.
  void backward(const Tensor<Real>& loss);

private:
  static Tape*& active_ref() {
    thread_local Tape* active = nullptr;
    return active;
  }
  Tape* prev_ = nullptr;
  std::vector<std::function<void()>> steps_;
};

template <class Real>
class Tensor {
public:
  using Node = TensorNode<Real>;

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from_data(std::move(shape), {}, Real(0));
  }
  static Tensor full(Shape shape, Real v) {
    return from_data(std::move(shape), {}, v);
  }
  static Tensor scalar(Real v) { return from_data({1}, std::vector<Real>{v}); }
  static Tensor from_data(Shape shape, std::vector<Real> data, Real fill = Real(0)) {
    auto n = std::make_shared<Node>();
    const std::size_t want = numel(shape);
    n->shape = std::move(shape);
    if (data.empty()) {
      n->value.assign(want, fill);
    } else {
      if (data.size() != want)
        throw ShapeError("from_data: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(n->shape));
      n->value = std::move(data);
    }
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }
  static Tensor eye(int n) {
    Tensor t = zeros({n, n});
    for (int i = 0; i < n; ++i) t.n_->value[static_cast<std::size_t>(i) * n + i] = Real(1);
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return n_->value.size(); }

  std::span<const Real> values() const { return n_->value; }
  /// Mutable access to raw storage; intended for parameter updates between
  /// recorded passes, never while a tape holding this node is still alive.
  std::span<Real> values_mut() { return n_->value; }

  bool needs_grad() const { return n_ && n_->needs_grad; }
  Tensor& set_requires_grad(bool b = true) {
    n_->needs_grad = b;
    if (b) n_->ensure_grad();
    return *this;
  }
  std::span<const Real> grad() const {
    n_->ensure_grad();
    return n_->grad;
  }
  void zero_grad() {
    n_->ensure_grad();
    std::fill(n_->grad.begin(), n_->grad.end(), Real(0));
  }

  Real item() const {
    if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
    return n_->value[0];
  }

  Real at(int r, int c) const { return n_->value[static_cast<std::size_t>(r) * dim(1) + c]; }

  std::shared_ptr<Node> node() const { return n_; }

private:
  std::shared_ptr<Node> n_;
};

template <class Real>
void Tape<Real>::backward(const Tensor<Real>& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward: loss has shape " + shape_str(loss.shape()) + ", expected a scalar");
  if (!loss.needs_grad())
    throw std::logic_error("backward: loss is not connected to any differentiable leaf on this tape");
  auto node = loss.node();
  node->ensure_grad();
  node->grad[0] += Real(1);
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

namespace detail {

template <class Real>
inline bool should_record(std::initializer_list<const Tensor<Real>*> ins) {
  if (Tape<Real>::active() == nullptr) return false;
  for (const auto* t : ins)
    if (t->needs_grad()) return true;
  return false;
}

template <class Real, class Fn>
inline void record(Tensor<Real>& out, std::initializer_list<const Tensor<Real>*> ins, Fn&& fn) {
  if (!should_record<Real>(ins)) return;
  out.set_requires_grad(true);
  Tape<Real>::active()->push(std::forward<Fn>(fn));
}

template <class Real>
inline void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

template <class Real>
inline void require_rank2(const Tensor<Real>& a, const char* op) {
  if (a.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(a.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<Real> v(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a, &b}, [an = a.node(), bn = b.node(), on = out.node()] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
    }
  });
  return out;
}

template <class Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<Real> v(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a, &b}, [an = a.node(), bn = b.node(), on = out.node()] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
    }
  });
  return out;
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<Real> v(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a, &b}, [an = a.node(), bn = b.node(), on = out.node()] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->value[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->value[i];
    }
  });
  return out;
}

template <class Real>
Tensor<Real> div(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_same_shape(a, b, "div");
  std::vector<Real> v(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] / bv[i];
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a, &b}, [an = a.node(), bn = b.node(), on = out.node()] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] / bn->value[i];
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        bn->grad[i] -= on->grad[i] * an->value[i] / (bn->value[i] * bn->value[i]);
    }
  });
  return out;
}

template <class Real>
Tensor<Real> scale(const Tensor<Real>& a, Real c) {
  std::vector<Real> v(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a}, [an = a.node(), on = out.node(), c] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c * on->grad[i];
  });
  return out;
}

template <class Real>
Tensor<Real> neg(const Tensor<Real>& a) {
  return scale(a, Real(-1));
}

namespace detail {
template <class Real, class F, class DF>
Tensor<Real> unary_elementwise(const Tensor<Real>& a, F f, DF df, const char* /*name*/) {
  std::vector<Real> v(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(av[i]);
  auto out = Tensor<Real>::from_data(a.shape(), std::move(v));
  detail::record<Real>(out, {&a}, [an = a.node(), on = out.node(), df] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i)
      an->grad[i] += on->grad[i] * df(an->value[i], on->value[i]);
  });
  return out;
}
}  // namespace detail

template <class Real>
Tensor<Real> relu(const Tensor<Real>& a) {
  return detail::unary_elementwise(
      a, [](Real x) { return x > Real(0) ? x : Real(0); },
      [](Real x, Real) { return x > Real(0) ? Real(1) : Real(0); }, "relu");
}

template <class Real>
Tensor<Real> tanh(const Tensor<Real>& a) {
  return detail::unary_elementwise(
      a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real(1) - y * y; },
      "tanh");
}

template <class Real>
Tensor<Real> sigmoid(const Tensor<Real>& a) {
  return detail::unary_elementwise(
      a, [](Real x) { return Real(1) / (Real(1) + std::exp(-x)); },
      [](Real, Real y) { return y * (Real(1) - y); }, "sigmoid");
}

template <class Real>
Tensor<Real> exp(const Tensor<Real>& a) {
  return detail::unary_elementwise(
      a, [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; }, "exp");
}

template <class Real>
Tensor<Real> log(const Tensor<Real>& a) {
  return detail::unary_elementwise(
      a, [](Real x) { return std::log(x); }, [](Real x, Real) { return Real(1) / x; }, "log");
}

// ---------------------------------------------------------------------------
// broadcast helpers (explicit, no general broadcasting machinery)

/// A[m,n] + v broadcast over rows; v may be shaped [n] or [1,n].
template <class Real>
Tensor<Real> add_rowwise(const Tensor<Real>& a, const Tensor<Real>& v) {
  detail::require_rank2(a, "add_rowwise");
  const int m = a.dim(0), n = a.dim(1);
  if (static_cast<int>(v.size()) != n)
    throw ShapeError("add_rowwise: matrix " + shape_str(a.shape()) + " vs vector " +
                     shape_str(v.shape()));
  std::vector<Real> out(a.size());
  auto av = a.values(), vv = v.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = av[static_cast<std::size_t>(i) * n + j] + vv[j];
  auto t = Tensor<Real>::from_data(a.shape(), std::move(out));
  detail::record<Real>(t, {&a, &v}, [an = a.node(), vn = v.node(), on = t.node(), m, n] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (vn->needs_grad) {
      vn->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) vn->grad[j] += on->grad[static_cast<std::size_t>(i) * n + j];
    }
  });
  return t;
}

/// A[m,n] + v broadcast over columns; v may be shaped [m] or [m,1].
template <class Real>
Tensor<Real> add_colwise(const Tensor<Real>& a, const Tensor<Real>& v) {
  detail::require_rank2(a, "add_colwise");
  const int m = a.dim(0), n = a.dim(1);
  if (static_cast<int>(v.size()) != m)
    throw ShapeError("add_colwise: matrix " + shape_str(a.shape()) + " vs vector " +
                     shape_str(v.shape()));
  std::vector<Real> out(a.size());
  auto av = a.values(), vv = v.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = av[static_cast<std::size_t>(i) * n + j] + vv[i];
  auto t = Tensor<Real>::from_data(a.shape(), std::move(out));
  detail::record<Real>(t, {&a, &v}, [an = a.node(), vn = v.node(), on = t.node(), m, n] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    }
    if (vn->needs_grad) {
      vn->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) vn->grad[i] += on->grad[static_cast<std::size_t>(i) * n + j];
    }
  });
  return t;
}

/// Row i of A scaled by s[i]; s shaped [m] or [m,1].
template <class Real>
Tensor<Real> rowscale(const Tensor<Real>& a, const Tensor<Real>& s) {
  detail::require_rank2(a, "rowscale");
  const int m = a.dim(0), n = a.dim(1);
  if (static_cast<int>(s.size()) != m)
    throw ShapeError("rowscale: matrix " + shape_str(a.shape()) + " vs scales " +
                     shape_str(s.shape()));
  std::vector<Real> out(a.size());
  auto av = a.values(), sv = s.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = av[static_cast<std::size_t>(i) * n + j] * sv[i];
  auto t = Tensor<Real>::from_data(a.shape(), std::move(out));
  detail::record<Real>(t, {&a, &s}, [an = a.node(), sn = s.node(), on = t.node(), m, n] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          an->grad[static_cast<std::size_t>(i) * n + j] += on->grad[static_cast<std::size_t>(i) * n + j] * sn->value[i];
    }
    if (sn->needs_grad) {
      sn->ensure_grad();
      for (int i = 0; i < m; ++i) {
        Real acc = 0;
        for (int j = 0; j < n; ++j)
          acc += on->grad[static_cast<std::size_t>(i) * n + j] * an->value[static_cast<std::size_t>(i) * n + j];
        sn->grad[i] += acc;
      }
    }
  });
  return t;
}

// ---------------------------------------------------------------------------
// linear algebra

template <class Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dims of " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not agree");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Real> out(static_cast<std::size_t>(m) * n);
  detail::mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n, false);
  auto t = Tensor<Real>::from_data({m, n}, std::move(out));
  detail::record<Real>(t, {&a, &b}, [an = a.node(), bn = b.node(), on = t.node(), m, k, n] {
    on->ensure_grad();
    if (an->needs_grad) {
      an->ensure_grad();
      // dA += dC * B^T
      detail::mm_nt(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k, true);
    }
    if (bn->needs_grad) {
      bn->ensure_grad();
      // dB += A^T * dC
      detail::mm_tn(an->value.data(), on->grad.data(), bn->grad.data(), k, m, n, true);
    }
  });
  return t;
}

template <class Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
  detail::require_rank2(a, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(a.size());
  auto av = a.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n + j];
  auto t = Tensor<Real>::from_data({n, m}, std::move(out));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node(), m, n] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        an->grad[static_cast<std::size_t>(i) * n + j] += on->grad[static_cast<std::size_t>(j) * m + i];
  });
  return t;
}

// ---------------------------------------------------------------------------
// structure ops

template <class Real>
Tensor<Real> concat(const Tensor<Real>& a, const Tensor<Real>& b, int axis) {
  detail::require_rank2(a, "concat");
  detail::require_rank2(b, "concat");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  const int keep = 1 - axis;
  if (a.dim(keep) != b.dim(keep))
    throw ShapeError("concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ on axis " + std::to_string(keep));
  Shape os = a.shape();
  os[static_cast<std::size_t>(axis)] += b.dim(axis);
  const int m = os[0], n = os[1];
  std::vector<Real> out(numel(os));
  auto av = a.values(), bv = b.values();
  const int an_cols = a.dim(1);
  if (axis == 0) {
    std::copy(av.begin(), av.end(), out.begin());
    std::copy(bv.begin(), bv.end(), out.begin() + static_cast<std::ptrdiff_t>(av.size()));
  } else {
    for (int i = 0; i < m; ++i) {
      std::copy(av.begin() + static_cast<std::ptrdiff_t>(i) * an_cols,
                av.begin() + static_cast<std::ptrdiff_t>(i + 1) * an_cols,
                out.begin() + static_cast<std::ptrdiff_t>(i) * n);
      std::copy(bv.begin() + static_cast<std::ptrdiff_t>(i) * b.dim(1),
                bv.begin() + static_cast<std::ptrdiff_t>(i + 1) * b.dim(1),
                out.begin() + static_cast<std::ptrdiff_t>(i) * n + an_cols);
    }
  }
  auto t = Tensor<Real>::from_data(os, std::move(out));
  detail::record<Real>(t, {&a, &b},
                       [an = a.node(), bn = b.node(), on = t.node(), axis, m, n, an_cols,
                        a_rows = a.dim(0)] {
    on->ensure_grad();
    if (axis == 0) {
      const std::size_t asz = an->value.size();
      if (an->needs_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < asz; ++i) an->grad[i] += on->grad[i];
      }
      if (bn->needs_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < bn->value.size(); ++i) bn->grad[i] += on->grad[asz + i];
      }
    } else {
      if (an->needs_grad) {
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < an_cols; ++j)
            an->grad[static_cast<std::size_t>(i) * an_cols + j] += on->grad[static_cast<std::size_t>(i) * n + j];
      }
      if (bn->needs_grad) {
        bn->ensure_grad();
        const int bcols = n - an_cols;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < bcols; ++j)
            bn->grad[static_cast<std::size_t>(i) * bcols + j] += on->grad[static_cast<std::size_t>(i) * n + an_cols + j];
      }
    }
    (void)a_rows;
  });
  return t;
}

template <class Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tensor<Real> acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = concat(acc, parts[i], axis);
  return acc;
}

template <class Real>
Tensor<Real> concat(std::initializer_list<Tensor<Real>> parts, int axis) {
  return concat(std::vector<Tensor<Real>>(parts), axis);
}

template <class Real>
Tensor<Real> slice(const Tensor<Real>& a, int axis, int start, int len) {
  detail::require_rank2(a, "slice");
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  if (start < 0 || len < 0 || start + len > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  Shape os = a.shape();
  os[static_cast<std::size_t>(axis)] = len;
  std::vector<Real> out(numel(os));
  auto av = a.values();
  if (axis == 0) {
    std::copy(av.begin() + static_cast<std::ptrdiff_t>(start) * n,
              av.begin() + static_cast<std::ptrdiff_t>(start + len) * n, out.begin());
  } else {
    for (int i = 0; i < m; ++i)
      std::copy(av.begin() + static_cast<std::ptrdiff_t>(i) * n + start,
                av.begin() + static_cast<std::ptrdiff_t>(i) * n + start + len,
                out.begin() + static_cast<std::ptrdiff_t>(i) * len);
  }
  auto t = Tensor<Real>::from_data(os, std::move(out));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node(), axis, start, len, m, n] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    if (axis == 0) {
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        an->grad[static_cast<std::size_t>(start) * n + i] += on->grad[i];
    } else {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j)
          an->grad[static_cast<std::size_t>(i) * n + start + j] += on->grad[static_cast<std::size_t>(i) * len + j];
    }
  });
  return t;
}

template <class Real>
Tensor<Real> reshape(const Tensor<Real>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  std::vector<Real> v(a.values().begin(), a.values().end());
  auto t = Tensor<Real>::from_data(std::move(shape), std::move(v));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node()] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
  });
  return t;
}

// ---------------------------------------------------------------------------
// reductions

template <class Real>
Tensor<Real> sum(const Tensor<Real>& a) {
  Real s = 0;
  for (Real x : a.values()) s += x;
  auto t = Tensor<Real>::scalar(s);
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node()] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
  });
  return t;
}

template <class Real>
Tensor<Real> mean(const Tensor<Real>& a) {
  return scale(sum(a), Real(1) / static_cast<Real>(a.size()));
}

/// Row sums of a matrix, shape [m,1].
template <class Real>
Tensor<Real> sum_rows(const Tensor<Real>& a) {
  detail::require_rank2(a, "sum_rows");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(static_cast<std::size_t>(m));
  auto av = a.values();
  for (int i = 0; i < m; ++i) {
    Real s = 0;
    for (int j = 0; j < n; ++j) s += av[static_cast<std::size_t>(i) * n + j];
    out[static_cast<std::size_t>(i)] = s;
  }
  auto t = Tensor<Real>::from_data({m, 1}, std::move(out));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node(), m, n] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) an->grad[static_cast<std::size_t>(i) * n + j] += on->grad[static_cast<std::size_t>(i)];
  });
  return t;
}

// ---------------------------------------------------------------------------
// softmax family

/// Row-stable softmax. Rank-1 input is treated as a single row; axis=0 on a
/// matrix runs over columns.
template <class Real>
Tensor<Real> softmax(const Tensor<Real>& a, int axis = -1) {
  if (a.rank() == 1) {
    auto r = softmax(reshape(a, {1, static_cast<int>(a.size())}), 1);
    return reshape(r, a.shape());
  }
  detail::require_rank2(a, "softmax");
  if (axis == -1) axis = 1;
  if (axis == 0) return transpose(softmax(transpose(a), 1));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(a.size());
  auto av = a.values();
  for (int i = 0; i < m; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * n;
    Real mx = av[off];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av[off + j]);
    Real denom = 0;
    for (int j = 0; j < n; ++j) {
      out[off + j] = std::exp(av[off + j] - mx);
      denom += out[off + j];
    }
    for (int j = 0; j < n; ++j) out[off + j] /= denom;
  }
  auto t = Tensor<Real>::from_data(a.shape(), std::move(out));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node(), m, n] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * n;
      Real dot = 0;
      for (int j = 0; j < n; ++j) dot += on->grad[off + j] * on->value[off + j];
      for (int j = 0; j < n; ++j)
        an->grad[off + j] += (on->grad[off + j] - dot) * on->value[off + j];
    }
  });
  return t;
}

/// log(sum(exp(row))) per row, shape [m,1]; computed with max subtraction.
template <class Real>
Tensor<Real> logsumexp_rows(const Tensor<Real>& a) {
  detail::require_rank2(a, "logsumexp_rows");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(static_cast<std::size_t>(m));
  auto av = a.values();
  for (int i = 0; i < m; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * n;
    Real mx = av[off];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av[off + j]);
    Real s = 0;
    for (int j = 0; j < n; ++j) s += std::exp(av[off + j] - mx);
    out[static_cast<std::size_t>(i)] = mx + std::log(s);
  }
  auto t = Tensor<Real>::from_data({m, 1}, std::move(out));
  detail::record<Real>(t, {&a}, [an = a.node(), on = t.node(), m, n] {
    if (!an->needs_grad) return;
    on->ensure_grad();
    an->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * n;
      const Real lse = on->value[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j)
        an->grad[off + j] += on->grad[static_cast<std::size_t>(i)] * std::exp(an->value[off + j] - lse);
    }
  });
  return t;
}

// ---------------------------------------------------------------------------
// embedding lookup

template <class Real>
Tensor<Real> gather_rows(const Tensor<Real>& table, const std::vector<int>& ids) {
  detail::require_rank2(table, "gather_rows");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::out_of_range("gather_rows: id " + std::to_string(id) + " outside [0," +
                              std::to_string(v) + ")");
  std::vector<Real> out(ids.size() * static_cast<std::size_t>(d));
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(tv.begin() + static_cast<std::ptrdiff_t>(ids[i]) * d,
              tv.begin() + static_cast<std::ptrdiff_t>(ids[i] + 1) * d,
              out.begin() + static_cast<std::ptrdiff_t>(i) * d);
  auto t = Tensor<Real>::from_data({static_cast<int>(ids.size()), d}, std::move(out));
  detail::record<Real>(t, {&table}, [tn = table.node(), on = t.node(), ids, d] {
    if (!tn->needs_grad) return;
    on->ensure_grad();
    tn->ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j)
        tn->grad[static_cast<std::size_t>(ids[i]) * d + j] += on->grad[i * static_cast<std::size_t>(d) + j];
  });
  return t;
}

// ---------------------------------------------------------------------------
// layer norm (per row)

template <class Real>
Tensor<Real> layer_norm_rows(const Tensor<Real>& x, const Tensor<Real>& gamma,
                             const Tensor<Real>& beta, Real eps = Real(1e-5)) {
  detail::require_rank2(x, "layer_norm_rows");
  const int m = x.dim(0), n = x.dim(1);
  if (static_cast<int>(gamma.size()) != n || static_cast<int>(beta.size()) != n)
    throw ShapeError("layer_norm_rows: gamma/beta " + shape_str(gamma.shape()) + "/" +
                     shape_str(beta.shape()) + " vs row width " + std::to_string(n));
  std::vector<Real> out(x.size());
  std::vector<Real> xhat(x.size());
  std::vector<Real> inv_sigma(static_cast<std::size_t>(m));
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (int i = 0; i < m; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * n;
    Real mu = 0;
    for (int j = 0; j < n; ++j) mu += xv[off + j];
    mu /= static_cast<Real>(n);
    Real var = 0;
    for (int j = 0; j < n; ++j) {
      const Real c = xv[off + j] - mu;
      var += c * c;
    }
    var /= static_cast<Real>(n);
    const Real is = Real(1) / std::sqrt(var + eps);
    inv_sigma[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      xhat[off + j] = (xv[off + j] - mu) * is;
      out[off + j] = xhat[off + j] * gv[j] + bv[j];
    }
  }
  auto t = Tensor<Real>::from_data(x.shape(), std::move(out));
  detail::record<Real>(t, {&x, &gamma, &beta},
                       [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = t.node(),
                        xhat = std::move(xhat), inv_sigma = std::move(inv_sigma), m, n] {
    on->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * n;
      if (gn->needs_grad) {
        gn->ensure_grad();
        for (int j = 0; j < n; ++j) gn->grad[j] += on->grad[off + j] * xhat[off + j];
      }
      if (bn->needs_grad) {
        bn->ensure_grad();
        for (int j = 0; j < n; ++j) bn->grad[j] += on->grad[off + j];
      }
      if (xn->needs_grad) {
        xn->ensure_grad();
        Real mean_g = 0, mean_gx = 0;
        std::vector<Real> g(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
          g[static_cast<std::size_t>(j)] = on->grad[off + j] * gn->value[j];
          mean_g += g[static_cast<std::size_t>(j)];
          mean_gx += g[static_cast<std::size_t>(j)] * xhat[off + j];
        }
        mean_g /= static_cast<Real>(n);
        mean_gx /= static_cast<Real>(n);
        const Real is = inv_sigma[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j)
          xn->grad[off + j] += is * (g[static_cast<std::size_t>(j)] - mean_g - xhat[off + j] * mean_gx);
      }
    }
  });
  return t;
}

// ---------------------------------------------------------------------------
// cross entropy

/// Mean negative log-softmax over non-ignored rows. `class_weights` (size C)
/// reweights rows by their gold class, normalized by the total active weight.
template <class Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<int>& targets,
                           const std::vector<Real>& class_weights = {},
                           const std::vector<bool>& ignore_mask = {}) {
  detail::require_rank2(logits, "cross_entropy");
  const int b = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(targets.size()) != b)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for batch " +
                     std::to_string(b));
  if (!class_weights.empty() && static_cast<int>(class_weights.size()) != c)
    throw ShapeError("cross_entropy: class_weights size " + std::to_string(class_weights.size()) +
                     " vs " + std::to_string(c) + " classes");
  if (!ignore_mask.empty() && static_cast<int>(ignore_mask.size()) != b)
    throw ShapeError("cross_entropy: ignore_mask size mismatch");
  for (int t : targets)
    if (t < 0 || t >= c)
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside [0," +
                              std::to_string(c) + ")");

  auto lv = logits.values();
  std::vector<Real> row_w(static_cast<std::size_t>(b), Real(0));
  Real total_w = 0;
  for (int i = 0; i < b; ++i) {
    if (!ignore_mask.empty() && ignore_mask[static_cast<std::size_t>(i)]) continue;
    const Real w = class_weights.empty() ? Real(1) : class_weights[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])];
    row_w[static_cast<std::size_t>(i)] = w;
    total_w += w;
  }
  if (total_w <= Real(0))
    throw std::invalid_argument("cross_entropy: every position is ignored");

  Real loss = 0;
  std::vector<Real> lse(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * c;
    Real mx = lv[off];
    for (int j = 1; j < c; ++j) mx = std::max(mx, lv[off + j]);
    Real s = 0;
    for (int j = 0; j < c; ++j) s += std::exp(lv[off + j] - mx);
    lse[static_cast<std::size_t>(i)] = mx + std::log(s);
    if (row_w[static_cast<std::size_t>(i)] > Real(0))
      loss += row_w[static_cast<std::size_t>(i)] *
              (lse[static_cast<std::size_t>(i)] - lv[off + static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])]);
  }
  loss /= total_w;

  auto t = Tensor<Real>::scalar(loss);
  detail::record<Real>(t, {&logits},
                       [ln = logits.node(), on = t.node(), targets, row_w = std::move(row_w),
                        lse = std::move(lse), total_w, b, c] {
    if (!ln->needs_grad) return;
    on->ensure_grad();
    ln->ensure_grad();
    const Real go = on->grad[0];
    for (int i = 0; i < b; ++i) {
      const Real w = row_w[static_cast<std::size_t>(i)];
      if (w <= Real(0)) continue;
      const std::size_t off = static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) {
        const Real p = std::exp(ln->value[off + j] - lse[static_cast<std::size_t>(i)]);
        const Real onehot = (j == targets[static_cast<std::size_t>(i)]) ? Real(1) : Real(0);
        ln->grad[off + j] += go * w / total_w * (p - onehot);
      }
    }
  });
  return t;
}

}  // namespace paraseq
