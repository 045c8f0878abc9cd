#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hanet/errors.hpp"

namespace hanet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
};

using NodePtr = std::shared_ptr<TensorNode>;

// Allocate-or-return the gradient buffer (zeros on first touch).
inline std::vector<double>& grad_buffer(const NodePtr& n) {
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  return n->grad;
}

}  // namespace detail

// Dense row-major tensor of doubles. A Tensor is a cheap handle sharing the
// underlying buffer; operations never write through their inputs, so shared
// values behave as immutable. mutable_values() exists for owners of leaf
// tensors (optimizer updates, finite-difference probes), not for operations.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0, requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    auto node = std::make_shared<detail::TensorNode>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& values() const { return node_->data; }
  std::vector<double>& mutable_values() { return node_->data; }

  double operator[](std::size_t flat) const { return node_->data[flat]; }
  double operator()(std::size_t i, std::size_t j) const {
    return node_->data[i * node_->shape[1] + j];
  }

  double scalar_value() const {
    if (numel() != 1)
      throw ContractError("scalar_value() on tensor of shape " +
                          shape_str(shape()));
    return node_->data[0];
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const {
    if (node_->grad.empty())
      throw ContractError("gradient not populated; run backward() first");
    return node_->grad;
  }
  std::vector<double>& ensure_grad() { return detail::grad_buffer(node_); }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  }

  detail::NodePtr node() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;
};

// Record-by-run tape. Operations append themselves in execution order, which
// is already a topological order of the dataflow, so backward() is a single
// reverse sweep with no sorting.
//
// backward(loss) zeroes the gradients of every tensor produced on this tape,
// seeds d(loss)=1 and replays all adjoints once. Leaf gradients (parameters,
// inputs) accumulate across calls: calling backward twice without zeroing
// leaf grads doubles them.
class Graph {
 public:
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  bool wants(std::initializer_list<const Tensor*> inputs) const {
    if (!recording_) return false;
    for (const Tensor* t : inputs)
      if (t->requires_grad()) return true;
    return false;
  }

  void record(const Tensor& output, std::function<void()> backward_fn) {
    steps_.push_back(Step{output.node(), std::move(backward_fn)});
  }

  std::size_t size() const { return steps_.size(); }

  void backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw ContractError("backward() requires a scalar loss, got shape " +
                          shape_str(loss.shape()));
    for (Step& s : steps_) s.out->grad.assign(s.out->data.size(), 0.0);
    detail::grad_buffer(loss.node())[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
  }

 private:
  struct Step {
    detail::NodePtr out;
    std::function<void()> fn;
  };
  std::vector<Step> steps_;
  bool recording_ = true;
};

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline bool out_requires(Graph& g, std::initializer_list<const Tensor*> in) {
  return g.wants(in);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a, &b}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), bn = b.node(), yn = y.node()] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
      }
    });
  }
  return y;
}

inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a, &b}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), bn = b.node(), yn = y.node()] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return y;
}

inline Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a, &b}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), bn = b.node(), yn = y.node()] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * an->data[i];
      }
    });
  }
  return y;
}

inline Tensor scale(Graph& g, const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a[i];
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node(), c] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * yn->grad[i];
    });
  }
  return y;
}

inline Tensor tanh(Graph& g, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node()] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double t = yn->data[i];
        ga[i] += (1.0 - t * t) * yn->grad[i];
      }
    });
  }
  return y;
}

inline Tensor sigmoid(Graph& g, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = a[i];
    // branch keeps exp() off large positive arguments
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node()] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double s = yn->data[i];
        ga[i] += s * (1.0 - s) * yn->grad[i];
      }
    });
  }
  return y;
}

inline Tensor exp(Graph& g, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
  Tensor y = Tensor::from(a.shape(), std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node()] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += yn->data[i] * yn->grad[i];
    });
  }
  return y;
}

// Bias broadcast over leading axes: x is [..., O], b is [O]. This is the only
// broadcasting form supported; everything else must match shapes exactly.
inline Tensor add_bias(Graph& g, const Tensor& x, const Tensor& b) {
  if (b.rank() != 1 || x.rank() == 0 ||
      x.shape().back() != b.extent(0))
    throw DimensionError("add_bias: shape mismatch " + shape_str(x.shape()) +
                         " vs bias " + shape_str(b.shape()));
  const std::size_t o = b.extent(0);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + b[i % o];
  Tensor y = Tensor::from(x.shape(), std::move(out), g.wants({&x, &b}));
  if (y.requires_grad()) {
    g.record(y, [xn = x.node(), bn = b.node(), yn = y.node(), o] {
      const auto& gy = yn->grad;
      if (xn->requires_grad) {
        auto& gx = detail::grad_buffer(xn);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % o] += gy[i];
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
    throw DimensionError("matmul: incompatible shapes " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double apv = av[i * k + p];
      if (apv == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += apv * brow[j];
    }
  Tensor y = Tensor::from({m, n}, std::move(out), g.wants({&a, &b}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), bn = b.node(), yn = y.node(), m, k, n] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = gy.data() + i * n;
            const double* brow = bn->data.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + p] += acc;
          }
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        // dB = A^T * G
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            double apv = an->data[i * k + p];
            if (apv == 0.0) continue;
            const double* grow = gy.data() + i * n;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += apv * grow[j];
          }
      }
    });
  }
  return y;
}

inline Tensor matvec(Graph& g, const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.extent(1) != x.extent(0))
    throw DimensionError("matvec: incompatible shapes " +
                         shape_str(a.shape()) + " x " + shape_str(x.shape()));
  const std::size_t m = a.extent(0), k = a.extent(1);
  std::vector<double> out(m, 0.0);
  const auto& av = a.values();
  const auto& xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* arow = av.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * xv[p];
    out[i] = acc;
  }
  Tensor y = Tensor::from({m}, std::move(out), g.wants({&a, &x}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), xn = x.node(), yn = y.node(), m, k] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        for (std::size_t i = 0; i < m; ++i) {
          double gi = gy[i];
          if (gi == 0.0) continue;
          double* garow = ga.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) garow[p] += gi * xn->data[p];
        }
      }
      if (xn->requires_grad) {
        auto& gx = detail::grad_buffer(xn);
        for (std::size_t i = 0; i < m; ++i) {
          double gi = gy[i];
          if (gi == 0.0) continue;
          const double* arow = an->data.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) gx[p] += gi * arow[p];
        }
      }
    });
  }
  return y;
}

inline Tensor transpose(Graph& g, const Tensor& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: expected rank-2, got " +
                         shape_str(a.shape()));
  const std::size_t m = a.extent(0), n = a.extent(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a(i, j);
  Tensor y = Tensor::from({n, m}, std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node(), m, n] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += yn->grad[j * m + i];
    });
  }
  return y;
}

inline Tensor reshape(Graph& g, const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  Tensor y = Tensor::from(std::move(shape), a.values(), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node()] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += yn->grad[i];
    });
  }
  return y;
}

inline Tensor concat(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw DimensionError("concat: expected rank-1 inputs, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  Tensor y = Tensor::from({a.numel() + b.numel()}, std::move(out),
                          g.wants({&a, &b}));
  if (y.requires_grad()) {
    const std::size_t na = a.numel();
    g.record(y, [an = a.node(), bn = b.node(), yn = y.node(), na] {
      const auto& gy = yn->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(an);
        for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(bn);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[na + i];
      }
    });
  }
  return y;
}

// Stack T rank-1 tensors of equal length D into a [T, D] matrix.
inline Tensor stack_rows(Graph& g, std::span<const Tensor> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t d = rows[0].numel();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool needs = false;
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.numel() != d)
      throw DimensionError("stack_rows: row shape " + shape_str(r.shape()) +
                           " does not match first row " +
                           shape_str(rows[0].shape()));
    out.insert(out.end(), r.values().begin(), r.values().end());
    needs = needs || r.requires_grad();
  }
  Tensor y = Tensor::from({rows.size(), d}, std::move(out),
                          g.recording() && needs);
  if (y.requires_grad()) {
    std::vector<detail::NodePtr> nodes;
    nodes.reserve(rows.size());
    for (const Tensor& r : rows) nodes.push_back(r.node());
    g.record(y, [nodes = std::move(nodes), yn = y.node(), d] {
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        if (!nodes[t]->requires_grad) continue;
        auto& gr = detail::grad_buffer(nodes[t]);
        const double* gy = yn->grad.data() + t * d;
        for (std::size_t i = 0; i < d; ++i) gr[i] += gy[i];
      }
    });
  }
  return y;
}

inline Tensor slice_row(Graph& g, const Tensor& a, std::size_t row) {
  if (a.rank() != 2)
    throw DimensionError("slice_row: expected rank-2, got " +
                         shape_str(a.shape()));
  if (row >= a.extent(0))
    throw DimensionError("slice_row: row " + std::to_string(row) +
                         " out of range for " + shape_str(a.shape()));
  const std::size_t d = a.extent(1);
  std::vector<double> out(a.values().begin() + row * d,
                          a.values().begin() + (row + 1) * d);
  Tensor y = Tensor::from({d}, std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node(), row, d] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t i = 0; i < d; ++i) ga[row * d + i] += yn->grad[i];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum(Graph& g, const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i];
  Tensor y = Tensor::scalar(acc, g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node()] {
      auto& ga = detail::grad_buffer(an);
      double gy = yn->grad[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy;
    });
  }
  return y;
}

namespace detail {

// Decompose shape around `axis` into (outer, extent, inner) so the reduction
// walks flat index outer*extent*inner.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw DimensionError("reduce: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

inline Shape reduced_shape(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace detail

inline Tensor sum(Graph& g, const Tensor& a, std::size_t axis) {
  auto v = detail::axis_view(a.shape(), axis);
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += a[(o * v.extent + e) * v.inner + i];
  Tensor y = Tensor::from(detail::reduced_shape(a.shape(), axis),
                          std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node(), v] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
          for (std::size_t i = 0; i < v.inner; ++i)
            ga[(o * v.extent + e) * v.inner + i] += yn->grad[o * v.inner + i];
    });
  }
  return y;
}

// Max along an axis. The backward pass routes the gradient to the first
// maximal element of each slice (ties break toward the lowest index), which
// keeps gradients deterministic.
inline Tensor max(Graph& g, const Tensor& a, std::size_t axis) {
  auto v = detail::axis_view(a.shape(), axis);
  std::vector<double> out(v.outer * v.inner);
  std::vector<std::size_t> arg(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      double best = a[(o * v.extent) * v.inner + i];
      std::size_t best_e = 0;
      for (std::size_t e = 1; e < v.extent; ++e) {
        double x = a[(o * v.extent + e) * v.inner + i];
        if (x > best) {
          best = x;
          best_e = e;
        }
      }
      out[o * v.inner + i] = best;
      arg[o * v.inner + i] = best_e;
    }
  Tensor y = Tensor::from(detail::reduced_shape(a.shape(), axis),
                          std::move(out), g.wants({&a}));
  if (y.requires_grad()) {
    g.record(y, [an = a.node(), yn = y.node(), v, arg = std::move(arg)] {
      auto& ga = detail::grad_buffer(an);
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
          std::size_t e = arg[o * v.inner + i];
          ga[(o * v.extent + e) * v.inner + i] += yn->grad[o * v.inner + i];
        }
    });
  }
  return y;
}

inline Tensor mean(Graph& g, const Tensor& a) {
  return scale(g, sum(g, a), 1.0 / static_cast<double>(a.numel()));
}

inline Tensor mean(Graph& g, const Tensor& a, std::size_t axis) {
  auto v = detail::axis_view(a.shape(), axis);
  return scale(g, sum(g, a, axis), 1.0 / static_cast<double>(v.extent));
}

}  // namespace hanet
