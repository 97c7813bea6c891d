#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "v6forge/tensor.hpp"

namespace v6forge::num {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the computation graph. Gradients are accumulated into
/// `grad` during the backward pass.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
  }
};

/// A named trainable tensor with gradient and optimizer slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m, adam_v;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape());
  }

  void zero_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    grad.fill(0.0);
  }
};

namespace detail {

inline Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || (p && p->requires_grad);
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
  }
  return n;
}

// Fixed-order scalar reductions. Vectorized reductions split their work by
// the runtime alignment of the data pointer, so two otherwise identical
// runs can accumulate in different orders; these always run left to right.
// std::exp is also relied on to underflow to exactly zero for the -1e30
// attention mask, which vectorized exp approximations do not guarantee.
inline double sum_n(const double* p, std::ptrdiff_t n) {
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) s += p[i];
  return s;
}

inline double max_n(const double* p, std::ptrdiff_t n) {
  double m = p[0];
  for (std::ptrdiff_t i = 1; i < n; ++i) m = std::max(m, p[i]);
  return m;
}

inline double dot_n(const double* a, const double* b, std::ptrdiff_t n) {
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm_n(const double* p, std::ptrdiff_t n) { return std::sqrt(dot_n(p, p, n)); }

/// dst (rank 1) += column sums of src's trailing-axis matrix view, rows in
/// ascending order.
inline void add_col_sums(Tensor& dst, const Tensor& src) {
  const std::ptrdiff_t cols = src.last();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(src.size()) / cols;
  double* d = dst.data();
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* s = src.data() + r * cols;
    for (std::ptrdiff_t c = 0; c < cols; ++c) d[c] += s[c];
  }
}

}  // namespace detail

/// Owns the leaf registry for one forward/backward round. Parameters are
/// registered once per graph; their leaf gradients flow back into
/// Parameter::grad via accumulate_param_grads.
class Graph {
 public:
  Var constant(Tensor value) { return detail::make_node(std::move(value), {}, {}); }

  Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
  }

  Var param(Parameter& p) {
    auto it = param_index_.find(&p);
    if (it != param_index_.end()) return params_[it->second].second;
    Var v = leaf(p.value, true);
    param_index_.emplace(&p, params_.size());
    params_.emplace_back(&p, v);
    return v;
  }

  /// Reverse-mode sweep from a scalar loss. Topological order, each node's
  /// rule fires exactly once.
  void backward(const Var& loss) {
    if (!loss) throw StateError("backward called without a recorded forward");
    if (backward_done_) throw StateError("backward already ran on this graph");
    if (loss->value.size() != 1)
      throw ShapeError("backward requires a scalar loss, have " + shape_text(loss->value.shape()));
    backward_done_ = true;
    if (!loss->requires_grad) return;

    // Iterative post-order over requires_grad nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* parent = node->parents[next].get();
        ++next;
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    loss->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
  }

  /// Adds each parameter leaf's gradient, scaled, into Parameter::grad.
  /// Registration order, so accumulation across shards is deterministic.
  void accumulate_param_grads(double scale = 1.0) {
    if (!backward_done_) throw StateError("accumulate_param_grads called before backward");
    for (auto& [p, v] : params_) {
      if (v->grad.size() != v->value.size()) continue;  // parameter unused in this graph
      if (p->grad.size() != p->value.size()) p->zero_grad();
      p->grad.add_scaled(v->grad, scale);
    }
  }

  bool backward_done() const { return backward_done_; }

 private:
  std::vector<std::pair<Parameter*, Var>> params_;
  std::unordered_map<const Parameter*, std::size_t> param_index_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Ops. Each validates shapes, computes the value eagerly, and records the
// backward rule. Gradients accumulate with +=.

/// A (.., k) x (k, n) product; leading axes of `a` collapse to rows.
inline Var matmul(const Var& a, const Var& b) {
  if (b->value.rank() != 2) throw ShapeError("matmul rhs must be rank 2");
  if (a->value.rank() < 1) throw ShapeError("matmul lhs must have rank >= 1");
  const int k = a->value.last();
  if (k != b->value.dim(0))
    throw ShapeError("matmul inner dims disagree: " + shape_text(a->value.shape()) + " x " +
                     shape_text(b->value.shape()));
  std::vector<int> out_shape = a->value.shape();
  out_shape.back() = b->value.dim(1);
  Tensor out(out_shape);
  out.mat().noalias() = a->value.mat() * b->value.mat();
  return detail::make_node(std::move(out), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) a->ensure_grad().mat().noalias() += self.grad.mat() * b->value.mat().transpose();
    if (b->requires_grad) b->ensure_grad().mat().noalias() += a->value.mat().transpose() * self.grad.mat();
  });
}

/// Batched (B, l, k) x (B, k, m) product.
inline Var bmm(const Var& a, const Var& b) {
  if (a->value.rank() != 3 || b->value.rank() != 3) throw ShapeError("bmm needs rank-3 operands");
  if (a->value.dim(0) != b->value.dim(0) || a->value.dim(2) != b->value.dim(1))
    throw ShapeError("bmm shapes disagree: " + shape_text(a->value.shape()) + " x " +
                     shape_text(b->value.shape()));
  const int B = a->value.dim(0);
  Tensor out({B, a->value.dim(1), b->value.dim(2)});
  for (int i = 0; i < B; ++i) out.slab(i).noalias() = a->value.slab(i) * b->value.slab(i);
  return detail::make_node(std::move(out), {a, b}, [B](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < B; ++i)
        a->grad.slab(i).noalias() += self.grad.slab(i) * b->value.slab(i).transpose();
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < B; ++i)
        b->grad.slab(i).noalias() += a->value.slab(i).transpose() * self.grad.slab(i);
    }
  });
}

/// Batched (B, l, k) x (B, m, k)^T product, i.e. scores against keys.
inline Var bmm_nt(const Var& a, const Var& b) {
  if (a->value.rank() != 3 || b->value.rank() != 3) throw ShapeError("bmm_nt needs rank-3 operands");
  if (a->value.dim(0) != b->value.dim(0) || a->value.dim(2) != b->value.dim(2))
    throw ShapeError("bmm_nt shapes disagree: " + shape_text(a->value.shape()) + " x " +
                     shape_text(b->value.shape()));
  const int B = a->value.dim(0);
  Tensor out({B, a->value.dim(1), b->value.dim(1)});
  for (int i = 0; i < B; ++i) out.slab(i).noalias() = a->value.slab(i) * b->value.slab(i).transpose();
  return detail::make_node(std::move(out), {a, b}, [B](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < B; ++i) a->grad.slab(i).noalias() += self.grad.slab(i) * b->value.slab(i);
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < B; ++i)
        b->grad.slab(i).noalias() += self.grad.slab(i).transpose() * a->value.slab(i);
    }
  });
}

inline Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("add of " + shape_text(a->value.shape()) + " and " + shape_text(b->value.shape()));
  Tensor out = a->value;
  out += b->value;
  return detail::make_node(std::move(out), {a, b}, [](Node& self) {
    for (const Var& p : self.parents) {
      if (p->requires_grad) p->ensure_grad() += self.grad;
    }
  });
}

/// Adds a rank-1 bias across the trailing axis.
inline Var add_bias(const Var& x, const Var& b) {
  if (b->value.rank() != 1 || b->value.dim(0) != x->value.last())
    throw ShapeError("bias shape " + shape_text(b->value.shape()) + " does not fit " +
                     shape_text(x->value.shape()));
  Tensor out = x->value;
  out.mat().rowwise() += b->value.mat().row(0);
  return detail::make_node(std::move(out), {x, b}, [](Node& self) {
    const Var& x = self.parents[0];
    const Var& b = self.parents[1];
    if (x->requires_grad) x->ensure_grad() += self.grad;
    if (b->requires_grad) detail::add_col_sums(b->ensure_grad(), self.grad);
  });
}

inline Var scale(const Var& x, double c) {
  Tensor out = x->value;
  out.scale_inplace(c);
  return detail::make_node(std::move(out), {x}, [c](Node& self) {
    const Var& x = self.parents[0];
    if (x->requires_grad) x->ensure_grad().add_scaled(self.grad, c);
  });
}

/// Adds a constant tensor; `c` either matches the full shape or matches the
/// trailing two axes of a rank-3 input (broadcast over the batch axis).
inline Var add_tensor(const Var& x, Tensor c) {
  const bool same = x->value.same_shape(c);
  const bool bcast = x->value.rank() == 3 && c.rank() == 2 && x->value.dim(1) == c.dim(0) &&
                     x->value.dim(2) == c.dim(1);
  if (!same && !bcast)
    throw ShapeError("add_tensor of " + shape_text(c.shape()) + " onto " + shape_text(x->value.shape()));
  Tensor out = x->value;
  if (same) {
    out += c;
  } else {
    for (int i = 0; i < out.dim(0); ++i) out.slab(i) += c.mat();
  }
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (x->requires_grad) x->ensure_grad() += self.grad;
  });
}

/// Elementwise product with a constant tensor of identical shape.
inline Var mul_tensor(const Var& x, Tensor m) {
  if (!x->value.same_shape(m))
    throw ShapeError("mul_tensor of " + shape_text(m.shape()) + " onto " + shape_text(x->value.shape()));
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
  return detail::make_node(std::move(out), {x}, [m = std::move(m)](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * m[i];
  });
}

inline Var mul(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value))
    throw ShapeError("mul of " + shape_text(a->value.shape()) + " and " + shape_text(b->value.shape()));
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return detail::make_node(std::move(out), {a, b}, [](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

/// Numerically stable softmax over the trailing axis. Entries 1e30 or more
/// below the row maximum underflow to exactly zero weight.
inline Var softmax_lastdim(const Var& x) {
  Tensor out = x->value;
  const std::ptrdiff_t cols = out.last();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(out.size()) / cols;
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double mx = detail::max_n(row, cols);
    double sum = 0.0;
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::ptrdiff_t c = 0; c < cols; ++c) row[c] /= sum;
  }
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    const std::ptrdiff_t cols = self.value.last();
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(self.value.size()) / cols;
    Tensor& gx = x->ensure_grad();
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double* p = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double* dst = gx.data() + r * cols;
      const double s = detail::dot_n(g, p, cols);
      for (std::ptrdiff_t c = 0; c < cols; ++c) dst[c] += p[c] * (g[c] - s);
    }
  });
}

inline Var log_softmax_lastdim(const Var& x) {
  Tensor out = x->value;
  const std::ptrdiff_t cols = out.last();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(out.size()) / cols;
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double mx = detail::max_n(row, cols);
    double sum = 0.0;
    for (std::ptrdiff_t c = 0; c < cols; ++c) sum += std::exp(row[c] - mx);
    const double lse = std::log(sum) + mx;
    for (std::ptrdiff_t c = 0; c < cols; ++c) row[c] -= lse;
  }
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    const std::ptrdiff_t cols = self.value.last();
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(self.value.size()) / cols;
    Tensor& gx = x->ensure_grad();
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double* l = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double* dst = gx.data() + r * cols;
      const double gs = detail::sum_n(g, cols);
      for (std::ptrdiff_t c = 0; c < cols; ++c) dst[c] += g[c] - std::exp(l[c]) * gs;
    }
  });
}

/// Row-wise normalization over the trailing axis with learned gain and bias.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  const int d = x->value.last();
  if (gain->value.rank() != 1 || gain->value.dim(0) != d || bias->value.rank() != 1 ||
      bias->value.dim(0) != d)
    throw ShapeError("layer_norm gain/bias must be rank-1 of size " + std::to_string(d));
  Tensor out = x->value;
  const std::ptrdiff_t cols = d;
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(out.size()) / cols;
  const double* gv = gain->value.data();
  const double* bv = bias->value.data();
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double mu = detail::sum_n(row, cols) / static_cast<double>(cols);
    double var = 0.0;
    for (std::ptrdiff_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::ptrdiff_t c = 0; c < cols; ++c) row[c] = (row[c] - mu) * inv * gv[c] + bv[c];
  }
  return detail::make_node(std::move(out), {x, gain, bias}, [eps](Node& self) {
    const Var& x = self.parents[0];
    const Var& gain = self.parents[1];
    const Var& bias = self.parents[2];
    const std::ptrdiff_t cols = x->value.last();
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(x->value.size()) / cols;
    const double* gv = gain->value.data();
    std::vector<double> xhat(static_cast<std::size_t>(cols)), gy(static_cast<std::size_t>(cols));
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double* xr = x->value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      const double mu = detail::sum_n(xr, cols) / static_cast<double>(cols);
      double var = 0.0;
      for (std::ptrdiff_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
      var /= static_cast<double>(cols);
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::ptrdiff_t c = 0; c < cols; ++c) {
        xhat[static_cast<std::size_t>(c)] = (xr[c] - mu) * inv;
        gy[static_cast<std::size_t>(c)] = g[c] * gv[c];
      }
      if (gain->requires_grad) {
        double* gg = gain->ensure_grad().data();
        for (std::ptrdiff_t c = 0; c < cols; ++c) gg[c] += g[c] * xhat[static_cast<std::size_t>(c)];
      }
      if (bias->requires_grad) {
        double* gb = bias->ensure_grad().data();
        for (std::ptrdiff_t c = 0; c < cols; ++c) gb[c] += g[c];
      }
      if (x->requires_grad) {
        const double mean_gy = detail::sum_n(gy.data(), cols) / static_cast<double>(cols);
        const double mean_gy_xhat =
            detail::dot_n(gy.data(), xhat.data(), cols) / static_cast<double>(cols);
        double* dst = x->ensure_grad().data() + r * cols;
        for (std::ptrdiff_t c = 0; c < cols; ++c)
          dst[c] += (gy[static_cast<std::size_t>(c)] - mean_gy -
                     xhat[static_cast<std::size_t>(c)] * mean_gy_xhat) *
                    inv;
      }
    }
  });
}

inline Var relu(const Var& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x->value[i] > 0.0) g[i] += self.grad[i];
  });
}

inline Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

/// Columns [start, start+len) of the trailing axis.
inline Var slice_lastdim(const Var& x, int start, int len) {
  const int d = x->value.last();
  if (start < 0 || len <= 0 || start + len > d)
    throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of range for trailing axis " + std::to_string(d));
  std::vector<int> shape = x->value.shape();
  shape.back() = len;
  Tensor out(shape);
  out.mat() = x->value.mat().middleCols(start, len);
  return detail::make_node(std::move(out), {x}, [start, len](Node& self) {
    const Var& x = self.parents[0];
    if (x->requires_grad) x->ensure_grad().mat().middleCols(start, len) += self.grad.mat();
  });
}

inline Var concat_lastdim(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_lastdim of zero tensors");
  std::vector<int> shape = parts[0]->value.shape();
  int total = 0;
  for (const auto& p : parts) {
    std::vector<int> s = p->value.shape();
    if (s.size() != shape.size()) throw ShapeError("concat_lastdim rank mismatch");
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      if (s[i] != shape[i]) throw ShapeError("concat_lastdim leading dims disagree");
    total += p->value.last();
  }
  shape.back() = total;
  Tensor out(shape);
  int col = 0;
  for (const auto& p : parts) {
    out.mat().middleCols(col, p->value.last()) = p->value.mat();
    col += p->value.last();
  }
  return detail::make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    int col = 0;
    for (const Var& p : self.parents) {
      const int w = p->value.last();
      if (p->requires_grad) p->ensure_grad().mat() += self.grad.mat().middleCols(col, w);
      col += w;
    }
  });
}

/// Concatenates two rank-3 tensors along axis 1 (sequence axis).
inline Var concat_axis1(const Var& a, const Var& b) {
  if (a->value.rank() != 3 || b->value.rank() != 3)
    throw ShapeError("concat_axis1 needs rank-3 operands");
  if (a->value.dim(0) != b->value.dim(0) || a->value.dim(2) != b->value.dim(2))
    throw ShapeError("concat_axis1 of " + shape_text(a->value.shape()) + " and " +
                     shape_text(b->value.shape()));
  const int B = a->value.dim(0);
  const int la = a->value.dim(1), lb = b->value.dim(1);
  Tensor out({B, la + lb, a->value.dim(2)});
  for (int i = 0; i < B; ++i) {
    out.slab(i).topRows(la) = a->value.slab(i);
    out.slab(i).bottomRows(lb) = b->value.slab(i);
  }
  return detail::make_node(std::move(out), {a, b}, [B, la, lb](Node& self) {
    const Var& a = self.parents[0];
    const Var& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < B; ++i) a->grad.slab(i) += self.grad.slab(i).topRows(la);
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < B; ++i) b->grad.slab(i) += self.grad.slab(i).bottomRows(lb);
    }
  });
}

/// Repeats a rank-1 vector as n rows.
inline Var tile_rows(const Var& v, int n) {
  if (v->value.rank() != 1) throw ShapeError("tile_rows needs a rank-1 input");
  if (n <= 0) throw ShapeError("tile_rows count must be positive");
  Tensor out({n, v->value.dim(0)});
  out.mat().rowwise() = v->value.mat().row(0);
  return detail::make_node(std::move(out), {v}, [](Node& self) {
    const Var& v = self.parents[0];
    if (v->requires_grad) detail::add_col_sums(v->ensure_grad(), self.grad);
  });
}

inline Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out(std::move(shape), std::vector<double>(x->value.values().begin(), x->value.values().end()));
  if (out.size() != x->value.size())
    throw ShapeError("reshape changes element count");
  return detail::make_node(std::move(out), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

/// Rows of an embedding table selected by id; duplicate ids accumulate.
inline Var gather_rows(const Var& table, std::vector<int> ids) {
  if (table->value.rank() != 2) throw ShapeError("gather_rows needs a rank-2 table");
  const int rows = table->value.dim(0);
  for (int id : ids)
    if (id < 0 || id >= rows) throw IndexError("gather id out of range: " + std::to_string(id));
  Tensor out({static_cast<int>(ids.size()), table->value.dim(1)});
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.mat().row(static_cast<int>(i)) = table->value.mat().row(ids[i]);
  return detail::make_node(std::move(out), {table}, [ids = std::move(ids)](Node& self) {
    const Var& table = self.parents[0];
    if (!table->requires_grad) return;
    auto g = table->ensure_grad().mat();
    for (std::size_t i = 0; i < ids.size(); ++i)
      g.row(ids[i]) += self.grad.mat().row(static_cast<int>(i));
  });
}

inline Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x->value.values()) s += v;
  return detail::make_node(Tensor::scalar(s), {x}, [](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    const double gs = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs;
  });
}

inline Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x->value.size())); }

/// Scalar sum of x weighted elementwise by a constant tensor.
inline Var weighted_sum(const Var& x, Tensor w) {
  if (!x->value.same_shape(w))
    throw ShapeError("weighted_sum weight shape " + shape_text(w.shape()) + " does not match " +
                     shape_text(x->value.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += x->value[i] * w[i];
  return detail::make_node(Tensor::scalar(s), {x}, [w = std::move(w)](Node& self) {
    const Var& x = self.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    const double gs = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs * w[i];
  });
}

/// Mean over rows of (1 - cosine(pred_row, target_row)). Rows are the
/// trailing-axis vectors. Throws NormError for a zero-norm target row; a
/// 1e-12 floor guards the denominator.
inline Var cosine_distance_mean(const Var& pred, Tensor target) {
  if (!pred->value.same_shape(target))
    throw ShapeError("cosine_distance_mean target shape " + shape_text(target.shape()) +
                     " does not match " + shape_text(pred->value.shape()));
  const std::ptrdiff_t cols = target.last();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(target.size()) / cols;
  double total = 0.0;
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double* pr = pred->value.data() + r * cols;
    const double* tr = target.data() + r * cols;
    const double nt = detail::norm_n(tr, cols);
    if (nt < 1e-12)
      throw NormError("target row " + std::to_string(r) + " has zero norm");
    const double np = std::max(detail::norm_n(pr, cols), 1e-12);
    total += 1.0 - detail::dot_n(pr, tr, cols) / (np * nt);
  }
  Tensor value = Tensor::scalar(total / static_cast<double>(rows));
  return detail::make_node(std::move(value), {pred}, [target = std::move(target), rows,
                                                      cols](Node& self) {
    const Var& pred = self.parents[0];
    if (!pred->requires_grad) return;
    Tensor& gx = pred->ensure_grad();
    const double gs = self.grad[0] / static_cast<double>(rows);
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double* pr = pred->value.data() + r * cols;
      const double* tr = target.data() + r * cols;
      double* dst = gx.data() + r * cols;
      const double nt = detail::norm_n(tr, cols);
      const double np = std::max(detail::norm_n(pr, cols), 1e-12);
      const double cos = detail::dot_n(pr, tr, cols) / (np * nt);
      // d(1-cos)/dp = -(t/(np*nt) - cos * p/np^2)
      for (std::ptrdiff_t c = 0; c < cols; ++c)
        dst[c] += gs * (cos / (np * np) * pr[c] - tr[c] / (np * nt));
    }
  });
}

/// Inverted dropout: keeps an element with probability 1-rate and scales it
/// by 1/(1-rate). Mask draws consume the engine in flat element order.
inline Var dropout(const Var& x, double rate, rng::Engine& eng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ParamError("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return x;
  Tensor mask(x->value.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = (rng::uniform01(eng) >= rate) ? keep_scale : 0.0;
  return mul_tensor(x, std::move(mask));
}

}  // namespace v6forge::num
