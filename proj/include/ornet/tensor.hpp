// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff tensor. Dense row-major f64 storage, NCHW layout for
// 4-D data. Operations record a tape (parent links + a backward closure);
// backward() runs the tape in reverse topological order and then frees it, so
// graph memory does not outlive the step. Gradients of leaves accumulate
// across backward calls until zero_grad().
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "ornet/common.hpp"

namespace ornet {

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Called with *this once the node's gradient is complete; accumulates into
  // the parents' gradients.
  std::function<void(TensorNode&)> backprop;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

// Thread-local switch: inside a NoGradGuard no tape is recorded, so pure
// inference does not pay for graph bookkeeping.
inline thread_local int no_grad_depth = 0;

}  // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return make(std::move(shape), 0.0, requires_grad);
  }

  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false) {
    return make(std::move(shape), v, requires_grad);
  }

  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false) {
    Tensor t = make(std::move(shape), 0.0, requires_grad);
    if (static_cast<std::int64_t>(data.size()) != t.numel())
      fail("from_data: ", data.size(), " values for shape ",
           detail::shape_str(t.shape()));
    t.node_->value = std::move(data);
    return t;
  }

  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false) {
    Tensor t = make(std::move(shape), 0.0, requires_grad);
    for (double& v : t.node_->value) v = rng.normal(0.0, stddev);
    return t;
  }

  bool defined() const { return node_ != nullptr; }

  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return node_->numel(); }

  const std::vector<double>& values() const { return node_->value; }

  // Direct value access is reserved for leaves (parameter updates, data
  // buffers); rewriting an interior node would desynchronize the tape.
  std::vector<double>& mutable_values() {
    require(node_->leaf, "mutable_values: only leaf tensors may be mutated");
    return node_->value;
  }

  double scalar() const {
    require(numel() == 1, "scalar: tensor is not a single element");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  const std::vector<double>& grad() const {
    require(!node_->grad.empty(), "grad: no gradient present (run backward first)");
    return node_->grad;
  }

  void zero_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }

  // NCHW flat offset.
  static std::int64_t offset(const std::vector<int>& s, int n, int c, int y, int x) {
    return ((static_cast<std::int64_t>(n) * s[1] + c) * s[2] + y) * s[3] + x;
  }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

 private:
  static Tensor make(std::vector<int> shape, double fill, bool requires_grad) {
    for (int d : shape)
      require(d > 0, "tensor dimensions must be positive");
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(n->numel()), fill);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

// Builds an op result node. The tape (parent links + closure) is recorded
// only when grad mode is on and some input is tracked; otherwise the result
// is a plain constant.
inline Tensor make_op(std::vector<int> shape, std::vector<double> value,
                      const std::vector<Tensor>& inputs,
                      std::function<void(TensorNode&)> backprop) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool tracked = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) tracked = tracked || t.requires_grad();
  }
  if (tracked) {
    n->requires_grad = true;
    n->leaf = false;
    n->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) n->parents.push_back(t.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------
inline void backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1,
          "backward: loss must be a defined scalar");
  auto root = loss.node();
  if (root->leaf && !root->requires_grad)
    fail("backward: loss does not depend on any tracked tensor");
  if (!root->leaf && !root->backprop)
    fail("backward: tape already consumed; rebuild the graph before calling again");

  // Topological order over parent edges (iterative DFS, post-order). The
  // order holds shared_ptrs: processing clears each node's parents (dropping
  // what may be the last owning reference of an interior node), so a raw
  // pointer here would dangle before its own turn came.
  std::vector<std::shared_ptr<detail::TensorNode>> order;
  std::unordered_set<detail::TensorNode*> seen;
  struct Frame {
    std::shared_ptr<detail::TensorNode> node;
    size_t next_parent;
  };
  std::vector<Frame> stack{{root, 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      std::shared_ptr<detail::TensorNode> p = f.node->parents[f.next_parent++];
      if (seen.insert(p.get()).second) stack.push_back({std::move(p), 0});
    } else {
      order.push_back(std::move(f.node));
      stack.pop_back();
    }
  }
  // Post-order lists ancestors before their consumers; reverse so every node
  // is processed only after all nodes that feed gradient into it.
  std::reverse(order.begin(), order.end());

  root->ensure_grad();
  root->grad[0] += 1.0;

  for (const auto& node : order) {
    if (!node->backprop) continue;
    if (node->grad.empty()) continue;  // no gradient reached this node
    node->backprop(*node);
    // Free the tape as we go; interior gradient buffers die with it.
    node->backprop = nullptr;
    node->parents.clear();
    if (!node->leaf) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

// ---------------------------------------------------------------------------
// Broadcast machinery.
//
// Binary ops accept b with the same shape as a, or a restricted broadcast:
// b of equal rank with some dimensions equal to 1, or a rank-1 (C) vector
// against 4-D (N,C,H,W). Gradients reduce-sum over broadcast dimensions.
// ---------------------------------------------------------------------------
namespace detail {

struct Broadcast {
  std::vector<int> bshape;            // b's shape at a's rank
  std::vector<std::int64_t> bstride;  // stride 0 on broadcast dims
  bool identical = false;
};

inline Broadcast broadcast_plan(const std::vector<int>& a, const std::vector<int>& b) {
  Broadcast plan;
  plan.identical = (a == b);
  if (plan.identical) {
    plan.bshape = b;
  } else if (b.size() == 1 && a.size() == 4) {
    if (b[0] != a[1])
      fail("broadcast: vector of length ", b[0], " against ", shape_str(a));
    plan.bshape = {1, b[0], 1, 1};
  } else if (b.size() == a.size()) {
    for (size_t i = 0; i < a.size(); ++i)
      if (b[i] != a[i] && b[i] != 1)
        fail("broadcast: shape ", shape_str(b), " against ", shape_str(a));
    plan.bshape = b;
  } else {
    fail("broadcast: shape ", shape_str(b), " against ", shape_str(a));
  }
  plan.bstride.assign(plan.bshape.size(), 0);
  std::int64_t s = 1;
  for (int i = static_cast<int>(plan.bshape.size()) - 1; i >= 0; --i) {
    size_t ui = static_cast<size_t>(i);
    plan.bstride[ui] = (plan.bshape[ui] == 1) ? 0 : s;
    s *= plan.bshape[ui];
  }
  return plan;
}

// Calls fn(ai, bi) over a's index space; bi follows the broadcast plan.
template <typename Fn>
void broadcast_walk(const std::vector<int>& ashape, const Broadcast& plan, Fn&& fn) {
  std::int64_t n = 1;
  for (int d : ashape) n *= d;
  if (plan.identical) {
    for (std::int64_t i = 0; i < n; ++i) fn(i, i);
    return;
  }
  const size_t rank = ashape.size();
  std::vector<int> idx(rank, 0);
  std::int64_t bi = 0;
  for (std::int64_t ai = 0; ai < n; ++ai) {
    fn(ai, bi);
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {  // odometer
      size_t ud = static_cast<size_t>(d);
      ++idx[ud];
      bi += plan.bstride[ud];
      if (idx[ud] < ashape[ud]) break;
      bi -= plan.bstride[ud] * ashape[ud];
      idx[ud] = 0;
    }
  }
}

enum class BinOp { kAdd, kSub, kMul };

inline Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op) {
  require(a.defined() && b.defined(), "binary op on undefined tensor");
  Broadcast plan = broadcast_plan(a.shape(), b.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  broadcast_walk(a.shape(), plan, [&](std::int64_t i, std::int64_t j) {
    const size_t ui = static_cast<size_t>(i), uj = static_cast<size_t>(j);
    switch (op) {
      case BinOp::kAdd: out[ui] = av[ui] + bv[uj]; break;
      case BinOp::kSub: out[ui] = av[ui] - bv[uj]; break;
      case BinOp::kMul: out[ui] = av[ui] * bv[uj]; break;
    }
  });

  auto an = a.node();
  auto bn = b.node();
  std::vector<int> ashape = a.shape();
  return make_op(
      a.shape(), std::move(out), {a, b},
      [an, bn, ashape, plan, op](TensorNode& self) {
        const std::vector<double>& g = self.grad;
        if (an->requires_grad) {
          an->ensure_grad();
          double* ga = an->grad.data();
          const double* bvp = bn->value.data();
          switch (op) {
            case BinOp::kAdd:
            case BinOp::kSub:
              for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
              break;
            case BinOp::kMul:
              broadcast_walk(ashape, plan, [&](std::int64_t i, std::int64_t j) {
                ga[i] += g[static_cast<size_t>(i)] * bvp[j];
              });
              break;
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          double* gb = bn->grad.data();
          const double* avp = an->value.data();
          switch (op) {
            case BinOp::kAdd:
              broadcast_walk(ashape, plan, [&](std::int64_t i, std::int64_t j) {
                gb[j] += g[static_cast<size_t>(i)];
              });
              break;
            case BinOp::kSub:
              broadcast_walk(ashape, plan, [&](std::int64_t i, std::int64_t j) {
                gb[j] -= g[static_cast<size_t>(i)];
              });
              break;
            case BinOp::kMul:
              broadcast_walk(ashape, plan, [&](std::int64_t i, std::int64_t j) {
                gb[j] += g[static_cast<size_t>(i)] * avp[i];
              });
              break;
          }
        }
      });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary_op(a, b, detail::BinOp::kAdd); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary_op(a, b, detail::BinOp::kSub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary_op(a, b, detail::BinOp::kMul); }

// c * a for a plain constant c.
inline Tensor scale(const Tensor& a, double c) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = c * av[i];
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a},
                         [an, c](detail::TensorNode& self) {
                           an->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             an->grad[i] += c * self.grad[i];
                         });
}

inline Tensor relu(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a},
                         [an](detail::TensorNode& self) {
                           an->ensure_grad();
                           // subgradient 0 at exactly 0
                           for (size_t i = 0; i < self.grad.size(); ++i)
                             if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
                         });
}

inline Tensor sigmoid(const Tensor& a) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    double x = av[i];
    // Branch on sign so exp never overflows.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a},
                         [an](detail::TensorNode& self) {
                           an->ensure_grad();
                           for (size_t i = 0; i < self.grad.size(); ++i) {
                             double s = self.value[i];
                             an->grad[i] += self.grad[i] * s * (1.0 - s);
                           }
                         });
}

// ---------------------------------------------------------------------------
// Channel concat / slice on (N,C,H,W). Per batch element the channel block is
// contiguous, so both are block copies.
// ---------------------------------------------------------------------------
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels: empty input list");
  for (const Tensor& t : parts)
    require(t.defined() && t.ndim() == 4, "concat_channels: inputs must be 4-D");
  const int n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int ctotal = 0;
  for (const Tensor& t : parts) {
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w)
      fail("concat_channels: mismatched shapes ",
           detail::shape_str(parts[0].shape()), " vs ",
           detail::shape_str(t.shape()));
    ctotal += t.dim(1);
  }
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<double> out(static_cast<size_t>(n) * ctotal * plane);
  for (int bi = 0; bi < n; ++bi) {
    std::int64_t dst = static_cast<std::int64_t>(bi) * ctotal * plane;
    for (const Tensor& t : parts) {
      const std::int64_t block = static_cast<std::int64_t>(t.dim(1)) * plane;
      std::copy_n(t.values().data() + bi * block, block, out.data() + dst);
      dst += block;
    }
  }

  std::vector<std::shared_ptr<detail::TensorNode>> nodes;
  std::vector<int> cdims;
  for (const Tensor& t : parts) {
    nodes.push_back(t.node());
    cdims.push_back(t.dim(1));
  }
  return detail::make_op(
      {n, ctotal, h, w}, std::move(out), parts,
      [nodes, cdims, n, plane, ctotal](detail::TensorNode& self) {
        for (int bi = 0; bi < n; ++bi) {
          std::int64_t src = static_cast<std::int64_t>(bi) * ctotal * plane;
          for (size_t k = 0; k < nodes.size(); ++k) {
            const std::int64_t block = static_cast<std::int64_t>(cdims[k]) * plane;
            if (nodes[k]->requires_grad) {
              nodes[k]->ensure_grad();
              double* g = nodes[k]->grad.data() + bi * block;
              const double* s = self.grad.data() + src;
              for (std::int64_t i = 0; i < block; ++i) g[i] += s[i];
            }
            src += block;
          }
        }
      });
}

// Channels [c0, c1) of a 4-D tensor.
inline Tensor slice_channels(const Tensor& a, int c0, int c1) {
  require(a.defined() && a.ndim() == 4, "slice_channels: input must be 4-D");
  require(0 <= c0 && c0 < c1 && c1 <= a.dim(1), "slice_channels: bad channel range");
  const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const int cs = c1 - c0;
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<double> out(static_cast<size_t>(n) * cs * plane);
  for (int bi = 0; bi < n; ++bi)
    std::copy_n(a.values().data() + (static_cast<std::int64_t>(bi) * c + c0) * plane,
                cs * plane, out.data() + static_cast<std::int64_t>(bi) * cs * plane);
  auto an = a.node();
  return detail::make_op(
      {n, cs, h, w}, std::move(out), {a},
      [an, n, c, c0, cs, plane](detail::TensorNode& self) {
        an->ensure_grad();
        for (int bi = 0; bi < n; ++bi) {
          double* g = an->grad.data() + (static_cast<std::int64_t>(bi) * c + c0) * plane;
          const double* s = self.grad.data() + static_cast<std::int64_t>(bi) * cs * plane;
          for (std::int64_t i = 0; i < cs * plane; ++i) g[i] += s[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations.
// ---------------------------------------------------------------------------

// (N,C,H,W) -> (N,C,1,1), mean over the spatial plane.
inline Tensor global_avg_pool(const Tensor& a) {
  require(a.defined() && a.ndim() == 4, "global_avg_pool: input must be 4-D");
  const int n = a.dim(0), c = a.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(a.dim(2)) * a.dim(3);
  std::vector<double> out(static_cast<size_t>(n) * c);
  const double* src = a.values().data();
  for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
    double s = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) s += src[nc * plane + i];
    out[static_cast<size_t>(nc)] = s / static_cast<double>(plane);
  }
  auto an = a.node();
  return detail::make_op(
      {n, c, 1, 1}, std::move(out), {a},
      [an, n, c, plane](detail::TensorNode& self) {
        an->ensure_grad();
        const double inv = 1.0 / static_cast<double>(plane);
        for (std::int64_t nc = 0; nc < static_cast<std::int64_t>(n) * c; ++nc) {
          const double g = self.grad[static_cast<size_t>(nc)] * inv;
          double* dst = an->grad.data() + nc * plane;
          for (std::int64_t i = 0; i < plane; ++i) dst[i] += g;
        }
      });
}

// Softmax over the channel axis of (N,C,H,W), independently per (n,h,w).
// Max-subtraction keeps exp in range for any logits.
inline Tensor softmax_channels(const Tensor& a) {
  require(a.defined() && a.ndim() == 4, "softmax_channels: input must be 4-D");
  const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<double> out(a.values().size());
  const double* src = a.values().data();
  for (int bi = 0; bi < n; ++bi) {
    const std::int64_t base = static_cast<std::int64_t>(bi) * c * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      double mx = src[base + p];
      for (int k = 1; k < c; ++k) mx = std::max(mx, src[base + k * plane + p]);
      double denom = 0.0;
      for (int k = 0; k < c; ++k) {
        double e = std::exp(src[base + k * plane + p] - mx);
        out[static_cast<size_t>(base + k * plane + p)] = e;
        denom += e;
      }
      for (int k = 0; k < c; ++k)
        out[static_cast<size_t>(base + k * plane + p)] /= denom;
    }
  }
  auto an = a.node();
  return detail::make_op(
      a.shape(), std::move(out), {a},
      [an, n, c, plane](detail::TensorNode& self) {
        an->ensure_grad();
        const double* y = self.value.data();
        const double* g = self.grad.data();
        for (int bi = 0; bi < n; ++bi) {
          const std::int64_t base = static_cast<std::int64_t>(bi) * c * plane;
          for (std::int64_t p = 0; p < plane; ++p) {
            double dot = 0.0;
            for (int k = 0; k < c; ++k)
              dot += g[base + k * plane + p] * y[base + k * plane + p];
            for (int k = 0; k < c; ++k) {
              const std::int64_t i = base + k * plane + p;
              an->grad[static_cast<size_t>(i)] += y[i] * (g[i] - dot);
            }
          }
        }
      });
}

inline Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto an = a.node();
  return detail::make_op({1}, {s}, {a},
                         [an](detail::TensorNode& self) {
                           an->ensure_grad();
                           const double g = self.grad[0];
                           for (double& v : an->grad) v += g;
                         });
}

inline Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  auto an = a.node();
  return detail::make_op({1}, {s * inv}, {a},
                         [an, inv](detail::TensorNode& self) {
                           an->ensure_grad();
                           const double g = self.grad[0] * inv;
                           for (double& v : an->grad) v += g;
                         });
}

// Mean absolute error as one fused op; sign(0) := 0.
inline Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), "l1_loss: undefined input");
  if (a.shape() != b.shape())
    fail("l1_loss: shape mismatch ", detail::shape_str(a.shape()), " vs ",
         detail::shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const double inv = 1.0 / static_cast<double>(a.numel());
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op(
      {1}, {s * inv}, {a, b},
      [an, bn, inv](detail::TensorNode& self) {
        const double g = self.grad[0] * inv;
        const double* ap = an->value.data();
        const double* bp = bn->value.data();
        const size_t nn = an->value.size();
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < nn; ++i) {
            double d = ap[i] - bp[i];
            if (d > 0.0) an->grad[i] += g;
            else if (d < 0.0) an->grad[i] -= g;
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < nn; ++i) {
            double d = ap[i] - bp[i];
            if (d > 0.0) bn->grad[i] -= g;
            else if (d < 0.0) bn->grad[i] += g;
          }
        }
      });
}

}  // namespace ornet
