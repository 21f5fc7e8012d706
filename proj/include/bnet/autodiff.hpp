#pragma once

// Minimal reverse-mode differentiation over dense vectors and row-major
// matrices. The operator set is exactly what the bundle network emits.
//
// A Tape owns its nodes; a Value is a (tape, index) handle. Parents always
// precede children, so reverse index order is a topological order.
// Parameters are non-owning views whose gradients accumulate straight into
// caller-provided sinks.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bnet/common.hpp"

namespace bnet::ad {

class Tape;

class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  inline std::size_t size() const;
  inline std::size_t rows() const;
  inline std::size_t cols() const;
  inline std::span<const double> data() const;
  inline double item() const;
  inline bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable leaf (oracle outputs, features, noise).
  Value constant(Vec data) {
    const std::size_t n = data.size();
    return constant(std::move(data), n, 1);
  }
  Value constant(Vec data, std::size_t rows, std::size_t cols) {
    require(data.size() == rows * cols, "constant: shape does not match data");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own = std::move(data);
    return push(std::move(n));
  }
  Value scalar(double v) { return constant(Vec{v}); }

  /// Differentiable leaf owning its gradient (used for test inputs).
  Value variable(Vec data) {
    Node n;
    n.rows = data.size();
    n.cols = 1;
    n.own = std::move(data);
    n.requires_grad = true;
    return push(std::move(n));
  }

  /// View over external parameter storage. An empty sink makes it constant.
  Value parameter(std::span<const double> data, std::span<double> grad_sink, std::size_t rows,
                  std::size_t cols) {
    require(data.size() == rows * cols, "parameter: shape does not match data");
    require(grad_sink.empty() || grad_sink.size() == data.size(),
            "parameter: gradient sink size mismatch");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.view = data.data();
    n.grad_sink = grad_sink.empty() ? nullptr : grad_sink.data();
    n.requires_grad = !grad_sink.empty();
    return push(std::move(n));
  }

  /// Records an op output. The backward rule is kept only when some parent
  /// needs a gradient.
  Value record(Vec data, std::size_t rows, std::size_t cols, std::initializer_list<Value> parents,
               Backward backward) {
    bool needs = false;
    for (const Value& p : parents) needs = needs || p.requires_grad();
    return record_if(std::move(data), rows, cols, needs, std::move(backward));
  }
  Value record_if(Vec data, std::size_t rows, std::size_t cols, bool needs, Backward backward) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own = std::move(data);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    return push(std::move(n));
  }

  std::size_t size() const { return nodes_.size(); }

  std::span<const double> data(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.view) return {n.view, n.rows * n.cols};
    return n.own;
  }
  std::size_t rows(std::size_t id) const { return nodes_[id].rows; }
  std::size_t cols(std::size_t id) const { return nodes_[id].cols; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, allocated on first use. Empty span for
  /// nodes that do not require gradients.
  std::span<double> grad_mut(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return {};
    const std::size_t len = n.rows * n.cols;
    if (n.grad_sink) return {n.grad_sink, len};
    if (n.grad.empty()) n.grad.assign(len, 0.0);
    return n.grad;
  }

  /// Gradient accumulated at a node (empty if none flowed there).
  std::span<const double> grad(Value v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad_sink) return {n.grad_sink, n.rows * n.cols};
    return n.grad;
  }

  /// Reverse sweep from a scalar root; each node is visited once.
  void backward(Value root) {
    require(root.valid() && &root.tape() == this, "backward: root belongs to another tape");
    require(nodes_[root.id()].rows * nodes_[root.id()].cols == 1, "backward: root must be scalar");
    if (!nodes_[root.id()].requires_grad) return;
    grad_mut(root.id())[0] += 1.0;
    for (std::size_t id = root.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this);
    }
  }

 private:
  struct Node {
    std::size_t rows = 0, cols = 1;
    Vec own;
    const double* view = nullptr;
    Vec grad;
    double* grad_sink = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline std::size_t Value::size() const { return tape_->rows(id_) * tape_->cols(id_); }
inline std::size_t Value::rows() const { return tape_->rows(id_); }
inline std::size_t Value::cols() const { return tape_->cols(id_); }
inline std::span<const double> Value::data() const { return tape_->data(id_); }
inline double Value::item() const {
  require(size() == 1, "item: value is not a scalar");
  return data()[0];
}
inline bool Value::requires_grad() const { return tape_->requires_grad(id_); }

// ---------------------------------------------------------------------------
// Primitive operations

namespace detail {

inline void same_size(Value a, Value b, const char* op) {
  require(a.size() == b.size(), std::string(op) + ": shape mismatch");
  require(&a.tape() == &b.tape(), std::string(op) + ": values live on different tapes");
}

// Accumulate `scale * src` into the gradient of node `id` (no-op for constants).
inline void accumulate(Tape& t, std::size_t id, std::span<const double> src, double scale = 1.0) {
  auto g = t.grad_mut(id);
  if (g.empty()) return;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * src[i];
}

template <class F, class DF>
Value unary(Value a, F f, DF df) {
  auto x = a.data();
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  Tape& t = a.tape();
  const std::size_t iy = t.size();
  return t.record(std::move(y), a.rows(), a.cols(), {a}, [ia, iy, df](Tape& tp) {
    auto go = tp.grad_mut(iy);
    auto ga = tp.grad_mut(ia);
    auto xs = tp.data(ia);
    auto ys = tp.data(iy);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * df(xs[i], ys[i]);
  });
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vec softmax_values(std::span<const double> z, double sign) {
  require(!z.empty(), "softmax: empty input");
  double mx = sign * z[0];
  for (double v : z) mx = std::max(mx, sign * v);
  Vec y(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += (y[i] = std::exp(sign * z[i] - mx));
  for (double& v : y) v /= total;
  return y;
}

inline Value softmax_signed(Value a, double sign) {
  Vec y = softmax_values(a.data(), sign);
  const std::size_t ia = a.id();
  Tape& t = a.tape();
  const std::size_t iy = t.size();
  return t.record(std::move(y), a.rows(), a.cols(), {a}, [ia, iy, sign](Tape& tp) {
    auto go = tp.grad_mut(iy);
    auto ys = tp.data(iy);
    double inner = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) inner += go[i] * ys[i];
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += sign * ys[i] * (go[i] - inner);
  });
}

}  // namespace detail

inline Value add(Value a, Value b) {
  detail::same_size(a, b, "add");
  auto x = a.data(), y = b.data();
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  Tape& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.record(std::move(out), a.rows(), a.cols(), {a, b}, [ia, ib, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    detail::accumulate(tp, ia, go);
    detail::accumulate(tp, ib, go);
  });
}

inline Value sub(Value a, Value b) {
  detail::same_size(a, b, "sub");
  auto x = a.data(), y = b.data();
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  Tape& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.record(std::move(out), a.rows(), a.cols(), {a, b}, [ia, ib, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    detail::accumulate(tp, ia, go);
    detail::accumulate(tp, ib, go, -1.0);
  });
}

/// c * a for a fixed real c.
inline Value scale(Value a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

/// s * a for a differentiable scalar s.
inline Value scale(Value s, Value a) {
  require(s.size() == 1, "scale: factor must be a scalar");
  require(&s.tape() == &a.tape(), "scale: values live on different tapes");
  const double k = s.item();
  auto x = a.data();
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  Tape& t = a.tape();
  const std::size_t is = s.id(), ia = a.id(), io = t.size();
  return t.record(std::move(out), a.rows(), a.cols(), {s, a}, [is, ia, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    auto gs = tp.grad_mut(is);
    if (!gs.empty()) {
      auto xs = tp.data(ia);
      double acc = 0.0;
      for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * xs[i];
      gs[0] += acc;
    }
    detail::accumulate(tp, ia, go, tp.data(is)[0]);
  });
}

/// Elementwise product.
inline Value mul(Value a, Value b) {
  detail::same_size(a, b, "mul");
  auto x = a.data(), y = b.data();
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  Tape& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.record(std::move(out), a.rows(), a.cols(), {a, b}, [ia, ib, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    auto xa = tp.data(ia), xb = tp.data(ib);
    if (auto ga = tp.grad_mut(ia); !ga.empty())
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * xb[i];
    if (auto gb = tp.grad_mut(ib); !gb.empty())
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * xa[i];
  });
}

inline Value dot(Value a, Value b) {
  detail::same_size(a, b, "dot");
  const double v = bnet::dot(a.data(), b.data());
  Tape& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id(), io = t.size();
  return t.record(Vec{v}, 1, 1, {a, b}, [ia, ib, io](Tape& tp) {
    const double go = tp.grad_mut(io)[0];
    detail::accumulate(tp, ia, tp.data(ib), go);
    detail::accumulate(tp, ib, tp.data(ia), go);
  });
}

/// W x for a row-major (rows x cols) matrix W.
inline Value matvec(Value w, Value x) {
  require(w.cols() == x.size(), "matvec: shape mismatch");
  require(&w.tape() == &x.tape(), "matvec: values live on different tapes");
  const std::size_t r = w.rows(), c = w.cols();
  auto W = w.data();
  auto X = x.data();
  Vec out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = W.data() + i * c;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += row[j] * X[j];
    out[i] = s;
  }
  Tape& t = w.tape();
  const std::size_t iw = w.id(), ix = x.id(), io = t.size();
  return t.record(std::move(out), r, 1, {w, x}, [iw, ix, io, r, c](Tape& tp) {
    auto go = tp.grad_mut(io);
    auto Wd = tp.data(iw);
    auto Xd = tp.data(ix);
    if (auto gw = tp.grad_mut(iw); !gw.empty())
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = go[i];
        if (gi == 0.0) continue;
        double* row = gw.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += gi * Xd[j];
      }
    if (auto gx = tp.grad_mut(ix); !gx.empty())
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = go[i];
        if (gi == 0.0) continue;
        const double* row = Wd.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) gx[j] += gi * row[j];
      }
  });
}

inline Value concat(const std::vector<Value>& parts) {
  require(!parts.empty(), "concat: no inputs");
  Tape& t = parts.front().tape();
  Vec out;
  bool needs = false;
  std::vector<std::size_t> ids, sizes;
  for (const Value& p : parts) {
    require(&p.tape() == &t, "concat: values live on different tapes");
    auto d = p.data();
    out.insert(out.end(), d.begin(), d.end());
    needs = needs || p.requires_grad();
    ids.push_back(p.id());
    sizes.push_back(p.size());
  }
  const std::size_t io = t.size();
  const std::size_t n = out.size();
  return t.record_if(std::move(out), n, 1, needs, [ids, sizes, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      detail::accumulate(tp, ids[k], go.subspan(off, sizes[k]));
      off += sizes[k];
    }
  });
}

inline Value slice(Value a, std::size_t offset, std::size_t length) {
  require(offset + length <= a.size(), "slice: range out of bounds");
  auto x = a.data();
  Vec out(x.begin() + static_cast<std::ptrdiff_t>(offset),
          x.begin() + static_cast<std::ptrdiff_t>(offset + length));
  Tape& t = a.tape();
  const std::size_t ia = a.id(), io = t.size();
  return t.record(std::move(out), length, 1, {a}, [ia, io, offset](Tape& tp) {
    auto go = tp.grad_mut(io);
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[offset + i] += go[i];
  });
}

/// Same data viewed as a (rows x cols) row-major matrix.
inline Value reshape(Value a, std::size_t rows, std::size_t cols) {
  require(rows * cols == a.size(), "reshape: size mismatch");
  auto x = a.data();
  Tape& t = a.tape();
  const std::size_t ia = a.id(), io = t.size();
  return t.record(Vec(x.begin(), x.end()), rows, cols, {a}, [ia, io](Tape& tp) {
    detail::accumulate(tp, ia, tp.grad_mut(io));
  });
}

inline Value sum(Value a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tape& t = a.tape();
  const std::size_t ia = a.id(), io = t.size();
  return t.record(Vec{s}, 1, 1, {a}, [ia, io](Tape& tp) {
    const double go = tp.grad_mut(io)[0];
    for (double& g : tp.grad_mut(ia)) g += go;
  });
}

/// Squared Euclidean norm.
inline Value norm2(Value a) {
  const double s = squared_norm(a.data());
  Tape& t = a.tape();
  const std::size_t ia = a.id(), io = t.size();
  return t.record(Vec{s}, 1, 1, {a}, [ia, io](Tape& tp) {
    const double go = tp.grad_mut(io)[0];
    detail::accumulate(tp, ia, tp.data(ia), 2.0 * go);
  });
}

inline Value sigmoid(Value a) {
  return detail::unary(a, detail::sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Value tanh(Value a) {
  return detail::unary(a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Value relu(Value a) {
  return detail::unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Value softplus(Value a) {
  return detail::unary(a, detail::softplus, [](double x, double) { return detail::sigmoid(x); });
}

inline Value exp(Value a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Value softmax(Value a) { return detail::softmax_signed(a, 1.0); }

/// softmax(-a): smooth argmin weights.
inline Value softmin(Value a) { return detail::softmax_signed(a, -1.0); }

/// Euclidean projection onto the simplex. Backward on the support S:
/// grad_in = 1_S * (grad_out - mean_S(grad_out)).
inline Value sparsemax(Value a) {
  require(a.size() > 0, "sparsemax: empty input");
  Vec y = project_to_simplex(a.data());
  Tape& t = a.tape();
  const std::size_t ia = a.id(), io = t.size();
  return t.record(std::move(y), a.rows(), a.cols(), {a}, [ia, io](Tape& tp) {
    auto go = tp.grad_mut(io);
    auto ys = tp.data(io);
    double total = 0.0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < ys.size(); ++i)
      if (ys[i] > 0.0) {
        total += go[i];
        ++support;
      }
    const double mean = support ? total / static_cast<double>(support) : 0.0;
    auto ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (ys[i] > 0.0) ga[i] += go[i] - mean;
  });
}

/// mu + sigma * eps with eps an external constant draw.
inline Value gaussian_reparam(Value mu, Value sigma, std::span<const double> eps) {
  detail::same_size(mu, sigma, "gaussian_reparam");
  require(eps.size() == mu.size(), "gaussian_reparam: noise size mismatch");
  auto m = mu.data(), s = sigma.data();
  Vec out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] + s[i] * eps[i];
  Tape& t = mu.tape();
  const std::size_t im = mu.id(), is = sigma.id(), io = t.size();
  return t.record(std::move(out), mu.rows(), mu.cols(), {mu, sigma},
                  [im, is, io, noise = Vec(eps.begin(), eps.end())](Tape& tp) {
                    auto go = tp.grad_mut(io);
                    detail::accumulate(tp, im, go);
                    if (auto gs = tp.grad_mut(is); !gs.empty())
                      for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += go[i] * noise[i];
                  });
}

/// Scalar node with a given value whose backward is grad_x += grad_out * slope.
/// Used for oracle values: first-order information only, nothing flows into
/// the oracle's own argmin.
inline Value linearized(Value x, double value, std::span<const double> slope) {
  require(slope.size() == x.size(), "linearized: slope size mismatch");
  Tape& t = x.tape();
  const std::size_t ix = x.id(), io = t.size();
  return t.record(Vec{value}, 1, 1, {x},
                  [ix, io, g = Vec(slope.begin(), slope.end())](Tape& tp) {
                    detail::accumulate(tp, ix, g, tp.grad_mut(io)[0]);
                  });
}

// ---------------------------------------------------------------------------
// Parameter storage and updates

struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 1;
  Vec data;

  std::size_t size() const { return data.size(); }
};

using TensorList = std::vector<Tensor>;

inline TensorList zeros_like(const TensorList& ts) {
  TensorList out = ts;
  for (auto& t : out) std::fill(t.data.begin(), t.data.end(), 0.0);
  return out;
}

inline double global_norm(const TensorList& ts) {
  double s = 0.0;
  for (const auto& t : ts) s += squared_norm(t.data);
  return std::sqrt(s);
}

/// Rescales all gradients jointly so their global L2 norm is at most
/// max_norm. Returns the norm before clipping.
inline double clip_global_norm(TensorList& grads, double max_norm = 5.0) {
  require(max_norm > 0.0, "clip_global_norm: max_norm must be positive");
  const double n = global_norm(grads);
  if (n > max_norm) {
    const double f = max_norm / n;
    for (auto& t : grads)
      for (double& v : t.data) v *= f;
  }
  return n;
}

struct AdamState {
  std::vector<Vec> m, v;
  std::size_t step = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step over every tensor.
inline void adam_param_update(TensorList& params, const TensorList& grads, AdamState& state,
                              double lr, const AdamHyper& h = {}) {
  require(params.size() == grads.size(), "adam: tensor count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k].size() == grads[k].size(), "adam: shape mismatch for " + params[k].name);
    Vec& p = params[k].data;
    const Vec& g = grads[k].data;
    Vec& m = state.m[k];
    Vec& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
  }
}

}  // namespace bnet::ad
