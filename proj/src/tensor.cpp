#include "scvae/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace scvae {

namespace {

std::atomic<std::uint64_t> g_seq{1};

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a, b);
}

std::shared_ptr<detail::Node> make_node(std::vector<std::size_t> shape,
                                        std::vector<double> values) {
  auto n = std::make_shared<detail::Node>();
  if (values.size() != shape_size(shape))
    throw std::invalid_argument("tensor: value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

bool any_requires_grad(const std::vector<Tensor>& ps) {
  for (const auto& p : ps)
    if (p.requires_grad()) return true;
  return false;
}

// Accumulate into a parent's grad if it participates in differentiation.
inline double* grad_of(detail::Node& out, std::size_t i) {
  detail::Node& p = *out.parents[i];
  return p.requires_grad ? p.grad.data() : nullptr;
}

}  // namespace

Tensor Tensor::leaf(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  auto n = make_node(std::move(shape), std::move(values));
  n->requires_grad = requires_grad;
  n->is_leaf = true;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return leaf({}, {v}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return leaf({n}, std::move(values), requires_grad);
}

Tensor Tensor::from_op(std::vector<std::size_t> shape, std::vector<double> values,
                       std::vector<Tensor> parents,
                       std::function<void(detail::Node&)> backprop) {
  auto n = make_node(std::move(shape), std::move(values));
  n->requires_grad = any_requires_grad(parents);
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.handle());
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

std::size_t Tensor::rows() const {
  if (n_->shape.size() != 2) throw std::invalid_argument("rows(): tensor is not 2-D");
  return n_->shape[0];
}

std::size_t Tensor::cols() const {
  if (n_->shape.size() != 2) throw std::invalid_argument("cols(): tensor is not 2-D");
  return n_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor has " +
                                               std::to_string(size()) + " elements");
  return n_->value[0];
}

std::vector<double>& Tensor::mutable_values() {
  if (!n_->is_leaf) throw std::logic_error("mutable_values(): not a leaf tensor");
  return n_->value;
}

void Tensor::zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  detail::Node* root = loss.node();
  if (!root->requires_grad) return;

  // Reachable subgraph, then replay by descending creation order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  // Interior grads reset per call; leaf grads accumulate across calls.
  for (detail::Node* n : order) {
    if (!n->is_leaf)
      n->grad.assign(n->value.size(), 0.0);
    else if (n->grad.size() != n->value.size())
      n->grad.assign(n->value.size(), 0.0);
  }
  root->grad[0] = 1.0;
  for (detail::Node* n : order) {
    if (n->backprop) n->backprop(*n);
  }
}

// ---- elementwise binary -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = grad_of(o, k))
        for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] -= o.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    const auto& av = o.parents[0]->value;
    const auto& bv = o.parents[1]->value;
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i] * bv[i];
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i] * av[i];
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same_shape("maximum", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], b[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node& o) {
    const auto& av = o.parents[0]->value;
    const auto& bv = o.parents[1]->value;
    double* ga = grad_of(o, 0);
    double* gb = grad_of(o, 1);
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (av[i] >= bv[i]) {
        if (ga) ga[i] += o.grad[i];
      } else if (gb) {
        gb[i] += o.grad[i];
      }
    }
  });
}

Tensor atan2_(const Tensor& y, const Tensor& x) {
  require_same_shape("atan2", y, x);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::atan2(y[i], x[i]);
  return Tensor::from_op(y.shape(), std::move(out), {y, x}, [](detail::Node& o) {
    const auto& yv = o.parents[0]->value;
    const auto& xv = o.parents[1]->value;
    double* gy = grad_of(o, 0);
    double* gx = grad_of(o, 1);
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double r2 = xv[i] * xv[i] + yv[i] * yv[i];
      if (r2 == 0.0) continue;  // undefined at the origin; leave grads alone
      if (gy) gy[i] += o.grad[i] * xv[i] / r2;
      if (gx) gx[i] -= o.grad[i] * yv[i] / r2;
    }
  });
}

Tensor wrap_angle(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::remainder(a[i], 2.0 * M_PI);
  // Derivative 1 almost everywhere (the wrap jumps are measure-zero).
  return Tensor::from_op(a.shape(), std::move(out), {a}, [](detail::Node& o) {
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
  });
}

// ---- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2) throw std::invalid_argument("matmul: lhs must be 2-D");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const bool vec = b.shape().size() == 1;
  const std::size_t bk = vec ? b.shape()[0] : b.shape()[0];
  const std::size_t n = vec ? 1 : b.shape()[1];
  if (bk != k) shape_error("matmul", a, b);

  std::vector<double> out(m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  if (vec) {
    // Matrix-vector product, the dominant case. Four explicit accumulators
    // fix a summation order that still lets the FPU pipeline the products.
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = av + i * k;
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      std::size_t kk = 0;
      for (; kk + 4 <= k; kk += 4) {
        a0 += row[kk] * bv[kk];
        a1 += row[kk + 1] * bv[kk + 1];
        a2 += row[kk + 2] * bv[kk + 2];
        a3 += row[kk + 3] * bv[kk + 3];
      }
      for (; kk < k; ++kk) a0 += row[kk] * bv[kk];
      out[i] = (a0 + a1) + (a2 + a3);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = av[i * k + kk];
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aik * bv[kk * n + j];
      }
  }

  std::vector<std::size_t> oshape = vec ? std::vector<std::size_t>{m}
                                        : std::vector<std::size_t>{m, n};
  return Tensor::from_op(std::move(oshape), std::move(out), {a, b},
                         [m, k, n](detail::Node& o) {
    const double* av = o.parents[0]->value.data();
    const double* bv = o.parents[1]->value.data();
    const double* og = o.grad.data();
    if (n == 1) {
      // dA = g b^T (outer product), dB = A^T g; both contiguous inner loops.
      if (double* ga = grad_of(o, 0)) {
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = og[i];
          double* row = ga + i * k;
          for (std::size_t kk = 0; kk < k; ++kk) row[kk] += gi * bv[kk];
        }
      }
      if (double* gb = grad_of(o, 1)) {
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = og[i];
          const double* row = av + i * k;
          for (std::size_t kk = 0; kk < k; ++kk) gb[kk] += gi * row[kk];
        }
      }
      return;
    }
    if (double* ga = grad_of(o, 0)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += og[i * n + j] * bv[kk * n + j];
          ga[i * k + kk] += acc;
        }
    }
    if (double* gb = grad_of(o, 1)) {
      // dB = A^T * G
      for (std::size_t kk = 0; kk < k; ++kk)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += av[i * k + kk] * og[i * n + j];
          gb[kk * n + j] += acc;
        }
    }
  });
}

// ---- concat / slice ---------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty input");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 1) throw std::invalid_argument("concat: parts must be 1-D");
    total += p.size();
  }
  std::vector<double> out;
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::from_op({total}, std::move(out), parts, [](detail::Node& o) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < o.parents.size(); ++k) {
      const std::size_t len = o.parents[k]->value.size();
      if (double* g = grad_of(o, k))
        for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[off + i];
      off += len;
    }
  });
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.shape().size() != 1) throw std::invalid_argument("slice: tensor must be 1-D");
  if (begin > end || end > a.size())
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," +
                                std::to_string(end) + ") out of bounds for size " +
                                std::to_string(a.size()));
  std::vector<double> out(a.values().begin() + begin, a.values().begin() + end);
  return Tensor::from_op({end - begin}, std::move(out), {a}, [begin](detail::Node& o) {
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[begin + i] += o.grad[i];
  });
}

// ---- unary ------------------------------------------------------------------

namespace {

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a}, [df](detail::Node& o) {
    if (double* g = grad_of(o, 0)) {
      const auto& x = o.parents[0]->value;
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i] * df(x[i], o.value[i]);
    }
  });
}

}  // namespace

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor rsub_scalar(double c, const Tensor& a) {
  return unary(a, [c](double x) { return c - x; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log_(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Tensor reciprocal(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / x; },
               [](double, double y) { return -y * y; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return Tensor::from_op({}, {s}, {a}, [](detail::Node& o) {
    if (double* g = grad_of(o, 0)) {
      const std::size_t n = o.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  const double inv = 1.0 / static_cast<double>(a.size());
  return Tensor::from_op({}, {s * inv}, {a}, [inv](detail::Node& o) {
    if (double* g = grad_of(o, 0)) {
      const std::size_t n = o.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0] * inv;
    }
  });
}

// ---- scalar broadcast -------------------------------------------------------

namespace {

void require_bscalar(const char* op, const Tensor& s) {
  if (s.size() != 1)
    throw std::invalid_argument(std::string(op) + ": broadcast operand must be scalar");
}

}  // namespace

Tensor add_bscalar(const Tensor& v, const Tensor& s) {
  require_bscalar("add_bscalar", s);
  std::vector<double> out(v.size());
  const double sv = s.item();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] + sv;
  return Tensor::from_op(v.shape(), std::move(out), {v, s}, [](detail::Node& o) {
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.size(); ++i) g[0] += o.grad[i];
  });
}

Tensor sub_bscalar(const Tensor& v, const Tensor& s) {
  require_bscalar("sub_bscalar", s);
  std::vector<double> out(v.size());
  const double sv = s.item();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] - sv;
  return Tensor::from_op(v.shape(), std::move(out), {v, s}, [](detail::Node& o) {
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.size(); ++i) g[0] -= o.grad[i];
  });
}

Tensor mul_bscalar(const Tensor& v, const Tensor& s) {
  require_bscalar("mul_bscalar", s);
  std::vector<double> out(v.size());
  const double sv = s.item();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * sv;
  return Tensor::from_op(v.shape(), std::move(out), {v, s}, [](detail::Node& o) {
    const double sv = o.parents[1]->value[0];
    const auto& vv = o.parents[0]->value;
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i] * sv;
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < o.size(); ++i) g[0] += o.grad[i] * vv[i];
  });
}

// ---- layer norm -------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.shape().size() != 1) throw std::invalid_argument("layer_norm: input must be 1-D");
  require_same_shape("layer_norm(gain)", x, gain);
  require_same_shape("layer_norm(bias)", x, bias);
  const std::size_t n = x.size();
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu += x[i];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
  var /= static_cast<double>(n);
  const double sig = std::sqrt(var + eps);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = gain[i] * (x[i] - mu) / sig + bias[i];

  return Tensor::from_op(x.shape(), std::move(out), {x, gain, bias},
                         [mu, sig](detail::Node& o) {
    const std::size_t n = o.size();
    const auto& xv = o.parents[0]->value;
    const auto& gv = o.parents[1]->value;
    std::vector<double> xhat(n), dxhat(n);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xhat[i] = (xv[i] - mu) / sig;
      dxhat[i] = o.grad[i] * gv[i];
      m1 += dxhat[i];
      m2 += dxhat[i] * xhat[i];
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    if (double* g = grad_of(o, 0))
      for (std::size_t i = 0; i < n; ++i)
        g[i] += (dxhat[i] - m1 - xhat[i] * m2) / sig;
    if (double* g = grad_of(o, 1))
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * xhat[i];
    if (double* g = grad_of(o, 2))
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i];
  });
}

// ---- softmax ----------------------------------------------------------------

Tensor softmax(const Tensor& s) {
  if (s.shape().size() != 1 || s.size() == 0)
    throw std::invalid_argument("softmax: input must be a non-empty 1-D tensor");
  const double m = *std::max_element(s.values().begin(), s.values().end());
  Tensor e = exp_(add_scalar(s, -m));
  return mul_bscalar(e, reciprocal(sum(e)));
}

// ---- sort-by-key ------------------------------------------------------------

std::vector<std::size_t> argsort_desc(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace scvae
