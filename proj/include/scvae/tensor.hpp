#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scvae {

namespace detail {

// One tape entry. Nodes are created in topological order (a node's parents
// always carry a smaller sequence number), so replaying the tape backward
// by descending sequence number visits each node exactly once.
struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  std::size_t size() const { return value.size(); }
};

}  // namespace detail

// Dense tensor of 64-bit reals with reverse-mode autodiff. Value-semantic
// handle to a shared tape node; the dynamic tape is rebuilt on every
// forward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  // Records a custom primitive on the tape. `backprop` reads the node's
  // grad and accumulates into its parents' grads (already sized and zeroed
  // for parents that require grad).
  static Tensor from_op(std::vector<std::size_t> shape, std::vector<double> values,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backprop);

  bool defined() const { return static_cast<bool>(n_); }
  const std::vector<std::size_t>& shape() const { return n_->shape; }
  std::size_t size() const { return n_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  const std::vector<double>& values() const { return n_->value; }
  const std::vector<double>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  bool is_leaf() const { return n_->is_leaf; }
  double item() const;
  double operator[](std::size_t i) const { return n_->value[i]; }

  // Leaf-only mutation (parameter updates between forward passes).
  std::vector<double>& mutable_values();
  void zero_grad();

  detail::Node* node() const { return n_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::Node> n_;
};

// Runs reverse-mode accumulation from a scalar loss. Interior grads are
// reset per call; leaf grads accumulate until zero_grad().
void backward(const Tensor& loss);

// ---- primitive ops ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);       // elementwise
Tensor matmul(const Tensor& a, const Tensor& b);    // (m,k)x(k,n) or (m,k)x(k)
Tensor concat(const std::vector<Tensor>& parts);    // 1-D
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);  // 1-D

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor rsub_scalar(double c, const Tensor& a);      // c - a
Tensor sigmoid(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor exp_(const Tensor& a);
Tensor log_(const Tensor& a);
Tensor sqrt_(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor square(const Tensor& a);
Tensor atan2_(const Tensor& y, const Tensor& x);  // elementwise
Tensor wrap_angle(const Tensor& a);  // remainder(a, 2*pi), gradient 1 a.e.

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);   // elementwise max; ties to a

// Broadcasting a scalar tensor over a vector, only as far as the model needs.
Tensor add_bscalar(const Tensor& v, const Tensor& s);
Tensor sub_bscalar(const Tensor& v, const Tensor& s);
Tensor mul_bscalar(const Tensor& v, const Tensor& s);

// Fused layer normalization with learnable gain/bias (eps inside the sqrt).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Softmax over a 1-D tensor (shift by the max, treated as a constant).
Tensor softmax(const Tensor& s);

// Indices that would sort `v` descending; ties keep the original order.
std::vector<std::size_t> argsort_desc(std::span<const double> v);

}  // namespace scvae
