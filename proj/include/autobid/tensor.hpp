#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "autobid/rng.hpp"

namespace autobid::nn {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode;

// Dense 64-bit float tensor with reverse-mode gradient recording.
// Value-semantic handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim() const;
  int64_t size() const;
  bool requires_grad() const;

  std::span<const double> values() const;
  // Mutable access to raw values. Meant for leaf tensors (parameters, batch
  // buffers); mutating an interior graph node invalidates recorded state.
  std::span<double> values_mut();

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  // Scalar extraction; requires size() == 1.
  double item() const;

  std::shared_ptr<TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// Disables graph recording for its scope (inference / evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x: [..., n], bias: [n]; broadcasts bias over leading dimensions.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
// Inverted dropout: zeroes elements with probability `rate` and scales
// survivors by 1/(1-rate) in training mode; identity in eval mode.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// --- matrix ---
// a @ b. Supports [m,k]x[k,n], [B,m,k]x[k,n] (b broadcast over the batch)
// and [B,m,k]x[B,k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a @ b^T over the last two dims: [m,k]x[n,k] -> [m,n], batched like matmul.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// x @ w + bias broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// --- normalization / activation over last dim ---
Tensor softmax_last(const Tensor& x);
Tensor layer_norm(const Tensor& h, const Tensor& gamma, const Tensor& beta,
                  double eps);

// --- shape / indexing ---
Tensor reshape(const Tensor& x, Shape new_shape);
// table: [V,d]; ids laid out row-major with `id_shape` -> output id_shape + [d].
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids,
                        const Shape& id_shape);
// a,b,c: [B,M,d] -> [B,3M,d] with rows ordered (a_0,b_0,c_0,a_1,b_1,c_1,...).
Tensor interleave_rows(const Tensor& a, const Tensor& b, const Tensor& c);
// x: [B,L,d], row_idx values in [0,L) -> [B,K,d].
Tensor gather_rows(const Tensor& x, const std::vector<int>& row_idx);

// --- reduction / backprop ---
Tensor sum_all(const Tensor& x);  // -> shape [1]
// Populates grad on every requires_grad tensor reachable from `loss`.
// loss must have shape [1].
void backward(const Tensor& loss);

}  // namespace autobid::nn
