#include "autobid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "autobid/errors.hpp"

namespace autobid::nn {

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const TensorNode&)> backprop;

  int64_t size() const { return static_cast<int64_t>(values.size()); }

  std::vector<double>& grad_ref() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (int d : shape) {
    if (d <= 0)
      throw DimensionError(detail::msg("tensor dimensions must be positive, got ", shape_str(shape)));
  }
}

// NaN/Inf anywhere in a tensor is an error state. A single accumulation pass
// catches it without a per-element branch.
void ensure_finite(const std::vector<double>& values, const char* op) {
  double acc = 0.0;
  for (double v : values) acc += v;
  if (std::isfinite(acc)) return;
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw NumericError(detail::msg(op, ": non-finite value at flat index ", i));
  }
  // Finite elements whose sum overflows: treat as error too.
  throw NumericError(detail::msg(op, ": value magnitudes overflow"));
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  return node;
}

// Registers parents and a backprop closure if recording is active and any
// parent requires grad.
void attach(const std::shared_ptr<TensorNode>& node,
            std::vector<std::shared_ptr<TensorNode>> parents,
            std::function<void(const TensorNode&)> backprop) {
  if (!g_grad_enabled) return;
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (!any) return;
  node->requires_grad = true;
  node->parents = std::move(parents);
  node->backprop = std::move(backprop);
}

// ---- raw kernels -----------------------------------------------------------
// All kernels accumulate into C. Loop order keeps the inner loop running over
// contiguous rows of B and C so the compiler can vectorize it.

// C[M,N] += A[M,K] @ B[K,N]
void kern_nn(const double* a, const double* b, double* c, int m_dim, int k_dim, int n_dim) {
  for (int m = 0; m < m_dim; ++m) {
    const double* arow = a + static_cast<int64_t>(m) * k_dim;
    double* crow = c + static_cast<int64_t>(m) * n_dim;
    for (int k = 0; k < k_dim; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<int64_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// C[K,N] += A[M,K]^T @ B[M,N]
void kern_tn(const double* a, const double* b, double* c, int m_dim, int k_dim, int n_dim) {
  for (int m = 0; m < m_dim; ++m) {
    const double* arow = a + static_cast<int64_t>(m) * k_dim;
    const double* brow = b + static_cast<int64_t>(m) * n_dim;
    for (int k = 0; k < k_dim; ++k) {
      const double av = arow[k];
      double* crow = c + static_cast<int64_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// dst[C,R] = src[R,C]^T
void transpose2d(const double* src, double* dst, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      dst[static_cast<int64_t>(c) * rows + r] = src[static_cast<int64_t>(r) * cols + c];
}

struct MatDims {
  int batch;  // 1 when unbatched
  int m, k, n;
  bool a_batched, b_batched;
};

MatDims resolve_matmul_dims(const Shape& a, const Shape& b, bool b_transposed, const char* op) {
  auto fail = [&]() -> MatDims {
    throw DimensionError(detail::msg(op, ": incompatible shapes ", shape_str(a), " x ", shape_str(b)));
  };
  if (a.size() < 2 || a.size() > 3 || b.size() < 2 || b.size() > 3) return fail();
  MatDims d{};
  d.a_batched = a.size() == 3;
  d.b_batched = b.size() == 3;
  if (d.b_batched && !d.a_batched) return fail();
  d.batch = d.a_batched ? a[0] : 1;
  if (d.a_batched && d.b_batched && a[0] != b[0]) return fail();
  d.m = a[a.size() - 2];
  d.k = a[a.size() - 1];
  const int bk = b_transposed ? b[b.size() - 1] : b[b.size() - 2];
  d.n = b_transposed ? b[b.size() - 2] : b[b.size() - 1];
  if (bk != d.k) return fail();
  return d;
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  const auto n = static_cast<size_t>(numel(shape));
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  const auto n = static_cast<size_t>(numel(shape));
  auto node = make_node(std::move(shape), std::vector<double>(n, value));
  node->requires_grad = requires_grad;
  ensure_finite(node->values, "full");
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (numel(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError(detail::msg("from_values: shape ", shape_str(shape), " expects ",
                                     numel(shape), " values, got ", values.size()));
  auto node = make_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  ensure_finite(node->values, "from_values");
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

namespace {
TensorNode& deref(const std::shared_ptr<TensorNode>& node) {
  if (!node) throw DimensionError("operation on an undefined (empty) tensor");
  return *node;
}
}  // namespace

const Shape& Tensor::shape() const { return deref(node_).shape; }
int Tensor::dim() const { return static_cast<int>(deref(node_).shape.size()); }
int64_t Tensor::size() const { return deref(node_).size(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::values() const { return deref(node_).values; }
std::span<double> Tensor::values_mut() { return deref(node_).values; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return deref(node_).grad; }
std::span<double> Tensor::grad_mut() { return deref(node_).grad_ref(); }
void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (!node_ || node_->size() != 1)
    throw ContractError(detail::msg("item: tensor is not scalar, shape ",
                                    node_ ? shape_str(node_->shape) : "<empty>"));
  return node_->values[0];
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise -----------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(detail::msg(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                                     shape_str(b.shape())));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  ensure_finite(out, "add");
  auto node = make_node(a.shape(), std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  attach(node, {pa, pb}, [pa = pa.get(), pb = pb.get()](const TensorNode& self) {
    if (pa->requires_grad) {
      auto& g = pa->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
  return Tensor(std::move(node));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  ensure_finite(out, "sub");
  auto node = make_node(a.shape(), std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  attach(node, {pa, pb}, [pa = pa.get(), pb = pb.get()](const TensorNode& self) {
    if (pa->requires_grad) {
      auto& g = pa->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
  return Tensor(std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  ensure_finite(out, "mul");
  auto node = make_node(a.shape(), std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  attach(node, {pa, pb}, [pa = pa.get(), pb = pb.get()](const TensorNode& self) {
    if (pa->requires_grad) {
      auto& g = pa->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->values[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->values[i];
    }
  });
  return Tensor(std::move(node));
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  ensure_finite(out, "scale");
  auto node = make_node(a.shape(), std::move(out));
  auto pa = a.node();
  attach(node, {pa}, [pa = pa.get(), factor](const TensorNode& self) {
    auto& g = pa->grad_ref();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
  return Tensor(std::move(node));
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.dim() != 1 || bias.shape()[0] != x.shape().back())
    throw DimensionError(detail::msg("add_bias: bias ", shape_str(bias.shape()),
                                     " does not match last dim of ", shape_str(x.shape())));
  const int n = bias.shape()[0];
  const int64_t rows = x.size() / n;
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * n;
    for (int i = 0; i < n; ++i) row[i] += bv[i];
  }
  ensure_finite(out, "add_bias");
  auto node = make_node(x.shape(), std::move(out));
  auto px = x.node();
  auto pb = bias.node();
  attach(node, {px, pb}, [px = px.get(), pb = pb.get(), rows, n](const TensorNode& self) {
    if (px->requires_grad) {
      auto& g = px->grad_ref();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_ref();
      for (int64_t r = 0; r < rows; ++r) {
        const double* grow = self.grad.data() + r * n;
        for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] += grow[i];
      }
    }
  });
  return Tensor(std::move(node));
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto node = make_node(x.shape(), std::move(out));
  auto px = x.node();
  attach(node, {px}, [px = px.get()](const TensorNode& self) {
    auto& g = px->grad_ref();
    for (size_t i = 0; i < g.size(); ++i)
      if (px->values[i] > 0.0) g[i] += self.grad[i];
  });
  return Tensor(std::move(node));
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError(detail::msg("dropout: rate must be in [0,1), got ", rate));
  if (!training || rate == 0.0) return x;  // eval mode is an exact identity
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> out(x.values().begin(), x.values().end());
  // The mask is a function of the RNG stream only, never of the values.
  auto mask = std::make_shared<std::vector<uint8_t>>(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const bool keep = rng.uniform01() >= rate;
    (*mask)[i] = keep;
    out[i] = keep ? out[i] * keep_scale : 0.0;
  }
  ensure_finite(out, "dropout");
  auto node = make_node(x.shape(), std::move(out));
  auto px = x.node();
  attach(node, {px}, [px = px.get(), mask, keep_scale](const TensorNode& self) {
    auto& g = px->grad_ref();
    for (size_t i = 0; i < g.size(); ++i)
      if ((*mask)[i]) g[i] += self.grad[i] * keep_scale;
  });
  return Tensor(std::move(node));
}

// ---- matrix ----------------------------------------------------------------

namespace {

Tensor matmul_impl(const Tensor& a, const Tensor& b, bool b_transposed, const char* op) {
  const MatDims d = resolve_matmul_dims(a.shape(), b.shape(), b_transposed, op);
  Shape out_shape = d.a_batched ? Shape{d.batch, d.m, d.n} : Shape{d.m, d.n};
  std::vector<double> out(static_cast<size_t>(numel(out_shape)), 0.0);

  const int64_t a_stride = static_cast<int64_t>(d.m) * d.k;
  const int64_t b_stride = d.b_batched ? static_cast<int64_t>(d.k) * d.n : 0;
  const int64_t c_stride = static_cast<int64_t>(d.m) * d.n;

  const double* av = a.values().data();
  const double* bv = b.values().data();

  if (!b_transposed) {
    for (int i = 0; i < d.batch; ++i)
      kern_nn(av + i * a_stride, bv + i * b_stride, out.data() + i * c_stride, d.m, d.k, d.n);
  } else {
    // b stored [n,k]; transpose each slab once, then reuse the nn kernel.
    std::vector<double> bt(static_cast<size_t>(d.k) * d.n);
    for (int i = 0; i < d.batch; ++i) {
      if (i == 0 || d.b_batched) transpose2d(bv + i * b_stride, bt.data(), d.n, d.k);
      kern_nn(av + i * a_stride, bt.data(), out.data() + i * c_stride, d.m, d.k, d.n);
    }
  }
  ensure_finite(out, op);

  auto node = make_node(std::move(out_shape), std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  attach(node, {pa, pb},
         [pa = pa.get(), pb = pb.get(), d, a_stride, b_stride, c_stride,
          b_transposed](const TensorNode& self) {
           const double* gv = self.grad.data();
           if (pa->requires_grad) {
             auto& ga = pa->grad_ref();
             if (!b_transposed) {
               // dA = dC @ B^T; transpose B slab once per batch.
               std::vector<double> bt(static_cast<size_t>(d.n) * d.k);
               for (int i = 0; i < d.batch; ++i) {
                 if (i == 0 || d.b_batched)
                   transpose2d(pb->values.data() + i * b_stride, bt.data(), d.k, d.n);
                 kern_nn(gv + i * c_stride, bt.data(), ga.data() + i * a_stride, d.m, d.n, d.k);
               }
             } else {
               // dA = dC @ B (B stored [n,k] already).
               for (int i = 0; i < d.batch; ++i)
                 kern_nn(gv + i * c_stride, pb->values.data() + i * b_stride,
                         ga.data() + i * a_stride, d.m, d.n, d.k);
             }
           }
           if (pb->requires_grad) {
             auto& gb = pb->grad_ref();
             for (int i = 0; i < d.batch; ++i) {
               const double* aslab = pa->values.data() + i * a_stride;
               const double* gslab = gv + i * c_stride;
               double* out_slab = gb.data() + (d.b_batched ? i * b_stride : 0);
               if (!b_transposed) {
                 kern_tn(aslab, gslab, out_slab, d.m, d.k, d.n);  // dB = A^T dC
               } else {
                 kern_tn(gslab, aslab, out_slab, d.m, d.n, d.k);  // dB = dC^T A
               }
             }
           }
         });
  return Tensor(std::move(node));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, false, "matmul"); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_impl(a, b, true, "matmul_nt"); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add_bias(matmul(x, w), bias);
}

// ---- softmax / layer norm ---------------------------------------------------

Tensor softmax_last(const Tensor& x) {
  if (x.dim() < 1 || x.shape().back() < 1)
    throw DimensionError(detail::msg("softmax_last: needs last dimension >= 1, got ",
                                     shape_str(x.shape())));
  const int n = x.shape().back();
  const int64_t rows = x.size() / n;
  std::vector<double> out(static_cast<size_t>(x.size()));
  const double* xv = x.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xv + r * n;
    double* orow = out.data() + r * n;
    double mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      orow[i] = std::exp(row[i] - mx);
      sum += orow[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) orow[i] *= inv;
  }
  ensure_finite(out, "softmax_last");
  auto node = make_node(x.shape(), std::move(out));
  auto px = x.node();
  attach(node, {px}, [px = px.get(), rows, n](const TensorNode& self) {
    auto& g = px->grad_ref();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = self.values.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += dy[i] * y[i];
      double* grow = g.data() + r * n;
      for (int i = 0; i < n; ++i) grow[i] += y[i] * (dy[i] - dot);
    }
  });
  return Tensor(std::move(node));
}

Tensor layer_norm(const Tensor& h, const Tensor& gamma, const Tensor& beta, double eps) {
  const int n = h.shape().back();
  if (gamma.dim() != 1 || beta.dim() != 1 || gamma.shape()[0] != n || beta.shape()[0] != n)
    throw DimensionError(detail::msg("layer_norm: gamma ", shape_str(gamma.shape()), " / beta ",
                                     shape_str(beta.shape()), " do not match hidden dim of ",
                                     shape_str(h.shape())));
  if (eps <= 0.0) throw ConfigError(detail::msg("layer_norm: eps must be positive, got ", eps));
  const int64_t rows = h.size() / n;

  std::vector<double> out(static_cast<size_t>(h.size()));
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(h.size()));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));

  const double* hv = h.values().data();
  const double* gv = gamma.values().data();
  const double* bv = beta.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = hv + r * n;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += row[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = row[i] - mean;
      var += d * d;
    }
    var /= n;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = istd;
    double* xrow = xhat->data() + r * n;
    double* orow = out.data() + r * n;
    for (int i = 0; i < n; ++i) {
      xrow[i] = (row[i] - mean) * istd;
      orow[i] = gv[i] * xrow[i] + bv[i];
    }
  }
  ensure_finite(out, "layer_norm");
  auto node = make_node(h.shape(), std::move(out));
  auto ph = h.node();
  auto pg = gamma.node();
  auto pb = beta.node();
  attach(node, {ph, pg, pb},
         [ph = ph.get(), pg = pg.get(), pb = pb.get(), xhat, inv_std, rows, n](const TensorNode& self) {
           const double* dy = self.grad.data();
           if (pb->requires_grad) {
             auto& g = pb->grad_ref();
             for (int64_t r = 0; r < rows; ++r)
               for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] += dy[r * n + i];
           }
           if (pg->requires_grad) {
             auto& g = pg->grad_ref();
             for (int64_t r = 0; r < rows; ++r)
               for (int i = 0; i < n; ++i)
                 g[static_cast<size_t>(i)] += dy[r * n + i] * (*xhat)[static_cast<size_t>(r * n + i)];
           }
           if (ph->requires_grad) {
             auto& g = ph->grad_ref();
             const double* gam = pg->values.data();
             for (int64_t r = 0; r < rows; ++r) {
               const double* xrow = xhat->data() + r * n;
               const double* dyrow = dy + r * n;
               double sum1 = 0.0, sum2 = 0.0;
               for (int i = 0; i < n; ++i) {
                 const double dxh = dyrow[i] * gam[i];
                 sum1 += dxh;
                 sum2 += dxh * xrow[i];
               }
               const double istd = (*inv_std)[static_cast<size_t>(r)];
               double* grow = g.data() + r * n;
               for (int i = 0; i < n; ++i) {
                 const double dxh = dyrow[i] * gam[i];
                 grow[i] += istd * (dxh - (sum1 + xrow[i] * sum2) / n);
               }
             }
           }
         });
  return Tensor(std::move(node));
}

// ---- shape / indexing -------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  validate_shape(new_shape);
  if (numel(new_shape) != x.size())
    throw DimensionError(detail::msg("reshape: cannot view ", shape_str(x.shape()), " as ",
                                     shape_str(new_shape)));
  std::vector<double> out(x.values().begin(), x.values().end());
  auto node = make_node(std::move(new_shape), std::move(out));
  auto px = x.node();
  attach(node, {px}, [px = px.get()](const TensorNode& self) {
    auto& g = px->grad_ref();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return Tensor(std::move(node));
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids, const Shape& id_shape) {
  if (table.dim() != 2)
    throw DimensionError(detail::msg("embedding_lookup: table must be 2-D, got ",
                                     shape_str(table.shape())));
  if (numel(id_shape) != static_cast<int64_t>(ids.size()))
    throw DimensionError("embedding_lookup: id count does not match id_shape");
  const int vocab = table.shape()[0];
  const int d = table.shape()[1];
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw IndexError(detail::msg("embedding_lookup: id ", id, " outside table of size ", vocab));

  Shape out_shape = id_shape;
  out_shape.push_back(d);
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  const double* tv = table.values().data();
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tv + static_cast<int64_t>(ids[i]) * d, d, out.data() + static_cast<int64_t>(i) * d);

  auto node = make_node(std::move(out_shape), std::move(out));
  auto pt = table.node();
  auto ids_copy = std::make_shared<std::vector<int>>(ids);
  attach(node, {pt}, [pt = pt.get(), ids_copy, d](const TensorNode& self) {
    auto& g = pt->grad_ref();
    for (size_t i = 0; i < ids_copy->size(); ++i) {
      double* grow = g.data() + static_cast<int64_t>((*ids_copy)[i]) * d;
      const double* dyrow = self.grad.data() + static_cast<int64_t>(i) * d;
      for (int j = 0; j < d; ++j) grow[j] += dyrow[j];
    }
  });
  return Tensor(std::move(node));
}

Tensor interleave_rows(const Tensor& a, const Tensor& b, const Tensor& c) {
  require_same_shape(a, b, "interleave_rows");
  require_same_shape(a, c, "interleave_rows");
  if (a.dim() != 3)
    throw DimensionError(detail::msg("interleave_rows: expects [B,M,d], got ", shape_str(a.shape())));
  const int batch = a.shape()[0], m = a.shape()[1], d = a.shape()[2];
  Shape out_shape{batch, 3 * m, d};
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  const double* srcs[3] = {a.values().data(), b.values().data(), c.values().data()};
  for (int i = 0; i < batch; ++i)
    for (int p = 0; p < m; ++p)
      for (int s = 0; s < 3; ++s)
        std::copy_n(srcs[s] + (static_cast<int64_t>(i) * m + p) * d, d,
                    out.data() + (static_cast<int64_t>(i) * 3 * m + 3 * p + s) * d);
  auto node = make_node(std::move(out_shape), std::move(out));
  auto pa = a.node();
  auto pb = b.node();
  auto pc = c.node();
  attach(node, {pa, pb, pc},
         [pa = pa.get(), pb = pb.get(), pc = pc.get(), batch, m, d](const TensorNode& self) {
           TensorNode* parents[3] = {pa, pb, pc};
           for (int s = 0; s < 3; ++s) {
             if (!parents[s]->requires_grad) continue;
             auto& g = parents[s]->grad_ref();
             for (int i = 0; i < batch; ++i)
               for (int p = 0; p < m; ++p) {
                 const double* dyrow =
                     self.grad.data() + (static_cast<int64_t>(i) * 3 * m + 3 * p + s) * d;
                 double* grow = g.data() + (static_cast<int64_t>(i) * m + p) * d;
                 for (int j = 0; j < d; ++j) grow[j] += dyrow[j];
               }
           }
         });
  return Tensor(std::move(node));
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& row_idx) {
  if (x.dim() != 3)
    throw DimensionError(detail::msg("gather_rows: expects [B,L,d], got ", shape_str(x.shape())));
  const int batch = x.shape()[0], l = x.shape()[1], d = x.shape()[2];
  for (int idx : row_idx)
    if (idx < 0 || idx >= l)
      throw IndexError(detail::msg("gather_rows: row ", idx, " outside [0,", l, ")"));
  const int k = static_cast<int>(row_idx.size());
  Shape out_shape{batch, k, d};
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  const double* xv = x.values().data();
  for (int i = 0; i < batch; ++i)
    for (int p = 0; p < k; ++p)
      std::copy_n(xv + (static_cast<int64_t>(i) * l + row_idx[static_cast<size_t>(p)]) * d, d,
                  out.data() + (static_cast<int64_t>(i) * k + p) * d);
  auto node = make_node(std::move(out_shape), std::move(out));
  auto px = x.node();
  auto idx_copy = std::make_shared<std::vector<int>>(row_idx);
  attach(node, {px}, [px = px.get(), idx_copy, batch, l, d, k](const TensorNode& self) {
    auto& g = px->grad_ref();
    for (int i = 0; i < batch; ++i)
      for (int p = 0; p < k; ++p) {
        const double* dyrow = self.grad.data() + (static_cast<int64_t>(i) * k + p) * d;
        double* grow = g.data() + (static_cast<int64_t>(i) * l + (*idx_copy)[static_cast<size_t>(p)]) * d;
        for (int j = 0; j < d; ++j) grow[j] += dyrow[j];
      }
  });
  return Tensor(std::move(node));
}

// ---- reduction / backward ---------------------------------------------------

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  if (!std::isfinite(s)) throw NumericError("sum_all: non-finite result");
  auto node = make_node({1}, {s});
  auto px = x.node();
  attach(node, {px}, [px = px.get()](const TensorNode& self) {
    auto& g = px->grad_ref();
    const double dy = self.grad[0];
    for (double& v : g) v += dy;
  });
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1 || loss.dim() != 1)
    throw ContractError(detail::msg("backward: loss must have shape [1], got ",
                                    loss.defined() ? shape_str(loss.shape()) : "<empty>"));
  auto root = loss.node();
  if (!root->requires_grad) return;  // nothing reachable requires grad

  // Iterative post-order DFS for a topological order over grad-requiring nodes.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_ref()[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* node = *it;
    if (!node->backprop) continue;
    node->grad_ref();  // ensure allocated even if untouched
    node->backprop(*node);
  }
}

}  // namespace autobid::nn
