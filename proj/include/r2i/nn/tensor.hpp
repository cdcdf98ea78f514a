#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace r2i::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// 64-byte aligned storage. Vectorized reductions peel differently depending
// on the start address, so alignment must not vary between runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

inline std::vector<float> to_vector(const FloatBuffer& b) { return {b.begin(), b.end()}; }

/// Dense row-major float tensor. Image tensors are NCHW.
struct Tensor {
  Shape shape;
  FloatBuffer data;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f);
  Tensor(Shape s, FloatBuffer values);
  Tensor(Shape s, const std::vector<float>& values);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  bool operator==(const Tensor&) const = default;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  FloatBuffer grad;  // empty until something flows back
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  FloatBuffer& grad_buffer();
};

/// Handle to a node in the autograd graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Tensor t);
  static Var parameter(Tensor t);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  std::span<const float> data() const { return node_->value.data; }
  std::span<const float> grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// While alive, new ops record no backward closures (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Seeds each root with the given gradient (same size as its value) and
/// propagates to every reachable node that requires grad.
void backward(const std::vector<std::pair<Var, std::vector<float>>>& seeds);

// ---- graph ops --------------------------------------------------------------

Var detach(const Var& x);
Var reshape(const Var& x, Shape shape);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// alpha * x + beta, elementwise.
Var affine(const Var& x, float alpha, float beta);
Var exp(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, float slope = 0.2f);

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
/// x[N,in] W[in,out] + b[out]
Var linear(const Var& x, const Var& w, const Var& b);

/// Concatenates along axis 1; all other axes must agree.
Var concat(const std::vector<Var>& parts);
/// Columns [start, start+len) of a 2-D tensor.
Var slice_cols(const Var& x, int start, int len);
/// Selects rows of a 2-D tensor (rows may repeat).
Var gather_rows(const Var& x, std::span<const int> rows);
/// Multiplies row i of a 2-D tensor by the constant scale[i].
Var row_scale(const Var& x, std::span<const float> scale);
/// x[B*L, D] -> out[B, D], out[b] = sum_l w[b*L+l] * x[b*L+l].
Var segment_weighted_sum(const Var& x, int segments, std::span<const float> weights);
/// Table lookup: ids -> rows of table[V, D].
Var embedding_lookup(const Var& table, std::span<const int> ids);

/// x[N,C,H,W], w[O,C,k,k], b[O]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2x(const Var& x);
Var avg_pool2x(const Var& x);
/// x[N,C] -> [N,C,H,W] replicated over space.
Var broadcast_spatial(const Var& x, int h, int w);

}  // namespace r2i::nn
