#ifndef DLNLAB_TENSOR_HPP
#define DLNLAB_TENSOR_HPP

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dlnlab/errors.hpp"

namespace dlnlab {

// 64-byte aligned storage. Keeping every buffer in the same alignment class
// makes the vectorized matmul kernels pick identical summation orders for
// identical shapes, which bit-exact replay depends on.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(kAlign));
  }
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

using Dvec = std::vector<double, AlignedAllocator<double>>;

// Everything in the lab is a dense row-major matrix of 64-bit floats;
// vectors are single-row matrices and scalars are 1x1.
struct Shape {
  int rows = 0;
  int cols = 0;

  int64_t numel() const { return static_cast<int64_t>(rows) * cols; }
  bool operator==(const Shape& o) const { return rows == o.rows && cols == o.cols; }
  std::string str() const {
    return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
  }
};

struct Array {
  Shape shape;
  Dvec data;

  Array() = default;
  Array(Shape s, Dvec d) : shape(s), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape.numel()) {
      throw ShapeMismatch("Array data size " + std::to_string(data.size()) +
                          " does not match shape " + shape.str());
    }
  }

  static Array zeros(Shape s) {
    return Array(s, Dvec(static_cast<size_t>(s.numel()), 0.0));
  }
  static Array full(Shape s, double v) {
    return Array(s, Dvec(static_cast<size_t>(s.numel()), v));
  }
  static Array scalar(double v) { return Array({1, 1}, {v}); }
  static Array row(Dvec d) {
    const int n = static_cast<int>(d.size());
    return Array({1, n}, std::move(d));
  }

  double& at(int i, int j) { return data[static_cast<size_t>(i) * shape.cols + j]; }
  double at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape.cols + j];
  }
  double item() const {
    if (shape.numel() != 1) throw NotScalar("Array::item on shape " + shape.str());
    return data[0];
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// A named persistent learnable array. Gradients accumulate here during
// Tape::backward and are consumed by the optimizer.
class Parameter {
 public:
  Parameter(std::string name, Array v)
      : value(std::move(v)), grad(Array::zeros(value.shape)),
        name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void zero_grad() { grad.fill(0.0); }

  Array value;
  Array grad;

 private:
  std::string name_;
};

class Tape;

// Lightweight handle to a tape node.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  const Array& value() const;
  const Array& grad() const;
  bool requires_grad() const;
  int id() const { return id_; }
  double item() const { return value().item(); }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Append-only record of forward ops; insertion order is a topological order,
// so backward is a single reverse sweep. One tape per training step; tapes
// and their tensors are confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Tensor constant(Array v);
  Tensor leaf(Array v, bool requires_grad);
  // View of a parameter; backward accumulates into p.grad. Repeated calls on
  // the same tape return the same node.
  Tensor input(Parameter& p);

  // Core ops.
  Tensor matmul(Tensor a, Tensor b);
  Tensor transpose(Tensor a);
  Tensor add(Tensor a, Tensor b);  // same shape, or b a [1, cols] bias row
  Tensor sub(Tensor a, Tensor b);  // same shape
  Tensor mul(Tensor a, Tensor b);  // elementwise, same shape
  Tensor scale(Tensor a, double c);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor slice_rows(Tensor a, int r0, int r1);
  Tensor slice_cols(Tensor a, int c0, int c1);
  Tensor gather_rows(Tensor table, std::vector<int> ids);
  Tensor softmax(Tensor a);  // per row; rows sum to 1 within 1e-12
  Tensor relu(Tensor a);
  Tensor tanh(Tensor a);
  Tensor sigmoid(Tensor a);
  Tensor abs(Tensor a);  // subgradient at 0 is 0
  Tensor layer_norm(Tensor a, Tensor gain, Tensor bias, double eps = 1e-5);
  Tensor mean(Tensor a);  // scalar mean over all entries
  Tensor sum(Tensor a);   // scalar sum over all entries

  // Losses.
  Tensor mse_loss(Tensor pred, Tensor target);
  Tensor cross_entropy(Tensor logits, std::vector<int> target_ids);

  // Reverse sweep from a scalar loss. Gradients of all reachable
  // requires-grad tensors are accumulated; parameter leaves accumulate
  // into Parameter::grad.
  void backward(Tensor loss);

  size_t size() const { return nodes_.size(); }

 private:
  friend class Tensor;

  struct Node {
    Array value;
    Array grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    // Pulls this node's grad into its parents' grads.
    std::function<void(Tape&, int)> back;
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  int push(Array value, bool requires_grad);
  Tensor handle(int id) { return Tensor(this, id); }
  void check_same_tape(const Tensor& t) const;

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

}  // namespace dlnlab

#endif  // DLNLAB_TENSOR_HPP
