#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pldlab/errors.hpp"

namespace pldlab {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff on a flat tape.
//
// A Tensor is a shared handle to a node holding a dense row-major value
// buffer and (lazily) a gradient buffer of the same shape. Operators in
// ops.hpp compute the forward value eagerly and, if a Graph is active and
// some input requires grad, push a backward closure onto the tape. Recording
// order is creation order, which is already a topological order, so
// Graph::backward just walks the tape in reverse and lets each closure
// accumulate (+=) into its parents' grads. Each closure runs exactly once,
// after every consumer of its output has run.
// ---------------------------------------------------------------------------

template <class T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until ensure_grad()
  bool requires_grad = false;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (int d : shape) s *= d;
    return s;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.n_ = std::make_shared<TensorNode<T>>();
    t.n_->shape = std::move(shape);
    t.n_->value.assign(t.n_->size(), T(0));
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> data,
                     bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (static_cast<std::int64_t>(data.size()) != t.size())
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(t.shape()));
    t.n_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    Tensor t = zeros({1}, requires_grad);
    t.n_->value[0] = v;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return n_->size(); }
  bool requires_grad() const { return n_->requires_grad; }

  T* data() { return n_->value.data(); }
  const T* data() const { return n_->value.data(); }
  std::vector<T>& values() { return n_->value; }
  const std::vector<T>& values() const { return n_->value; }

  T* grad_data() {
    n_->ensure_grad();
    return n_->grad.data();
  }
  const std::vector<T>& grad() const { return n_->grad; }
  bool has_grad() const { return !n_->grad.empty(); }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  T item() const {
    if (size() != 1)
      throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return n_->value[0];
  }

  std::shared_ptr<TensorNode<T>> node() const { return n_; }

 private:
  std::shared_ptr<TensorNode<T>> n_;
};

// Tape. One per training step (or per forward when only inference-time
// gradients are wanted). Activate with GraphScope; ops check the active
// graph through Graph::active().
template <class T>
class Graph {
 public:
  void record(std::function<void()> back) { steps_.push_back(std::move(back)); }

  std::size_t num_steps() const { return steps_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs the tape backwards.
  void backward(Tensor<T>& loss) {
    if (loss.size() != 1)
      throw ShapeError("backward() needs a scalar loss, got " +
                       shape_str(loss.shape()));
    loss.grad_data()[0] += T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  static Graph*& active() {
    thread_local Graph* g = nullptr;
    return g;
  }

 private:
  std::vector<std::function<void()>> steps_;
};

// RAII activation of a graph on the current thread.
template <class T>
class GraphScope {
 public:
  explicit GraphScope(Graph<T>& g) : prev_(Graph<T>::active()) {
    Graph<T>::active() = &g;
  }
  ~GraphScope() { Graph<T>::active() = prev_; }
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph<T>* prev_;
};

}  // namespace pldlab
