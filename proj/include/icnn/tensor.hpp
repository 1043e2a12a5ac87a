#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "icnn/error.hpp"

namespace icnn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense double tensor with reverse-mode autodiff. Each op records a node
// holding its parents and a closure that scatters the node's gradient back
// into them. Graphs are single-use: backward() marks interior nodes dead and
// a second pass through them raises StateError. Not thread-safe; a graph
// must stay on the thread that built it.
class Tensor {
 public:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<Impl>> parents;
    std::function<void(Impl&)> backward_fn;  // reads self.grad, writes parents
  };

  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<double> values);
  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double value);
  static Tensor scalar(double value);

  // Records an autograd node. `backward` receives the finished node (its
  // grad field populated) and must accumulate into the parents' grads via
  // accum_grad. Inside a NoGrad scope, or when no parent tracks gradients,
  // the parents and closure are dropped and a plain tensor is returned.
  static Tensor node(Shape shape, std::vector<double> values,
                     const std::vector<Tensor>& parents,
                     std::function<void(Impl&)> backward);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t ndim() const { return static_cast<int64_t>(shape().size()); }
  int64_t numel() const;
  int64_t dim(int i) const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();
  const double* data() const { return values().data(); }
  double* data() { return mutable_values().data(); }

  double at(const std::vector<int64_t>& idx) const;
  double item() const;  // single-element tensors only

  Tensor& set_requires_grad(bool v);
  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;  // StateError if never populated
  void zero_grad();

  // Seeds the gradient with ones (scalar outputs only) and runs the tape in
  // reverse topological order. Throws StateError if any node on the path was
  // already consumed by a previous call.
  void backward();

  // Helper for backward closures.
  static void accum_grad(Impl& parent, const std::vector<double>& delta);

  Impl* raw() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;
};

// Disables gradient recording for the current thread while alive.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
  static bool active();
};

// Elementwise and linear-algebra primitives. All validate shapes and throw
// ShapeError on mismatch.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor row_sum(const Tensor& a);                      // [B,N] -> [B]
Tensor outer(const Tensor& a, const Tensor& b);       // [B],[M] -> [B,M]
Tensor add_row_bias(const Tensor& a, const Tensor& b);  // [B,M]+[M]

}  // namespace icnn
