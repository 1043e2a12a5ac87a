#include "icnn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "icnn/kernels.hpp"

namespace icnn {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {
thread_local int g_no_grad_depth = 0;
}

NoGrad::NoGrad() { ++g_no_grad_depth; }
NoGrad::~NoGrad() { --g_no_grad_depth; }
bool NoGrad::active() { return g_no_grad_depth > 0; }

Tensor Tensor::from_data(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("data size " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(const Shape& shape) {
  return from_data(shape, std::vector<double>(shape_numel(shape), 0.0));
}

Tensor Tensor::full(const Shape& shape, double value) {
  return from_data(shape, std::vector<double>(shape_numel(shape), value));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::node(Shape shape, std::vector<double> values,
                    const std::vector<Tensor>& parents,
                    std::function<void(Impl&)> backward) {
  Tensor out = from_data(std::move(shape), std::move(values));
  if (NoGrad::active()) return out;
  bool track = false;
  for (const auto& p : parents) track = track || p.requires_grad();
  if (!track) return out;
  out.impl_->requires_grad = true;
  out.impl_->parents.reserve(parents.size());
  for (const auto& p : parents) out.impl_->parents.push_back(p.impl_);
  out.impl_->backward_fn = std::move(backward);
  return out;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw StateError("use of undefined tensor");
  return impl_->shape;
}

int64_t Tensor::numel() const { return shape_numel(shape()); }

int64_t Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size()))
    throw ShapeError("dim index " + std::to_string(i) + " out of range for " +
                     shape_str(s));
  return s[i];
}

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw StateError("use of undefined tensor");
  return impl_->values;
}

std::vector<double>& Tensor::mutable_values() {
  if (!impl_) throw StateError("use of undefined tensor");
  return impl_->values;
}

double Tensor::at(const std::vector<int64_t>& idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw ShapeError("index rank " + std::to_string(idx.size()) +
                     " does not match tensor rank " + std::to_string(s.size()));
  int64_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= s[i])
      throw ShapeError("index out of bounds at axis " + std::to_string(i));
    off = off * s[i] + idx[i];
  }
  return impl_->values[off];
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->values[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  if (!impl_) throw StateError("use of undefined tensor");
  impl_->requires_grad = v;
  return *this;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!impl_) throw StateError("use of undefined tensor");
  if (impl_->grad.empty())
    throw StateError("gradient requested but never populated");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_) throw StateError("use of undefined tensor");
  impl_->grad.clear();
}

void Tensor::accum_grad(Impl& parent, const std::vector<double>& delta) {
  if (!parent.requires_grad) return;
  if (parent.grad.empty()) parent.grad.assign(parent.values.size(), 0.0);
  for (size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

void Tensor::backward() {
  if (!impl_) throw StateError("backward() on undefined tensor");
  if (numel() != 1)
    throw ShapeError("backward() requires a scalar output, got " +
                     shape_str(shape()));
  if (!impl_->requires_grad)
    throw StateError("backward() on a tensor with no recorded graph");
  if (impl_->consumed)
    throw StateError("backward() through an already-consumed graph");

  // Iterative post-order DFS; children finish before parents, so reversing
  // gives an order where every node is processed before its parents. The
  // containers hold owning pointers: processing clears each node's parent
  // list, which may drop the graph's only other reference to an upstream
  // node that still has to run.
  std::vector<std::shared_ptr<Impl>> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::pair<std::shared_ptr<Impl>, size_t>> stack;
  stack.emplace_back(impl_, 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed)
      throw StateError("backward() reached an already-consumed node");
    if (next < node->parents.size()) {
      std::shared_ptr<Impl> p = node->parents[next++];
      if (p->backward_fn && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.emplace_back(std::move(p), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = it->get();
    if (!node->backward_fn) continue;  // leaf parameters stay live
    if (!node->grad.empty()) node->backward_fn(*node);
    // The tape is one-shot; break it up as we go.
    node->consumed = true;
    node->backward_fn = nullptr;
    node->parents.clear();
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::node(a.shape(), std::move(out), {a, b},
                      [](Tensor::Impl& self) {
                        Tensor::accum_grad(*self.parents[0], self.grad);
                        Tensor::accum_grad(*self.parents[1], self.grad);
                      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::node(a.shape(), std::move(out), {a, b},
                      [](Tensor::Impl& self) {
                        Tensor::accum_grad(*self.parents[0], self.grad);
                        auto& p = *self.parents[1];
                        if (!p.requires_grad) return;
                        if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
                        for (size_t i = 0; i < self.grad.size(); ++i)
                          p.grad[i] -= self.grad[i];
                      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  std::vector<double> av = a.values();
  std::vector<double> bvv = bv;
  return Tensor::node(
      a.shape(), std::move(out), {a, b},
      [av = std::move(av), bvv = std::move(bvv)](Tensor::Impl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          if (pa.grad.empty()) pa.grad.assign(pa.values.size(), 0.0);
          for (size_t i = 0; i < self.grad.size(); ++i)
            pa.grad[i] += self.grad[i] * bvv[i];
        }
        if (pb.requires_grad) {
          if (pb.grad.empty()) pb.grad.assign(pb.values.size(), 0.0);
          for (size_t i = 0; i < self.grad.size(); ++i)
            pb.grad[i] += self.grad[i] * av[i];
        }
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (double& v : out) v += s;
  return Tensor::node(a.shape(), std::move(out), {a}, [](Tensor::Impl& self) {
    Tensor::accum_grad(*self.parents[0], self.grad);
  });
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= s;
  return Tensor::node(a.shape(), std::move(out), {a}, [s](Tensor::Impl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
    for (size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * s;
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  std::vector<double> mask(a.values());
  return Tensor::node(a.shape(), std::move(out), {a},
                      [mask = std::move(mask)](Tensor::Impl& self) {
                        auto& p = *self.parents[0];
                        if (!p.requires_grad) return;
                        if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
                        for (size_t i = 0; i < self.grad.size(); ++i)
                          if (mask[i] > 0.0) p.grad[i] += self.grad[i];
                      });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul expects rank-2 tensors, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int64_t m = trans_a ? a.dim(1) : a.dim(0);
  int64_t ka = trans_a ? a.dim(0) : a.dim(1);
  int64_t kb = trans_b ? b.dim(1) : b.dim(0);
  int64_t n = trans_b ? b.dim(0) : b.dim(1);
  if (ka != kb)
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(m * n));
  kernels::matmul(a.data(), b.data(), out.data(), m, n, ka, trans_a, trans_b,
                  false);
  std::vector<double> av = a.values();
  std::vector<double> bv = b.values();
  return Tensor::node(
      {m, n}, std::move(out), {a, b},
      [av = std::move(av), bv = std::move(bv), m, n, ka, trans_a,
       trans_b](Tensor::Impl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        // dA = dC B^T (layouts permuted to honor the transpose flags)
        if (pa.requires_grad) {
          if (pa.grad.empty()) pa.grad.assign(pa.values.size(), 0.0);
          if (!trans_a)
            kernels::matmul(self.grad.data(), bv.data(), pa.grad.data(), m, ka,
                            n, false, !trans_b, true);
          else
            kernels::matmul(bv.data(), self.grad.data(), pa.grad.data(), ka, m,
                            n, trans_b, true, true);
        }
        if (pb.requires_grad) {
          if (pb.grad.empty()) pb.grad.assign(pb.values.size(), 0.0);
          if (!trans_b)
            kernels::matmul(av.data(), self.grad.data(), pb.grad.data(), ka, n,
                            m, !trans_a, false, true);
          else
            kernels::matmul(self.grad.data(), av.data(), pb.grad.data(), n, ka,
                            m, true, trans_a, true);
        }
      });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return Tensor::node({1}, {acc}, {a}, [](Tensor::Impl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  int64_t n = a.numel();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  double inv = 1.0 / static_cast<double>(n);
  return Tensor::node({1}, {acc * inv}, {a}, [inv](Tensor::Impl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
    for (double& g : p.grad) g += self.grad[0] * inv;
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " +
                     shape_str(shape) + " changes element count");
  std::vector<double> out(a.values());
  return Tensor::node(shape, std::move(out), {a}, [](Tensor::Impl& self) {
    Tensor::accum_grad(*self.parents[0], self.grad);
  });
}

Tensor row_sum(const Tensor& a) {
  if (a.ndim() != 2)
    throw ShapeError("row_sum expects rank-2, got " + shape_str(a.shape()));
  int64_t b = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(b), 0.0);
  const double* x = a.data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < n; ++j) out[i] += x[i * n + j];
  return Tensor::node({b}, std::move(out), {a}, [b, n](Tensor::Impl& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    if (p.grad.empty()) p.grad.assign(p.values.size(), 0.0);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[i];
  });
}

Tensor outer(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1)
    throw ShapeError("outer expects rank-1 tensors, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int64_t n = a.dim(0), m = b.dim(0);
  std::vector<double> out(static_cast<size_t>(n * m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j)
      out[i * m + j] = a.values()[i] * b.values()[j];
  std::vector<double> av = a.values();
  std::vector<double> bv = b.values();
  return Tensor::node(
      {n, m}, std::move(out), {a, b},
      [av = std::move(av), bv = std::move(bv), n, m](Tensor::Impl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          if (pa.grad.empty()) pa.grad.assign(pa.values.size(), 0.0);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j)
              pa.grad[i] += self.grad[i * m + j] * bv[j];
        }
        if (pb.requires_grad) {
          if (pb.grad.empty()) pb.grad.assign(pb.values.size(), 0.0);
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < m; ++j)
              pb.grad[j] += self.grad[i * m + j] * av[i];
        }
      });
}

Tensor add_row_bias(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 1 || a.dim(1) != b.dim(0))
    throw ShapeError("add_row_bias: incompatible shapes " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int64_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(a.values());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[i * m + j] += b.values()[j];
  return Tensor::node({n, m}, std::move(out), {a, b},
                      [n, m](Tensor::Impl& self) {
                        auto& pa = *self.parents[0];
                        auto& pb = *self.parents[1];
                        Tensor::accum_grad(pa, self.grad);
                        if (pb.requires_grad) {
                          if (pb.grad.empty())
                            pb.grad.assign(pb.values.size(), 0.0);
                          for (int64_t i = 0; i < n; ++i)
                            for (int64_t j = 0; j < m; ++j)
                              pb.grad[j] += self.grad[i * m + j];
                        }
                      });
}

}  // namespace icnn
