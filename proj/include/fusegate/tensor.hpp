#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fusegate/rng.hpp"

namespace fusegate {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

namespace detail {

// Storage node shared by Tensor handles and tape records. Gradient buffers
// are allocated lazily on first touch and always match the value shape.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until ensure_grad()
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) grad.assign(grad.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<TensorNode>;

}  // namespace detail

// Dense row-major tensor of doubles with an optional gradient buffer.
// Copying a Tensor copies the handle, not the storage; all ops allocate
// fresh output nodes, so value buffers are never aliased between results.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  // Fan-in scaled uniform init in [-bound, bound].
  static Tensor uniform(Shape shape, Rng& rng, double bound,
                        bool requires_grad = true);

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> data_mut() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->zero_grad(); }

  // Value of a scalar (size-1) tensor; throws ContractError otherwise.
  double item() const;

  bool all_finite() const;

  detail::NodePtr node() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;

  friend Tensor make_tensor(Shape shape, bool requires_grad);
};

// Internal factory used by ops to allocate outputs.
Tensor make_tensor(Shape shape, bool requires_grad);

}  // namespace fusegate
