#include "fusegate/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "fusegate/errors.hpp"

namespace fusegate {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t v = 1;
  for (std::size_t e : shape) v *= e;
  return v;
}

Tensor make_tensor(Shape shape, bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " +
                                     shape_to_string(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->value.assign(shape_volume(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return make_tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  for (double& v : t.data_mut()) v = fill;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return full({1}, v, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  if (data.size() != t.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not fill shape " + shape_to_string(t.shape()));
  }
  t.node()->value = std::move(data);
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double bound,
                       bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  for (double& v : t.data_mut()) v = rng.uniform(-bound, bound);
  return t;
}

double Tensor::item() const {
  if (!node_ || node_->value.size() != 1) {
    throw ContractError("item() requires a scalar tensor, got " +
                        (node_ ? shape_to_string(node_->shape)
                               : std::string("<empty>")));
  }
  return node_->value[0];
}

bool Tensor::all_finite() const {
  for (double v : node_->value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fusegate
