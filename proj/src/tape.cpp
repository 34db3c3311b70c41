#include "fusegate/tape.hpp"

#include <cmath>
#include <unordered_set>

#include "fusegate/errors.hpp"

namespace fusegate {

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw ContractError(
        "backward requires a scalar loss, got " +
        (loss.valid() ? shape_to_string(loss.shape()) : std::string("<empty>")));
  }
  if (!std::isfinite(loss.item())) {
    throw ContractError("backward requires a finite loss");
  }
  if (records_.empty()) return;  // constant loss: nothing to populate

  // Each backward pass computes exact adjoints for this loss, so gradients
  // of every node on the tape are reset before accumulation starts.
  std::unordered_set<detail::TensorNode*> seen;
  for (const Record& rec : records_) {
    for (const detail::NodePtr& node : rec.nodes) {
      if (node->requires_grad && seen.insert(node.get()).second) {
        node->ensure_grad();
        node->zero_grad();
      }
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->pull();
  clear();
}

}  // namespace fusegate
