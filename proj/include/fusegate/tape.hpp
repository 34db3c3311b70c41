#pragma once

#include <functional>
#include <vector>

#include "fusegate/tensor.hpp"

namespace fusegate {

// Reverse-mode computation tape. Each executed primitive records the nodes
// it touched plus a closure that pulls the output adjoint back to the input
// adjoints. backward() replays the records in reverse order exactly once;
// adjoints accumulate additively, so a tensor consumed k times receives the
// sum of k contributions. The tape is cleared after backward so the next
// step starts fresh.
class Tape {
 public:
  struct Record {
    std::vector<detail::NodePtr> nodes;  // inputs and output of the op
    std::function<void()> pull;          // adds d(output) into d(inputs)
  };

  void record(std::vector<detail::NodePtr> nodes, std::function<void()> pull) {
    records_.push_back({std::move(nodes), std::move(pull)});
  }

  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Seeds d(loss) = 1 and propagates adjoints to every requires_grad tensor
  // reachable through the tape. Loss must be scalar and finite. A tape with
  // no recorded ops (constant loss) is a no-op, not an error.
  void backward(const Tensor& loss);

 private:
  std::vector<Record> records_;
};

}  // namespace fusegate
