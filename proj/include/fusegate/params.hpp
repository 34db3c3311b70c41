#pragma once

#include <string>
#include <vector>

#include "fusegate/tensor.hpp"

namespace fusegate {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable parameters. Registration order is the
// deterministic init order, so a fixed seed reproduces identical models.
class ParamRegistry {
 public:
  Tensor& add(std::string name, Tensor tensor) {
    params_.push_back({std::move(name), std::move(tensor)});
    return params_.back().tensor;
  }

  const std::vector<NamedParam>& all() const { return params_; }

  const Tensor* find(const std::string& name) const {
    for (const NamedParam& p : params_) {
      if (p.name == name) return &p.tensor;
    }
    return nullptr;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const NamedParam& p : params_) n += p.tensor.size();
    return n;
  }

 private:
  std::vector<NamedParam> params_;
};

}  // namespace fusegate
