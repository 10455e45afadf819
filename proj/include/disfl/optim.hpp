#pragma once

#include <cstdint>
#include <vector>

#include "disfl/autodiff.hpp"

namespace disfl::tc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over one parameter group. Holds handles that share
/// storage with the model's parameters.
template <class T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>> params, AdamConfig config);

  /// One update from the current gradients. Gradients are left untouched.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<Parameter<T>> params_;
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace disfl::tc
