#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "disfl/autodiff.hpp"

namespace disfl::tc {

struct ParamCheck {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<ParamCheck> params;
};

/// Compares analytic gradients of the scalar `f` with central differences
/// (f(x+h) - f(x-h)) / 2h on up to `max_coords` sampled coordinates per
/// parameter. Error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
/// `f` must rebuild the graph from the parameters on every call.
template <class T>
GradCheckReport grad_check(const std::function<Var<T>()>& f, std::vector<Parameter<T>> params, double h,
                           std::uint64_t seed = 0, std::size_t max_coords = 64);

}  // namespace disfl::tc
