#include "disfl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "disfl/rng.hpp"

namespace disfl::tc {

template <class T>
GradCheckReport grad_check(const std::function<Var<T>()>& f, std::vector<Parameter<T>> params, double h,
                           std::uint64_t seed, std::size_t max_coords) {
  if (!(h > 0.0)) fail(ErrorCode::RangeError, "grad_check step must be positive");
  for (auto& p : params) p.zero_grad();
  f().backward();
  std::vector<Tensor<T>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());
  for (auto& p : params) p.zero_grad();

  GradCheckReport report;
  Rng rng(seed);
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    Tensor<T>& x = p.mutable_value();
    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    ParamCheck check{p.name, coords.size(), 0.0};
    for (std::size_t c : coords) {
      const T original = x[c];
      const T up = T(original + h);
      const T down = T(original - h);
      x[c] = up;
      const double f_up = static_cast<double>(f().value().item());
      x[c] = down;
      const double f_down = static_cast<double>(f().value().item());
      x[c] = original;
      // Divide by the step actually taken after rounding to T.
      const double numeric = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = static_cast<double>(analytic[k][c]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      check.max_rel_error = std::max(check.max_rel_error, rel);
    }
    if (report.worst_param.empty() || check.max_rel_error > report.max_rel_error) {
      report.max_rel_error = check.max_rel_error;
      report.worst_param = p.name;
    }
    report.params.push_back(std::move(check));
  }
  return report;
}

template GradCheckReport grad_check(const std::function<Var<float>()>&, std::vector<Parameter<float>>, double,
                                    std::uint64_t, std::size_t);
template GradCheckReport grad_check(const std::function<Var<double>()>&, std::vector<Parameter<double>>, double,
                                    std::uint64_t, std::size_t);

}  // namespace disfl::tc
