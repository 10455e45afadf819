#pragma once

#include <cstdint>
#include <string>

#include "disfl/gradcheck.hpp"

namespace disfl {

struct LossGradCheck {
  tc::GradCheckReport discriminator;  // full discriminator loss, all encoder+discriminator params
  tc::GradCheckReport generator;      // full generator loss, generator params
  double max_rel_error = 0.0;
  std::string worst_param;

  bool passed(double tolerance = 1e-3) const { return max_rel_error < tolerance; }
};

/// Finite-difference check of both training losses on a tiny random model
/// (d=16, L=8, 2 layers, 2 heads) in double precision. Parameters are drawn
/// from N(0, param_scale) (gains around 1) rather than the training init,
/// whose 0.02 scale leaves gradients too small to difference reliably.
LossGradCheck check_loss_gradients(std::uint64_t seed, double h = 1e-3, double param_scale = 0.3,
                                   std::size_t max_coords = 64);

}  // namespace disfl
