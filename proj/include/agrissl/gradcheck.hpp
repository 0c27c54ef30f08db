#pragma once

#include <cstdint>

#include "agrissl/tinytrain.hpp"

namespace agrissl {

inline constexpr double kLossGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;
inline constexpr double kGradCheckStep = 1e-4;

struct LossGradTrial {
  int n = 0;
  int d = 0;
  double max_relative_error = 0.0;
};

/// Random batch pair with n in [4, 16], d in [2, 8]; the second view is a
/// noisy linear image of the first so C is far from zero and from identity.
LossGradTrial loss_gradcheck_trial(std::uint64_t seed, double h = kGradCheckStep);

/// Random tiny model (4x4 input, D = 4) on a 4-image batch pair.
tiny::GradCheckReport model_gradcheck_trial(std::uint64_t seed, double h = kGradCheckStep);

}  // namespace agrissl
