#include "agrissl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace agrissl {

namespace {

double gaussian(RandomStream& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::MatrixXd gaussian_matrix(RandomStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian(rng);
  }
  return m;
}

}  // namespace

LossGradTrial loss_gradcheck_trial(std::uint64_t seed, double h) {
  RandomStream rng(seed);
  LossGradTrial t;
  t.n = 4 + static_cast<int>(rng.uniform_index(13));
  t.d = 2 + static_cast<int>(rng.uniform_index(7));
  const Eigen::MatrixXd z1 = gaussian_matrix(rng, t.n, t.d);
  const Eigen::MatrixXd mix = gaussian_matrix(rng, t.d, t.d);
  const Eigen::MatrixXd z2 = z1 * mix + 0.5 * gaussian_matrix(rng, t.n, t.d);
  t.max_relative_error = twins::finite_diff_check<double>(z1, z2, twins::BTLossConfig{}, h);
  return t;
}

tiny::GradCheckReport model_gradcheck_trial(std::uint64_t seed, double h) {
  tiny::Architecture arch;
  arch.input_width = 4;
  arch.input_height = 4;
  arch.embedding = 4;
  const tiny::TinyModel model = tiny::make_model(arch, seed);
  RandomStream rng(derive_seed(seed, 1));
  constexpr int kBatch = 4;
  tiny::Matrix view1(kBatch, arch.input_size());
  tiny::Matrix view2(kBatch, arch.input_size());
  for (Eigen::Index i = 0; i < view1.size(); ++i) {
    view1.data()[i] = rng.uniform();
    view2.data()[i] = std::clamp(view1.data()[i] + rng.uniform(-0.2, 0.2), 0.0, 1.0);
  }
  return tiny::model_finite_diff_check(model, view1, view2, twins::BTLossConfig{}, h);
}

}  // namespace agrissl
