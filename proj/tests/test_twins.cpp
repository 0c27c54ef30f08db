#include <doctest.h>

#include <cmath>
#include <numeric>

#include "agrissl/gradcheck.hpp"
#include "agrissl/random.hpp"
#include "agrissl/twins.hpp"

using namespace agrissl;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(RandomStream& rng, int rows, int cols) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
  }
  return m;
}

// Column standardization with plain loops.
MatrixXd normalize_loop(const MatrixXd& z) {
  MatrixXd out(z.rows(), z.cols());
  for (int j = 0; j < z.cols(); ++j) {
    double mean = 0;
    for (int i = 0; i < z.rows(); ++i) mean += z(i, j);
    mean /= z.rows();
    double var = 0;
    for (int i = 0; i < z.rows(); ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
    const double sd = std::sqrt(var / z.rows());
    for (int i = 0; i < z.rows(); ++i) out(i, j) = (z(i, j) - mean) / (sd + 1e-5);
  }
  return out;
}

MatrixXd cross_loop(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd c(a.cols(), b.cols());
  for (int i = 0; i < a.cols(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (int k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      c(i, j) = s / a.rows();
    }
  }
  return c;
}

double loss_loop(const MatrixXd& c, double lambda) {
  double l = 0;
  for (int i = 0; i < c.rows(); ++i) {
    for (int j = 0; j < c.cols(); ++j) {
      l += i == j ? (1 - c(i, i)) * (1 - c(i, i)) : lambda * c(i, j) * c(i, j);
    }
  }
  return l;
}

}  // namespace

TEST_CASE("bt_loss hand values") {
  CHECK(std::abs(twins::bt_loss(MatrixXd::Identity(5, 5))) <= 1e-12);
  for (int d = 1; d <= 9; ++d) CHECK(twins::bt_loss(MatrixXd::Zero(d, d)) == d);
  MatrixXd c(2, 2);
  c << 1, 0.5, 0.5, 1;
  CHECK(std::abs(twins::bt_loss(c, {5e-3}) - 0.0025) <= 1e-12);
  const auto [inv, red] = twins::bt_loss_terms(c);
  CHECK(inv == 0.0);
  CHECK(red == 0.5);
  CHECK_THROWS_AS(twins::bt_loss(MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("bt_loss matches the loop and is non-negative") {
  RandomStream rng(51);
  for (int t = 0; t < 50; ++t) {
    const int d = 1 + static_cast<int>(rng.uniform_index(8));
    const MatrixXd c = random_matrix(rng, d, d);
    const double lambda = rng.uniform(1e-3, 1.0);
    const double l = twins::bt_loss(c, {lambda});
    CHECK(l == doctest::Approx(loss_loop(c, lambda)).epsilon(1e-12));
    CHECK(l > 0.0);
  }
}

TEST_CASE("batch_normalize") {
  SUBCASE("standardized column is unchanged") {
    MatrixXd z(4, 1);
    z << -1, -1, 1, 1;
    const MatrixXd n = twins::batch_normalize(z);
    CHECK((n - z).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("constant column becomes zero") {
    const MatrixXd n = twins::batch_normalize(MatrixXd::Constant(5, 2, 3.7));
    CHECK(n.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("random batches match the loop") {
    RandomStream rng(52);
    for (int t = 0; t < 20; ++t) {
      const MatrixXd z = random_matrix(rng, 8, 4);
      const MatrixXd n = twins::batch_normalize(z);
      CHECK((n - normalize_loop(z)).cwiseAbs().maxCoeff() < 1e-12);
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(n.col(j).mean()) < 1e-7);
        const double sd = std::sqrt((n.col(j).array() - n.col(j).mean()).square().mean());
        CHECK(std::abs(sd - 1.0) < 1e-3);
      }
    }
  }
  CHECK_THROWS_AS(twins::batch_normalize(MatrixXd::Zero(1, 3)), ShapeError);
}

TEST_CASE("cross_correlation") {
  MatrixXd z(4, 3);
  z << 1, 2, 0.5, -1, 0, 1.5, 2, -2, -1, 0.25, 3, 0;
  MatrixXd w(4, 3);
  w << 0.5, -1, 2, 1, 1, -1, -2, 0.5, 0, 3, 1, 1;
  CHECK((twins::cross_correlation(z, w) - cross_loop(z, w)).cwiseAbs().maxCoeff() < 1e-10);

  RandomStream rng(53);
  const MatrixXd zn = twins::batch_normalize(random_matrix(rng, 16, 5));
  const MatrixXd self = twins::cross_correlation(zn, zn);
  const MatrixXd anti = twins::cross_correlation(zn, MatrixXd(-zn));
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(self(i, i) - 1.0) < 1e-3);
    CHECK(std::abs(anti(i, i) + 1.0) < 1e-3);
  }
  CHECK_THROWS_AS(twins::cross_correlation(zn, MatrixXd(zn.leftCols(4))), ShapeError);
}

TEST_CASE("self-correlation diagonal is (std/(std+eps))^2") {
  RandomStream rng(54);
  const MatrixXd z = 1e-4 * random_matrix(rng, 10, 3);
  const MatrixXd c = twins::cross_correlation(twins::batch_normalize(z), twins::batch_normalize(z));
  const auto sd = twins::column_std(z);
  for (int j = 0; j < 3; ++j) {
    const double r = sd(j) / (sd(j) + 1e-5);
    CHECK(c(j, j) == doctest::Approx(r * r).epsilon(1e-10));
  }
}

TEST_CASE("loss is invariant to a shared column permutation and symmetric in the views") {
  RandomStream rng(55);
  for (int t = 0; t < 20; ++t) {
    const int d = 2 + static_cast<int>(rng.uniform_index(7));
    const MatrixXd z1 = random_matrix(rng, 12, d);
    const MatrixXd z2 = random_matrix(rng, 12, d);
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = d - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
    MatrixXd p1(12, d), p2(12, d);
    for (int j = 0; j < d; ++j) {
      p1.col(j) = z1.col(perm[j]);
      p2.col(j) = z2.col(perm[j]);
    }
    const double l = twins::bt_loss_from_embeddings(z1, z2);
    CHECK(twins::bt_loss_from_embeddings(p1, p2) == doctest::Approx(l).epsilon(1e-12));
    CHECK(twins::bt_loss_from_embeddings(z2, z1) == doctest::Approx(l).epsilon(1e-12));

    const auto g = twins::bt_loss_grad(z1, z2);
    const auto s = twins::bt_loss_grad(z2, z1);
    CHECK((g.grad_z1 - s.grad_z2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((g.grad_z2 - s.grad_z1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((g.c - s.c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("loss gradient against central differences") {
  RandomStream rng(56);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd z1 = random_matrix(rng, 8, 4);
    const MatrixXd z2 = z1 + 0.7 * random_matrix(rng, 8, 4);
    CHECK(twins::finite_diff_check<double>(z1, z2, {}, 1e-4) < 1e-4);
  }
  for (std::uint64_t s = 0; s < 30; ++s) {
    const LossGradTrial trial = loss_gradcheck_trial(s);
    CHECK(trial.n >= 4);
    CHECK(trial.n <= 16);
    CHECK(trial.d >= 2);
    CHECK(trial.d <= 8);
    CHECK(trial.max_relative_error < kLossGradTolerance);
  }
  CHECK(twins::relative_error(3.0, 3.0) == 0.0);
  CHECK(twins::relative_error(0.0, 1e-12) == doctest::Approx(1e-4));

  // A coarse step is reported as is.
  const MatrixXd z1 = random_matrix(rng, 6, 3);
  const MatrixXd z2 = random_matrix(rng, 6, 3);
  CHECK(twins::finite_diff_check<double>(z1, z2, {}, 1.0) > 1e-3);
  CHECK_THROWS_AS(twins::finite_diff_check<double>(z1, z2, {}, 0.0), ParameterError);
}

TEST_CASE("gradient structure") {
  RandomStream rng(57);
  const MatrixXd z1 = random_matrix(rng, 10, 4);
  const MatrixXd z2 = z1 + 0.3 * random_matrix(rng, 10, 4);

  // dL/dC at C = I: invariance part vanishes, only lambda * 2C remains.
  const MatrixXd dc = twins::bt_loss_dc(MatrixXd::Identity(4, 4), {0.5});
  CHECK(dc.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(dc.cwiseAbs().maxCoeff() == 0.0);

  // The redundancy part of the gradient is linear in lambda.
  const auto g0 = twins::bt_loss_grad(z1, z2, {0.0});
  const auto g1 = twins::bt_loss_grad(z1, z2, {0.1});
  const auto g2 = twins::bt_loss_grad(z1, z2, {0.2});
  CHECK(((g2.grad_z1 - g0.grad_z1) - 2.0 * (g1.grad_z1 - g0.grad_z1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g0.loss == doctest::Approx(twins::bt_loss_terms(g0.c).first).epsilon(1e-14));

  // Per-column gradients of a normalized batch sum to zero (shift invariance).
  for (int j = 0; j < 4; ++j) CHECK(std::abs(g1.grad_z1.col(j).sum()) < 1e-12);

  // Identical views in the perfectly decorrelated case: loss near zero.
  MatrixXd e(4, 2);
  e << 1, 1, 1, -1, -1, 1, -1, -1;
  const auto ge = twins::bt_loss_grad(e, e, {5e-3});
  CHECK(ge.loss < 1e-8);
  CHECK(ge.grad_z1.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("config checks") {
  CHECK_THROWS_AS(twins::check_config({0.0}), ParameterError);
  CHECK_THROWS_AS(twins::check_config({-1.0}), ParameterError);
  CHECK_NOTHROW(twins::check_config({}));
  CHECK(twins::BTLossConfig{}.lambda == 5e-3);
}
