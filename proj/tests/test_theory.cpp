#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"
#include "tilted/theory.hpp"

using namespace tilted;
using namespace tilted::theory;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAlpha = 0.70710678118654752440;

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(Square, SmallExample) {
  const Eigen::MatrixXd X = make_square(5, kAlpha);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const bool inside = std::abs(i - 2) <= 1 && std::abs(j - 2) <= 1;
      EXPECT_EQ(X(i, j), inside ? 1.0 : 0.0) << i << "," << j;
    }
}

TEST(Square, AxisAlignedIsRankOne) {
  const Eigen::MatrixXd X = make_square(64, kAlpha);
  const Eigen::VectorXd s = singular_values(X);
  EXPECT_GT(s(0), 1.0);
  EXPECT_LT(s(1), 1e-10 * s(0));
  const Eigen::VectorXd u = square_factor(64, kAlpha);
  EXPECT_EQ((u * u.transpose() - X).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Square, RejectsBadArguments) {
  EXPECT_THROW(make_square(2, 0.5), UsageError);
  EXPECT_THROW(make_square(16, 0.0), UsageError);
  EXPECT_THROW(make_square(16, 0.8), UsageError);
}

TEST(Square, QuarterTurnIsSameSquare) {
  EXPECT_EQ((rotated_square(33, 0.5, kPi / 2) - make_square(33, 0.5)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Resample, Identities) {
  Rng rng(3);
  const int n = 9;
  const Eigen::MatrixXd in = random_matrix(rng, n, n);
  EXPECT_EQ((resample_rotate(in, 0.0) - in).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::MatrixXd q = resample_rotate(in, kPi / 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) EXPECT_DOUBLE_EQ(q(i, j), in(j, n - 1 - i));
  // the center pixel is fixed for any angle
  for (double nu : {0.3, 1.0, 2.5}) EXPECT_NEAR(resample_rotate(in, nu)(4, 4), in(4, 4), 1e-12);
}

TEST(Resample, MatchesDirectSamplingInterior) {
  // Away from the edges both models see the same indicator.
  const int n = 129;
  const Eigen::MatrixXd a = resample_rotate(make_square(n, 0.5), 0.4);
  const Eigen::MatrixXd b = rotated_square(n, 0.5, 0.4);
  EXPECT_LT((a - b).cwiseAbs().sum() / (b.sum()), 0.05);
  EXPECT_EQ(a(64, 64), 1.0);
  EXPECT_EQ(a(0, 0), 0.0);
}

TEST(Svd, DiagonalExample) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 4);
  X.diagonal() << 1.0, 4.0, 2.0, 3.0;
  const Eigen::VectorXd s = singular_values(X);
  EXPECT_NEAR(s(0), 4.0, 1e-12);
  EXPECT_NEAR(s(3), 1.0, 1e-12);
  EXPECT_NEAR(svd_rank_error(X, 2), (4.0 + 1.0) / 16.0, 1e-12);
  EXPECT_NEAR(svd_rank_error(X, 0), 30.0 / 16.0, 1e-12);
  EXPECT_NEAR(svd_rank_error(X, 4), 0.0, 1e-12);
}

TEST(Svd, EckartYoungAgainstRandomFactorizations) {
  Rng rng(11);
  const int n = 12, F = 3;
  const Eigen::MatrixXd X = random_matrix(rng, n, n);
  const double best = svd_rank_error(X, F);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd trunc = svd.matrixU().leftCols(F) * svd.singularValues().head(F).asDiagonal() *
                                svd.matrixV().leftCols(F).transpose();
  EXPECT_NEAR((X - trunc).squaredNorm() / (n * n), best, 1e-12);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd A = random_matrix(rng, n, F), B = random_matrix(rng, F, n);
    // least-squares optimal B for this A
    const Eigen::MatrixXd Bopt = A.colPivHouseholderQr().solve(X);
    EXPECT_GE((X - A * B).squaredNorm() / (n * n), best);
    EXPECT_GE((X - A * Bopt).squaredNorm() / (n * n), best - 1e-12);
  }
}

TEST(Svd, NonFiniteInput) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 3);
  X(1, 1) = std::nan("");
  EXPECT_THROW(singular_values(X), NumericError);
}

TEST(Svd, MinimalRank) {
  Eigen::VectorXd s(3);
  s << 4.0, 2.0, 1.0;
  // n = 4: errors are 21/16, 5/16, 1/16, 0
  EXPECT_EQ(minimal_rank_for_psnr(s, 4, 0.0), 1);
  EXPECT_EQ(minimal_rank_for_psnr(s, 4, 10.0), 2);  // 1/16 is 12.04 dB
  EXPECT_EQ(minimal_rank_for_psnr(s, 4, 12.0), 2);
  EXPECT_EQ(minimal_rank_for_psnr(s, 4, 12.1), 3);
}

TEST(Diamond, Eigenvalues) {
  EXPECT_NEAR(diamond_eigenvalue(kAlpha, 1), 4.0 / kPi, 1e-15);
  EXPECT_NEAR(diamond_eigenvalue(kAlpha, 2), -4.0 / (3.0 * kPi), 1e-15);
  EXPECT_NEAR(diamond_eigenvalue(0.5, 3), 4.0 * std::numbers::sqrt2 * 0.5 / (5.0 * kPi), 1e-15);
  EXPECT_THROW(diamond_eigenvalue(kAlpha, 0), UsageError);
}

TEST(Diamond, EigenfunctionsOrthonormal) {
  const int n = 1024;
  const DiamondSpectrum d = diamond_spectrum(kAlpha, 6, n);
  const double h = grid_step(n);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      EXPECT_NEAR(inner(d.eigenfunctions[a], d.eigenfunctions[b], h), a == b ? 1.0 : 0.0, 1e-3) << a << b;
}

TEST(Diamond, SingularValuesMatchSmallGrid) {
  const int n = 256;
  const Eigen::VectorXd s = singular_values(rotated_square(n, kAlpha, kPi / 4)) * (2.0 / n);
  for (int k = 1; k <= 4; ++k) {
    const double lam = std::abs(diamond_eigenvalue(kAlpha, k));
    EXPECT_NEAR(s(k - 1), lam, 0.05 * lam) << k;
  }
}

TEST(Diamond, EigenfunctionIsEigenvector) {
  // The symmetrized diamond operator is twice the integral operator.
  const int n = 512;
  const Eigen::MatrixXd S = symmetrized_operator(rotated_square(n, kAlpha, kPi / 4));
  const DiamondSpectrum d = diamond_spectrum(kAlpha, 2, n);
  const double h = grid_step(n);
  for (int k = 0; k < 2; ++k) {
    const Eigen::VectorXd Sg = S * d.eigenfunctions[k];
    const Eigen::VectorXd expect = 2.0 * d.eigenvalues[k] * d.eigenfunctions[k];
    EXPECT_LT(l2_norm(Sg - expect, h), 0.02) << k;
  }
}

TEST(Power, FlatStartOverlap) {
  const int n = 1024;
  const double h = grid_step(n);
  const DiamondSpectrum d = diamond_spectrum(kAlpha, 1, n);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Ones(n);
  const double overlap = inner(u0 / l2_norm(u0, h), d.eigenfunctions[0], h);
  EXPECT_NEAR(overlap, (4.0 / kPi) / std::numbers::sqrt2, 1e-3);
}

TEST(Power, ConvergesToDenseEigenvector) {
  Rng rng(5);
  const int n = 40;
  const Eigen::MatrixXd A = random_matrix(rng, n, n);
  Eigen::MatrixXd S = A * A.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  const Eigen::VectorXd lam = eig.eigenvalues();
  Eigen::VectorXd v1 = eig.eigenvectors().col(n - 1);
  const double h = grid_step(n);
  v1 /= l2_norm(v1, h);
  const double ratio = lam(n - 2) / lam(n - 1);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Ones(n);
  const PowerResult r = power_stage(S, u0, 200, true);
  auto err = [&](const Eigen::VectorXd& u) {
    const double c = inner(u, v1, h);
    return l2_norm(u - (c >= 0 ? 1.0 : -1.0) * v1, h);
  };
  // error shrinks at least as fast as the gap law allows (up to a constant)
  const double e0 = std::max(err(r.iterates[1]), 1e-300);
  for (int k = 10; k <= 60; k += 10) EXPECT_LE(err(r.iterates[k + 1]), 4.0 * e0 * std::pow(ratio, k) + 1e-12);
  EXPECT_LT(err(r.u), 1e-6);
  EXPECT_NEAR(r.rayleigh, 0.5 * lam(n - 1) * inner(r.u, r.u, h), 1e-8 * lam(n - 1));
  EXPECT_NEAR(inner(r.output, r.output, h), r.rayleigh, 1e-8 * r.rayleigh);
}

TEST(Power, FixedPoint) {
  const int n = 64;
  const Eigen::VectorXd u = square_factor(n, 0.5);
  const Eigen::MatrixXd S = symmetrized_operator(make_square(n, 0.5));
  const PowerResult r = power_stage(S, u, 3);
  // X = u u^T, so the output factor recovers u exactly up to rounding
  EXPECT_LT((r.output - u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Power, NegativeRayleighThrows) {
  const Eigen::MatrixXd S = -Eigen::MatrixXd::Identity(5, 5);
  EXPECT_THROW(power_stage(S, Eigen::VectorXd::Ones(5), 3), NumericError);
  EXPECT_THROW(power_stage(Eigen::MatrixXd::Zero(5, 5), Eigen::VectorXd::Ones(5), 1), NumericError);
}

TEST(Smooth, PreservesMassAndConstants) {
  const int n = 201;
  const double h = grid_step(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  f(100) = 1.0;
  const Eigen::VectorXd g = gaussian_smooth(f, 0.05, h);
  EXPECT_NEAR(g.sum(), 1.0, 1e-12);
  EXPECT_NEAR(g(95), g(105), 1e-15);
  const Eigen::VectorXd c = gaussian_smooth(Eigen::VectorXd::Ones(n), 0.05, h);
  EXPECT_NEAR(c(100), 1.0, 1e-12);
}

class GradientTest : public ::testing::Test {
 protected:
  static constexpr int n = 256;
  static constexpr double sigma = 0.01;
  Eigen::VectorXd u = square_factor(n, kAlpha);
  AlignmentGradient grad{n, kAlpha, sigma, u, kPi / 4};
};

TEST_F(GradientTest, ZeroAtTruth) {
  EXPECT_LT(std::abs(grad(kPi / 4)), 1e-10);
  EXPECT_LT(std::abs(grad(kPi / 4 + kPi / 2)), 1e-10);
}

TEST_F(GradientTest, RestoringSign) {
  for (int k = 1; k <= 20; ++k) {
    const double d = k * (kPi / 7) / 20;
    EXPECT_GT(grad(kPi / 4 + d), 0.0) << d;
    EXPECT_LT(grad(kPi / 4 - d), 0.0) << d;
  }
}

TEST_F(GradientTest, MatchesFiniteDifferenceOfLoss) {
  const double eps = 1e-4;
  for (double nu : {0.2, 0.5, 1.0, 1.3}) {
    const double fd = (grad.cross_loss(nu + eps) - grad.cross_loss(nu - eps)) / (2 * eps);
    const double g = grad(nu);
    EXPECT_NEAR(g, fd, 0.03 * std::abs(fd) + 1e-6) << nu;
  }
}

TEST_F(GradientTest, EquivariantUnderShift) {
  const double delta = 0.37;
  const AlignmentGradient shifted(n, kAlpha, sigma, u, kPi / 4 + delta);
  for (double nu : {0.1, 0.6, 1.4}) EXPECT_NEAR(shifted(nu + delta), grad(nu), 1e-10) << nu;
}

TEST_F(GradientTest, QuarterTurnPeriodic) {
  for (double nu : {0.1, 0.6, 1.4}) EXPECT_NEAR(grad(nu + kPi / 2), grad(nu), 1e-10) << nu;
}

TEST(Alignment, FoldedError) {
  EXPECT_NEAR(folded_angle_error(kPi / 4 + 0.01, kPi / 4), 0.01, 1e-12);
  EXPECT_NEAR(folded_angle_error(kPi / 4 + kPi / 2 - 0.01, kPi / 4), 0.01, 1e-12);
  EXPECT_NEAR(folded_angle_error(kPi / 4 - 0.3, kPi / 4), 0.3, 1e-12);
  EXPECT_NEAR(folded_angle_error(0.0, kPi / 4), kPi / 4, 1e-12);
}

TEST(Alignment, NonEscape) {
  const double nu = kPi / 4, r = 0.01;
  EXPECT_TRUE(non_escape({1.0, 0.9, nu + 0.005, nu, nu}, nu, r));
  EXPECT_FALSE(non_escape({1.0, nu + 0.005, nu + 0.02}, nu, r));
  EXPECT_TRUE(non_escape({1.0, 1.1}, nu, r));
  EXPECT_TRUE(non_escape({nu + kPi / 2, nu + kPi / 2 + 0.009}, nu, r));
}

class SolverTest : public ::testing::Test {
 protected:
  static AlternatingConfig config() {
    AlternatingConfig cfg;
    cfg.n = 128;
    cfg.t_nu = 600;
    return cfg;
  }
  AlternatingSolver solver{config()};
};

TEST_F(SolverTest, RoughStageIsDiamondLeadingFactor) {
  const int n = 128;
  const double h = grid_step(n);
  const DiamondSpectrum d = diamond_spectrum(kAlpha, 1, n);
  const Eigen::VectorXd& u = solver.u_rough();
  EXPECT_GT(std::abs(inner(u / l2_norm(u, h), d.eigenfunctions[0], h)), 0.99);
}

TEST_F(SolverTest, SymmetryCopyIsFixed) {
  const AlternatingResult r = solver.run_from(kPi / 4 + kPi / 2);
  EXPECT_LT(r.angle_error, 1e-6);
  EXPECT_LT(r.factor_error, 0.2);
  EXPECT_EQ(r.state.stage, Stage::Done);
  EXPECT_EQ(static_cast<int>(r.nu_trace.size()), 601);
}

TEST_F(SolverTest, RecoversFromNearbyStart) {
  for (double d : {-0.3, 0.2, 0.5}) {
    const AlternatingResult r = solver.run_from(kPi / 4 + d);
    EXPECT_LT(r.angle_error, 0.01) << d;
    EXPECT_LT(r.factor_error, 0.2) << d;
    EXPECT_TRUE(non_escape(r.nu_trace, kPi / 4, 3.0 / 768.0)) << d;
  }
}

TEST_F(SolverTest, SeededRunIsDeterministic) {
  const AlternatingResult a = solver.run(42), b = solver.run(42);
  EXPECT_EQ(a.nu0, b.nu0);
  EXPECT_EQ(a.nu_hat, b.nu_hat);
  EXPECT_GE(a.nu0, 0.0);
  EXPECT_LT(a.nu0, 2 * kPi);
}

TEST(Solver, BadConfig) {
  AlternatingConfig cfg;
  cfg.n = 64;
  cfg.beta = 0.0;
  EXPECT_THROW(AlternatingSolver{cfg}, UsageError);
}
