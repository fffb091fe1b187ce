#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tilted/errors.hpp"
#include "tilted/geometry.hpp"
#include "tilted/rng.hpp"

using namespace tilted;

namespace {

// Rodrigues formula for exp of the skew matrix of `w`.
Mat3 rodrigues(const Vec3& w) {
  const double th = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
  Mat3 K{{{0, -w[2], w[1]}, {w[2], 0, -w[0]}, {-w[1], w[0], 0}}};
  Mat3 K2{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) K2[i][j] += K[i][k] * K[k][j];
  const double a = th > 0 ? std::sin(th) / th : 1.0;
  const double b = th > 0 ? (1 - std::cos(th)) / (th * th) : 0.5;
  Mat3 R{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) R[i][j] = (i == j) + a * K[i][j] + b * K2[i][j];
  return R;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v{rng.normal(), rng.normal(), rng.normal()};
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

UnitQuaternion random_quat(Rng& rng) {
  return UnitQuaternion::from_axis_angle(random_unit(rng), rng.uniform(-3.0, 3.0));
}

}  // namespace

TEST(ExpMap, CircleQuarterTurn) {
  const auto r = exp_map(UnitRotation2{}, std::numbers::pi / 2);
  EXPECT_NEAR(r.re, 0.0, 1e-15);
  EXPECT_NEAR(r.im, 1.0, 1e-15);
}

TEST(ExpMap, ZeroStepKeepsBase) {
  const auto base = UnitRotation2::from_angle(0.7);
  EXPECT_EQ(exp_map(base, 0.0), base);
  Rng rng(3);
  const auto q = random_quat(rng).canonical();
  const auto out = exp_map(q, Vec3{0, 0, 0});
  EXPECT_NEAR(out.w, q.w, 1e-15);
  EXPECT_NEAR(out.x, q.x, 1e-15);
  EXPECT_NEAR(out.y, q.y, 1e-15);
  EXPECT_NEAR(out.z, q.z, 1e-15);
}

TEST(ExpMap, HalfTurnAboutX) {
  const auto q = exp_map(UnitQuaternion{}, Vec3{std::numbers::pi, 0, 0});
  EXPECT_NEAR(q.w, 0.0, 1e-15);
  EXPECT_NEAR(q.x, 1.0, 1e-15);
  const auto p = apply_rotation(q, Vec3{0, 1, 0});
  EXPECT_NEAR(p[0], 0.0, 1e-12);
  EXPECT_NEAR(p[1], -1.0, 1e-12);
  EXPECT_NEAR(p[2], 0.0, 1e-12);
}

TEST(ExpMap, MatchesRodrigues) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 xi{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    if (trial < 10) xi = {1e-10 * trial, -2e-10, 3e-11};
    const Mat3 R = exp_so3(xi).to_matrix();
    const Mat3 ref = rodrigues(xi);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(R[i][j], ref[i][j], 1e-12);
  }
}

TEST(ExpMap, RejectsNonFinite) {
  EXPECT_THROW(exp_map(UnitRotation2{}, std::nan("")), NumericError);
  EXPECT_THROW(exp_map(UnitQuaternion{}, Vec3{0, INFINITY, 0}), NumericError);
}

TEST(ExpMap, ClosureOverLongSequences) {
  Rng rng(5);
  UnitRotation2 r;
  UnitQuaternion q;
  for (int k = 0; k < 10000; ++k) {
    r = exp_map(r, rng.uniform(-2, 2));
    q = exp_map(q, Vec3{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    ASSERT_NEAR(r.norm(), 1.0, 1e-12);
    ASSERT_NEAR(q.norm(), 1.0, 1e-12);
    ASSERT_GE(q.w, 0.0);
  }
}

TEST(ApplyRotation, QuarterTurnAndIdentity) {
  const auto p = apply_rotation(UnitRotation2::from_angle(std::numbers::pi / 2), Vec2{1, 0});
  EXPECT_NEAR(p[0], 0.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0, 1e-15);
  const Vec3 v{0.3, -0.2, 0.9};
  EXPECT_EQ(apply_rotation(UnitQuaternion{}, v), v);
}

TEST(ApplyRotation, IsometryAndMatrixForm) {
  Rng rng(17);
  for (int k = 0; k < 100000; ++k) {
    const double a = rng.uniform(-4, 4);
    const Vec2 p2{rng.normal(), rng.normal()};
    const Vec2 r2 = apply_rotation(UnitRotation2::from_angle(a), p2);
    ASSERT_NEAR(std::hypot(r2[0], r2[1]), std::hypot(p2[0], p2[1]), 1e-9);
    const auto q = random_quat(rng);
    const Vec3 p3{rng.normal(), rng.normal(), rng.normal()};
    const Vec3 r3 = apply_rotation(q, p3);
    ASSERT_NEAR(std::sqrt(r3[0] * r3[0] + r3[1] * r3[1] + r3[2] * r3[2]),
                std::sqrt(p3[0] * p3[0] + p3[1] * p3[1] + p3[2] * p3[2]), 1e-9);
    if (k % 100 == 0) {
      ASSERT_NEAR(r2[0], std::cos(a) * p2[0] - std::sin(a) * p2[1], 1e-12);
      ASSERT_NEAR(r2[1], std::sin(a) * p2[0] + std::cos(a) * p2[1], 1e-12);
      const Mat3 R = q.to_matrix();
      for (int i = 0; i < 3; ++i) {
        ASSERT_NEAR(r3[i], R[i][0] * p3[0] + R[i][1] * p3[1] + R[i][2] * p3[2], 1e-12);
      }
    }
  }
}

TEST(Tangent, CircleBasics) {
  EXPECT_NEAR(euclidean_to_tangent(UnitRotation2{}, Vec2{0, 1}), 1.0, 1e-15);
  const auto tau = UnitRotation2::from_angle(0.4);
  EXPECT_NEAR(euclidean_to_tangent(tau, Vec2{tau.re, tau.im}), 0.0, 1e-15);
}

TEST(Tangent, SphereRadialGradientIsZero) {
  Rng rng(2);
  const auto q = random_quat(rng);
  const Vec3 t = euclidean_to_tangent(q, Vec4{q.w, q.x, q.y, q.z});
  for (double v : t) EXPECT_NEAR(v, 0.0, 1e-15);
}

// f(tau) = <a, R(tau) p> + 0.5 <a, R(tau) p>^2 through the rotation-matrix chain.
TEST(Tangent, MatchesFiniteDifferences) {
  Rng rng(23);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 a{rng.normal(), rng.normal(), rng.normal()};
    const Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    auto f3 = [&](const UnitQuaternion& q) {
      const Vec3 r = apply_rotation(q, p);
      const double s = a[0] * r[0] + a[1] * r[1] + a[2] * r[2];
      return s + 0.5 * s * s;
    };
    const auto q = random_quat(rng);
    const Vec3 rq = apply_rotation(q, p);
    const double s = a[0] * rq[0] + a[1] * rq[1] + a[2] * rq[2];
    Mat3 G{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) G[i][j] = (1 + s) * a[i] * p[j];
    const Vec3 tangent = euclidean_to_tangent(q, rotation_matrix_grad_to_ambient(q, G));
    const Vec3 xi = random_unit(rng);
    const double fd = (f3(exp_map(q, Vec3{h * xi[0], h * xi[1], h * xi[2]})) -
                       f3(exp_map(q, Vec3{-h * xi[0], -h * xi[1], -h * xi[2]}))) / (2 * h);
    const double an = tangent[0] * xi[0] + tangent[1] * xi[1] + tangent[2] * xi[2];
    EXPECT_NEAR(an, fd, 1e-4 * std::max(1.0, std::abs(fd)));

    const Vec2 a2{a[0], a[1]}, p2{p[0], p[1]};
    auto f2 = [&](const UnitRotation2& r) {
      const Vec2 v = apply_rotation(r, p2);
      const double t = a2[0] * v[0] + a2[1] * v[1];
      return t + 0.5 * t * t;
    };
    const auto r = UnitRotation2::from_angle(rng.uniform(-3, 3));
    const Vec2 v = apply_rotation(r, p2);
    const double t = a2[0] * v[0] + a2[1] * v[1];
    Mat3 G2{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) G2[i][j] = (1 + t) * a2[i] * p2[j];
    const double an2 = euclidean_to_tangent(r, rotation_matrix_grad_to_ambient(r, G2));
    const double fd2 = (f2(exp_map(r, h)) - f2(exp_map(r, -h))) / (2 * h);
    EXPECT_NEAR(an2, fd2, 1e-4 * std::max(1.0, std::abs(fd2)));
  }
}

TEST(Serialization, RoundTrip) {
  std::vector<std::uint8_t> bytes;
  const auto r = UnitRotation2::from_angle(1.1);
  const auto q = UnitQuaternion::from_axis_angle({0, 0.6, 0.8}, 0.3);
  append_le(bytes, r);
  append_le(bytes, q);
  ASSERT_EQ(bytes.size(), 48u);
  EXPECT_EQ(read_rotation2_le(std::span(bytes).first(16)), r);
  EXPECT_EQ(read_quaternion_le(std::span(bytes).subspan(16)), q);
}
