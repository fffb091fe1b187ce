#include "tilted/geometry.hpp"

#include <cmath>

#include "tilted/bytes.hpp"
#include "tilted/errors.hpp"

namespace tilted {

namespace {

constexpr double kSmallAngle = 1e-8;

void require_finite(double v) {
  if (!std::isfinite(v)) {
    throw NumericError("exp_map: non-finite tangent vector");
  }
}

UnitRotation2 normalized(UnitRotation2 r) {
  const double n = std::hypot(r.re, r.im);
  return {r.re / n, r.im / n};
}

UnitQuaternion normalized(UnitQuaternion q) {
  const double n = q.norm();
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

}  // namespace

UnitRotation2 UnitRotation2::from_angle(double radians) {
  return {std::cos(radians), std::sin(radians)};
}

double UnitRotation2::angle() const { return std::atan2(im, re); }

double UnitRotation2::norm() const { return std::hypot(re, im); }

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double radians) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n == 0.0) return {};
  const double s = std::sin(radians / 2) / n;
  return UnitQuaternion{std::cos(radians / 2), axis[0] * s, axis[1] * s, axis[2] * s}.canonical();
}

double UnitQuaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

UnitQuaternion UnitQuaternion::canonical() const {
  if (w < 0.0) return {-w, -x, -y, -z};
  return *this;
}

Mat3 UnitQuaternion::to_matrix() const {
  return {{{w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z}}};
}

UnitRotation2 operator*(const UnitRotation2& a, const UnitRotation2& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

UnitRotation2 exp_so2(double xi) {
  require_finite(xi);
  return {std::cos(xi), std::sin(xi)};
}

UnitQuaternion exp_so3(const Vec3& xi) {
  for (double v : xi) require_finite(v);
  const double theta2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
  const double theta = std::sqrt(theta2);
  double w;
  double k;  // sin(theta/2) / theta
  if (theta < kSmallAngle) {
    w = 1.0 - theta2 / 8.0;
    k = 0.5 - theta2 / 48.0;
  } else {
    w = std::cos(theta / 2);
    k = std::sin(theta / 2) / theta;
  }
  return normalized(UnitQuaternion{w, k * xi[0], k * xi[1], k * xi[2]});
}

UnitRotation2 exp_map(const UnitRotation2& base, double xi) {
  return normalized(base * exp_so2(xi));
}

UnitQuaternion exp_map(const UnitQuaternion& base, const Vec3& xi) {
  return normalized(base * exp_so3(xi)).canonical();
}

Vec2 apply_rotation(const UnitRotation2& tau, const Vec2& p) {
  return {tau.re * p[0] - tau.im * p[1], tau.im * p[0] + tau.re * p[1]};
}

Vec3 apply_rotation(const UnitQuaternion& tau, const Vec3& p) {
  // v' = v + 2w (u x v) + 2 u x (u x v), u = vector part.
  const double ux = tau.x, uy = tau.y, uz = tau.z;
  const double cx = uy * p[2] - uz * p[1];
  const double cy = uz * p[0] - ux * p[2];
  const double cz = ux * p[1] - uy * p[0];
  const double ccx = uy * cz - uz * cy;
  const double ccy = uz * cx - ux * cz;
  const double ccz = ux * cy - uy * cx;
  return {p[0] + 2 * (tau.w * cx + ccx), p[1] + 2 * (tau.w * cy + ccy),
          p[2] + 2 * (tau.w * cz + ccz)};
}

Mat3 rotation_matrix(const UnitRotation2& tau) {
  return {{{tau.re, -tau.im, 0.0}, {tau.im, tau.re, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 rotation_matrix(const UnitQuaternion& tau) { return tau.to_matrix(); }

double euclidean_to_tangent(const UnitRotation2& tau, const Vec2& ambient_grad) {
  // d/dt tau * Exp(t) = tau * i = (-im, re).
  return -tau.im * ambient_grad[0] + tau.re * ambient_grad[1];
}

Vec3 euclidean_to_tangent(const UnitQuaternion& q, const Vec4& g) {
  // d/dt q * Exp(t e_i) = q * (0, e_i / 2).
  Vec3 out{};
  for (int i = 0; i < 3; ++i) {
    UnitQuaternion e{0.0, 0.0, 0.0, 0.0};
    (i == 0 ? e.x : i == 1 ? e.y : e.z) = 0.5;
    const UnitQuaternion d = q * e;
    out[i] = g[0] * d.w + g[1] * d.x + g[2] * d.y + g[3] * d.z;
  }
  return out;
}

Vec2 rotation_matrix_grad_to_ambient(const UnitRotation2&, const Mat3& G) {
  // R = [[re, -im], [im, re]].
  return {G[0][0] + G[1][1], G[1][0] - G[0][1]};
}

Vec4 rotation_matrix_grad_to_ambient(const UnitQuaternion& q, const Mat3& G) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  const Mat3 dw{{{w, -z, y}, {z, w, -x}, {-y, x, w}}};
  const Mat3 dx{{{x, y, z}, {y, -x, -w}, {z, w, -x}}};
  const Mat3 dy{{{-y, x, w}, {x, y, z}, {-w, z, -y}}};
  const Mat3 dz{{{-z, -w, x}, {w, -z, y}, {x, y, z}}};
  auto contract = [&G](const Mat3& D) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += G[i][j] * D[i][j];
    return 2.0 * s;
  };
  return {contract(dw), contract(dx), contract(dy), contract(dz)};
}

void append_le(std::vector<std::uint8_t>& out, const UnitRotation2& tau) {
  append_le(out, tau.re);
  append_le(out, tau.im);
}

void append_le(std::vector<std::uint8_t>& out, const UnitQuaternion& tau) {
  append_le(out, tau.w);
  append_le(out, tau.x);
  append_le(out, tau.y);
  append_le(out, tau.z);
}

UnitRotation2 read_rotation2_le(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  UnitRotation2 out;
  out.re = r.read<double>();
  out.im = r.read<double>();
  return out;
}

UnitQuaternion read_quaternion_le(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  UnitQuaternion out;
  out.w = r.read<double>();
  out.x = r.read<double>();
  out.y = r.read<double>();
  out.z = r.read<double>();
  return out;
}

}  // namespace tilted
