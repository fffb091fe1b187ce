#pragma once

// Rotation manifolds used for learnable projections: the unit circle S^1
// (planar rotations stored as unit complex numbers) and S^3 (unit
// quaternions). Tangent vectors are expressed in the right-trivialized Lie
// algebra, so an update reads tau <- tau * Exp(xi).

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tilted {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct UnitRotation2 {
  double re = 1.0;
  double im = 0.0;

  static UnitRotation2 from_angle(double radians);
  double angle() const;  // in (-pi, pi]
  double norm() const;
  friend bool operator==(const UnitRotation2&, const UnitRotation2&) = default;
};

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static UnitQuaternion from_axis_angle(const Vec3& axis, double radians);
  double norm() const;
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  // q and -q are the same rotation; pick the representative with w >= 0.
  UnitQuaternion canonical() const;
  Mat3 to_matrix() const;
  friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;
};

UnitRotation2 operator*(const UnitRotation2& a, const UnitRotation2& b);
UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);

// Group exponential at the identity. Throws NumericError on non-finite input.
UnitRotation2 exp_so2(double xi);
UnitQuaternion exp_so3(const Vec3& xi);

// base * Exp(xi). Result is renormalized to unit length; quaternions are
// returned in canonical (w >= 0) form.
UnitRotation2 exp_map(const UnitRotation2& base, double xi);
UnitQuaternion exp_map(const UnitQuaternion& base, const Vec3& xi);

Vec2 apply_rotation(const UnitRotation2& tau, const Vec2& p);
Vec3 apply_rotation(const UnitQuaternion& tau, const Vec3& p);

// Rotation matrices. The planar case is embedded in the upper-left block.
Mat3 rotation_matrix(const UnitRotation2& tau);
Mat3 rotation_matrix(const UnitQuaternion& tau);

// Projects an ambient (coordinate-space) gradient onto the right-trivialized
// tangent basis at tau: component i is <g, d/dt tau*Exp(t e_i)|_{t=0}>.
double euclidean_to_tangent(const UnitRotation2& tau, const Vec2& ambient_grad);
Vec3 euclidean_to_tangent(const UnitQuaternion& tau, const Vec4& ambient_grad);

// Ambient gradient of a loss with respect to the rotation parameters, given
// the gradient G = dL/dR with respect to the entries of the rotation matrix.
Vec2 rotation_matrix_grad_to_ambient(const UnitRotation2& tau, const Mat3& dL_dR);
Vec4 rotation_matrix_grad_to_ambient(const UnitQuaternion& tau, const Mat3& dL_dR);

// Little-endian float64 serialization, (re, im) and (w, x, y, z).
void append_le(std::vector<std::uint8_t>& out, const UnitRotation2& tau);
void append_le(std::vector<std::uint8_t>& out, const UnitQuaternion& tau);
UnitRotation2 read_rotation2_le(std::span<const std::uint8_t> bytes);
UnitQuaternion read_quaternion_le(std::span<const std::uint8_t> bytes);

}  // namespace tilted
