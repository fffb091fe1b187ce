#pragma once

// Exact analytic signed distance functions (negative inside).

#include <cstdint>
#include <string>
#include <vector>

#include "tilted/geometry.hpp"
#include "tilted/train.hpp"

namespace tilted {

class AnalyticSdf {
 public:
  enum class Kind { Sphere, Box, RotatedBox, Union };

  static AnalyticSdf sphere(double radius, Vec3 center = {0, 0, 0});
  static AnalyticSdf box(Vec3 half_extents, Vec3 center = {0, 0, 0});
  // Box rotated by q about its center.
  static AnalyticSdf rotated_box(Vec3 half_extents, const UnitQuaternion& q, Vec3 center = {0, 0, 0});
  static AnalyticSdf union_of(std::vector<AnalyticSdf> parts);

  Kind kind() const { return kind_; }
  double operator()(const Vec3& p) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Sphere;
  double radius_ = 0.5;
  Vec3 half_{0.5, 0.5, 0.5};
  Vec3 center_{0, 0, 0};
  UnitQuaternion rotation_;
  std::vector<AnalyticSdf> parts_;
};

// Uniform random rotation (Shoemake).
UnitQuaternion random_rotation(std::uint64_t seed);

// Mixture of uniform points in [-1,1]^3 and near-surface points (surface
// points perturbed by N(0, sigma^2)); surface points are found by projecting
// uniform samples along the numerical gradient.
SampleSet sample_sdf(const AnalyticSdf& sdf, std::size_t count, double uniform_fraction, double sigma,
                     std::uint64_t seed);

// Regular res^3 lattice over [-1,1]^3 with exact distances.
SampleSet sdf_lattice(const AnalyticSdf& sdf, int res);

}  // namespace tilted
