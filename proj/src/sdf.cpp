#include "tilted/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"

namespace tilted {

namespace {

double box_distance(const Vec3& p, const Vec3& b) {
  double outside = 0.0, inside = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double q = std::abs(p[i]) - b[i];
    outside += std::max(q, 0.0) * std::max(q, 0.0);
    inside = std::max(inside, q);
  }
  return std::sqrt(outside) + std::min(inside, 0.0);
}

}  // namespace

AnalyticSdf AnalyticSdf::sphere(double radius, Vec3 center) {
  if (!(radius > 0)) throw UsageError("sphere: radius must be positive");
  AnalyticSdf s;
  s.kind_ = Kind::Sphere;
  s.radius_ = radius;
  s.center_ = center;
  return s;
}

AnalyticSdf AnalyticSdf::box(Vec3 half_extents, Vec3 center) {
  for (double h : half_extents)
    if (!(h > 0)) throw UsageError("box: half extents must be positive");
  AnalyticSdf s;
  s.kind_ = Kind::Box;
  s.half_ = half_extents;
  s.center_ = center;
  return s;
}

AnalyticSdf AnalyticSdf::rotated_box(Vec3 half_extents, const UnitQuaternion& q, Vec3 center) {
  AnalyticSdf s = box(half_extents, center);
  s.kind_ = Kind::RotatedBox;
  s.rotation_ = q.canonical();
  return s;
}

AnalyticSdf AnalyticSdf::union_of(std::vector<AnalyticSdf> parts) {
  if (parts.empty()) throw UsageError("union: needs at least one part");
  AnalyticSdf s;
  s.kind_ = Kind::Union;
  s.parts_ = std::move(parts);
  return s;
}

double AnalyticSdf::operator()(const Vec3& p) const {
  const Vec3 d{p[0] - center_[0], p[1] - center_[1], p[2] - center_[2]};
  switch (kind_) {
    case Kind::Sphere:
      return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) - radius_;
    case Kind::Box:
      return box_distance(d, half_);
    case Kind::RotatedBox:
      return box_distance(apply_rotation(rotation_.conjugate(), d), half_);
    case Kind::Union: {
      double v = std::numeric_limits<double>::infinity();
      for (const auto& part : parts_) v = std::min(v, part(p));
      return v;
    }
  }
  return 0.0;
}

std::string AnalyticSdf::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Sphere:
      out << "sphere(r=" << radius_ << ")";
      break;
    case Kind::Box:
      out << "box(" << half_[0] << "x" << half_[1] << "x" << half_[2] << ")";
      break;
    case Kind::RotatedBox:
      out << "rotated_box(" << half_[0] << "x" << half_[1] << "x" << half_[2] << ";q=" << rotation_.w << ":"
          << rotation_.x << ":" << rotation_.y << ":" << rotation_.z << ")";
      break;
    case Kind::Union:
      out << "union(";
      for (std::size_t i = 0; i < parts_.size(); ++i) out << (i ? "+" : "") << parts_[i].describe();
      out << ")";
      break;
  }
  return out.str();
}

UnitQuaternion random_rotation(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x71756174));
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  const double t2 = 2 * std::numbers::pi * u2, t3 = 2 * std::numbers::pi * u3;
  return UnitQuaternion{b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3)}.canonical();
}

SampleSet sample_sdf(const AnalyticSdf& sdf, std::size_t count, double uniform_fraction, double sigma,
                     std::uint64_t seed) {
  if (uniform_fraction < 0 || uniform_fraction > 1) throw UsageError("sample_sdf: uniform fraction must be in [0,1]");
  Rng rng(derive_seed(seed, 0x73646673));
  SampleSet out;
  out.input_dim = 3;
  out.output_dim = 1;
  out.points.reserve(count * 3);
  out.targets.reserve(count);
  const std::size_t n_uniform = static_cast<std::size_t>(std::llround(uniform_fraction * count));
  auto push = [&](const Vec3& p) {
    out.points.insert(out.points.end(), p.begin(), p.end());
    out.targets.push_back(sdf(p));
  };
  for (std::size_t i = 0; i < n_uniform; ++i) push({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  constexpr double h = 1e-6;
  for (std::size_t i = n_uniform; i < count; ++i) {
    Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    // a few projection steps p <- p - f(p) grad f(p)
    for (int it = 0; it < 4; ++it) {
      const double f = sdf(p);
      Vec3 g;
      for (int k = 0; k < 3; ++k) {
        Vec3 a = p, b = p;
        a[k] += h;
        b[k] -= h;
        g[k] = (sdf(a) - sdf(b)) / (2 * h);
      }
      for (int k = 0; k < 3; ++k) p[k] -= f * g[k];
    }
    for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k] + sigma * rng.normal(), -1.0, 1.0);
    push(p);
  }
  return out;
}

SampleSet sdf_lattice(const AnalyticSdf& sdf, int res) {
  if (res < 2) throw UsageError("sdf_lattice: resolution must be >= 2");
  SampleSet out;
  out.input_dim = 3;
  out.output_dim = 1;
  const std::size_t n = static_cast<std::size_t>(res) * res * res;
  out.points.reserve(n * 3);
  out.targets.reserve(n);
  for (int z = 0; z < res; ++z)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        const Vec3 p{-1.0 + 2.0 * x / (res - 1), -1.0 + 2.0 * y / (res - 1), -1.0 + 2.0 * z / (res - 1)};
        out.points.insert(out.points.end(), p.begin(), p.end());
        out.targets.push_back(sdf(p));
      }
  return out;
}

}  // namespace tilted
