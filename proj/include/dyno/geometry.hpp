#pragma once

#include <cmath>

#include "dyno/errors.hpp"

namespace dyno {

// Coordinate conventions used throughout the library:
//   * camera looks down +z, +x points right, +y points down;
//   * the ground plane is x-z, "vertical" means the y axis;
//   * all angles are radians, all lengths meters, velocities m/s;
//   * positive yaw turns the +z axis toward +x.
// Planar rigid motions act on (x, z) and leave y untouched.

inline double wrap_angle(double a) {
  a = std::fmod(a, 6.283185307179586477);
  if (a > 3.141592653589793238) a -= 6.283185307179586477;
  if (a <= -3.141592653589793238) a += 6.283185307179586477;
  return a;
}

/// Pinhole intrinsics with square pixels and no distortion.
struct CameraIntrinsics {
  double f = 1.0;   // focal length, pixels
  double cu = 0.0;  // principal point u, pixels
  double cv = 0.0;  // principal point v, pixels
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Camera- or world-frame point; z is depth when camera-frame.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Rigid motion on the ground plane: rotate (x, z) by yaw, then translate
/// by (dx, dz). Doubles as a pose (local-to-world transform).
struct PlanarMotion {
  double dx = 0.0;
  double dz = 0.0;
  double yaw = 0.0;

  PlanarMotion() = default;
  PlanarMotion(double dx_, double dz_, double yaw_ = 0.0)
      : dx(dx_), dz(dz_), yaw(wrap_angle(yaw_)) {}

  static PlanarMotion identity() { return {}; }
  bool is_translation() const { return yaw == 0.0; }
};

inline Point3 apply_motion(const PlanarMotion& m, const Point3& p) {
  const double c = std::cos(m.yaw), s = std::sin(m.yaw);
  return {c * p.x + s * p.z + m.dx, p.y, -s * p.x + c * p.z + m.dz};
}

/// Rotates a ground-plane vector without translating it.
inline Point3 rotate_only(const PlanarMotion& m, const Point3& v) {
  const double c = std::cos(m.yaw), s = std::sin(m.yaw);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

/// a after b: apply_motion(compose(a, b), p) == apply_motion(a, apply_motion(b, p)).
inline PlanarMotion compose(const PlanarMotion& a, const PlanarMotion& b) {
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  return {c * b.dx + s * b.dz + a.dx, -s * b.dx + c * b.dz + a.dz,
          wrap_angle(a.yaw + b.yaw)};
}

inline PlanarMotion inverse(const PlanarMotion& m) {
  const double c = std::cos(m.yaw), s = std::sin(m.yaw);
  return {-(c * m.dx - s * m.dz), -(s * m.dx + c * m.dz), wrap_angle(-m.yaw)};
}

inline Pixel project(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0))
    throw DegenerateProjection("project: point depth must be positive");
  return {k.f * p.x / p.z + k.cu, k.f * p.y / p.z + k.cv};
}

inline Point3 backproject(const Pixel& p, double depth,
                          const CameraIntrinsics& k) {
  if (!(depth > 0.0))
    throw DegenerateProjection("backproject: depth must be positive");
  return {depth * (p.u - k.cu) / k.f, depth * (p.v - k.cv) / k.f, depth};
}

/// Disparities below this many pixels are treated as no parallax; the
/// closed-form depth recovery is numerically meaningless underneath it.
inline constexpr double kNoParallaxEps = 1e-3;

namespace detail {
inline void check_closed_form(const PlanarMotion& m, const char* what) {
  if (m.yaw != 0.0)
    throw UnsupportedMotion(std::string(what) +
                            ": closed form requires pure translation");
}
inline double disparity_or_throw(const Pixel& p0, const Pixel& p1) {
  const double du = p0.u - p1.u;
  if (std::abs(du) <= kNoParallaxEps)
    throw NoParallax("depth recovery: |u0 - u1| below parallax threshold");
  return du;
}
}  // namespace detail

/// Depth of the current-frame pixel assuming the observed point is static:
/// z = (dz_ego (u0 - cu) - f dx_ego) / (u0 - u1). The ego motion is the
/// camera-frame displacement of static points between the two frames.
inline double depth_static(const Pixel& p0, const Pixel& p1,
                           const PlanarMotion& ego,
                           const CameraIntrinsics& k) {
  detail::check_closed_form(ego, "depth_static");
  const double du = detail::disparity_or_throw(p0, p1);
  return (ego.dz * (p0.u - k.cu) - k.f * ego.dx) / du;
}

/// Motion-aware depth: the object translation adds to the ego translation in
/// the correspondence, so z = ((dz_e + dz_o)(u0 - cu) - f (dx_e + dx_o)) / du.
inline double depth_with_motion(const Pixel& p0, const Pixel& p1,
                                const PlanarMotion& ego,
                                const PlanarMotion& obj,
                                const CameraIntrinsics& k) {
  detail::check_closed_form(ego, "depth_with_motion");
  detail::check_closed_form(obj, "depth_with_motion");
  const double du = detail::disparity_or_throw(p0, p1);
  return ((ego.dz + obj.dz) * (p0.u - k.cu) - k.f * (ego.dx + obj.dx)) / du;
}

/// Depth gap introduced by assuming a moving point static. Computed as the
/// exact difference of the motion-aware and static recoveries, which reduces
/// to (dz_obj (u0 - cu) - f dx_obj) / (u0 - u1).
inline double depth_bias(const Pixel& p0, const Pixel& p1,
                         const PlanarMotion& ego, const PlanarMotion& obj,
                         const CameraIntrinsics& k) {
  return depth_with_motion(p0, p1, ego, obj, k) - depth_static(p0, p1, ego, k);
}

}  // namespace dyno
