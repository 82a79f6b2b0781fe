#include "dyno/box.hpp"

#include <algorithm>
#include <cmath>

namespace dyno {

std::array<std::array<double, 2>, 4> footprint(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hw = 0.5 * b.w, hl = 0.5 * b.l;
  std::array<std::array<double, 2>, 4> out{};
  const double lx[4] = {-hw, hw, hw, -hw};
  const double lz[4] = {-hl, -hl, hl, hl};
  for (int i = 0; i < 4; ++i) {
    out[i][0] = b.x + c * lx[i] + s * lz[i];
    out[i][1] = b.z - s * lx[i] + c * lz[i];
  }
  return out;
}

Point3 box_local(const Box3D& b, const Point3& p) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = p.x - b.x, dz = p.z - b.z;
  return {c * dx - s * dz, p.y - b.y, s * dx + c * dz};
}

bool contains(const Box3D& b, const Point3& p) {
  const Point3 q = box_local(b, p);
  return std::abs(q.x) <= 0.5 * b.w && std::abs(q.y) <= 0.5 * b.h &&
         std::abs(q.z) <= 0.5 * b.l;
}

double ground_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.x - b.x, a.z - b.z);
}

namespace {

using Poly = std::vector<std::array<double, 2>>;

double polygon_area(const Poly& p) {
  double acc = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % n];
    acc += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * std::abs(acc);
}

// Sutherland-Hodgman clip of subject against one half-plane through (a, b).
Poly clip_edge(const Poly& subject, const std::array<double, 2>& a,
               const std::array<double, 2>& b) {
  Poly out;
  const double ex = b[0] - a[0], ez = b[1] - a[1];
  auto side = [&](const std::array<double, 2>& p) {
    return ex * (p[1] - a[1]) - ez * (p[0] - a[0]);
  };
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cur = subject[i];
    const auto& nxt = subject[(i + 1) % n];
    const double sc = side(cur), sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back({cur[0] + t * (nxt[0] - cur[0]),
                     cur[1] + t * (nxt[1] - cur[1])});
    }
  }
  return out;
}

}  // namespace

double footprint_intersection_area(const Box3D& a, const Box3D& b) {
  const auto fa = footprint(a);
  const auto fb = footprint(b);
  Poly poly(fa.begin(), fa.end());
  // The footprint winding depends on the yaw sign convention; orient the
  // clip polygon so its interior is on the left of each edge.
  Poly clip(fb.begin(), fb.end());
  double signed_area = 0.0;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    const auto& p = clip[i];
    const auto& q = clip[(i + 1) % clip.size()];
    signed_area += p[0] * q[1] - q[0] * p[1];
  }
  if (signed_area < 0.0) std::reverse(clip.begin(), clip.end());
  for (std::size_t i = 0; i < clip.size() && !poly.empty(); ++i) {
    poly = clip_edge(poly, clip[i], clip[(i + 1) % clip.size()]);
  }
  return poly.empty() ? 0.0 : polygon_area(poly);
}

double box_iou_3d(const Box3D& a, const Box3D& b) {
  const double inter_area = footprint_intersection_area(a, b);
  const double y_lo = std::max(a.y - 0.5 * a.h, b.y - 0.5 * b.h);
  const double y_hi = std::min(a.y + 0.5 * a.h, b.y + 0.5 * b.h);
  const double inter = inter_area * std::max(0.0, y_hi - y_lo);
  const double vol_a = a.w * a.h * a.l;
  const double vol_b = b.w * b.h * b.l;
  const double uni = vol_a + vol_b - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

Box3D box_to_parent(const PlanarMotion& pose, const Box3D& local) {
  Box3D out = local;
  const Point3 c = apply_motion(pose, local.center());
  const Point3 v = rotate_only(pose, {local.vx, 0.0, local.vz});
  out.x = c.x;
  out.y = c.y;
  out.z = c.z;
  out.yaw = wrap_angle(local.yaw + pose.yaw);
  out.vx = v.x;
  out.vz = v.z;
  return out;
}

Box3D box_to_local(const PlanarMotion& pose, const Box3D& parent) {
  return box_to_parent(inverse(pose), parent);
}

}  // namespace dyno
