#pragma once

#include <array>
#include <vector>

#include "dyno/geometry.hpp"

namespace dyno {

/// Detection / annotation state of one object. Centers are expressed in
/// whatever frame the surrounding code tags (world, rig or camera); w spans
/// x, h spans y and l spans z at yaw 0.
struct Box3D {
  double x = 0.0, y = 0.0, z = 0.0;
  double w = 1.0, h = 1.0, l = 1.0;
  double yaw = 0.0;
  double vx = 0.0, vz = 0.0;  // ground-plane velocity, same frame as center
  double score = 1.0;
  int class_id = 0;
  int frame_id = 0;
  int track_id = -1;  // ground-truth / tracker identity; -1 when unset

  Point3 center() const { return {x, y, z}; }
};

/// Ground-plane footprint corners, counter-order consistent with the yaw
/// convention (x', z' pairs).
std::array<std::array<double, 2>, 4> footprint(const Box3D& b);

/// Coordinates of p in the box frame (rotated by -yaw about the center).
Point3 box_local(const Box3D& b, const Point3& p);

bool contains(const Box3D& b, const Point3& p);

/// Euclidean center distance on the ground plane.
double ground_distance(const Box3D& a, const Box3D& b);

/// Area of the intersection of two (possibly rotated) ground-plane
/// footprints, via convex polygon clipping.
double footprint_intersection_area(const Box3D& a, const Box3D& b);

/// Exact 3D IoU for yawed boxes: clipped footprint area times vertical
/// overlap, over the volume union.
double box_iou_3d(const Box3D& a, const Box3D& b);

/// Re-tags a box from pose-local coordinates into the parent frame
/// (center, yaw and velocity all transform; dims unchanged).
Box3D box_to_parent(const PlanarMotion& pose, const Box3D& local);

/// Inverse of box_to_parent.
Box3D box_to_local(const PlanarMotion& pose, const Box3D& parent);

}  // namespace dyno
