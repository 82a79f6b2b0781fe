#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyno/box.hpp"
#include "dyno/scene.hpp"

namespace dyno {

/// Shared grid shape for every object-wise volume: half-ranges in x/z, an
/// asymmetric y range about the anchor center and one cell pitch.
struct VolumeConfig {
  double extent_x = 5.0;
  double extent_z = 5.0;
  double y_min = -4.0;
  double y_max = 2.0;
  double cell = 0.8;
  double near_plane = 0.1;
};

struct GridDims {
  int W = 0, H = 0, L = 0;
  std::size_t size() const {
    return static_cast<std::size_t>(W) * H * L;
  }
};

GridDims grid_dims(const VolumeConfig& cfg);

/// How image features are distributed along the viewing ray when lifted.
/// kUniform weighs every depth equally; kLaplacianAboutHint concentrates on
/// the per-pixel depth estimate with the given standard deviation (meters)
/// and gives zero weight where no hint is available.
struct DepthDistribution {
  enum class Kind { kUniform, kLaplacianAboutHint };
  Kind kind = Kind::kUniform;
  double scale = 1.5;

  static DepthDistribution uniform() { return {Kind::kUniform, 1.0}; }
  static DepthDistribution laplacian(double scale_m) {
    return {Kind::kLaplacianAboutHint, scale_m};
  }

  double weight(double cell_z, double hint, bool hint_valid) const;
  /// Largest attainable weight (the mode of the distribution); used to
  /// normalize weights into [0, 1] support values.
  double max_weight() const;
};

/// Object-centered feature grid. `feat` holds the raw bilinear image
/// samples, `grid` the depth-probability-weighted features (grid = weight *
/// feat), both channel-interleaved with cell index (iz * H + iy) * W + ix.
/// Cells outside the image or behind the camera are invalid and zero-filled.
struct LocalVolume {
  Box3D anchor;
  int W = 0, H = 0, L = 0, C = 0;
  std::vector<Point3> cells;
  std::vector<float> feat;
  std::vector<float> grid;
  std::vector<double> weight;
  double weight_scale = 1.0;  // max_weight of the lifting distribution
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return cells.size(); }
};

/// Current-frame reference volume paired with the previous-frame features
/// sampled at motion-compensated locations, plus a per-cell matching cost
/// (mean absolute channel difference of the raw features; zero where the
/// cells are not jointly valid).
struct CostVolume {
  LocalVolume reference;
  LocalVolume warped;
  std::vector<double> per_cell_cost;

  bool joint_valid(std::size_t i) const {
    return reference.valid[i] && warped.valid[i];
  }
  /// Geometric-mean depth support in [0, 1]; zero off the evidence.
  double support(std::size_t i) const;
};

/// Regular axis-aligned grid of cell centers around the anchor center.
/// Throws DegenerateAnchor when the anchor sits behind the near plane.
std::vector<Point3> volume_grid(const Box3D& anchor, const VolumeConfig& cfg);

/// Samples the feature map at the projection of each cell and weighs the
/// features by the depth distribution evaluated against the per-pixel hint.
LocalVolume lift_features(const FeatureMap& fm, const CameraIntrinsics& cam,
                          const std::vector<Point3>& cells,
                          const DepthDistribution& dd);

/// lift_features on the standard grid around `anchor`, with dims attached.
LocalVolume build_local_volume(const FeatureMap& fm,
                               const CameraIntrinsics& cam, const Box3D& anchor,
                               const VolumeConfig& cfg,
                               const DepthDistribution& dd);

/// For each reference cell, fetches the previous-frame feature at the
/// location the same material point occupied one time gap earlier (inverse
/// object motion about the anchor center, then inverse ego motion) and
/// forms the per-cell cost.
CostVolume warp_and_cost(const LocalVolume& ref, const FeatureMap& prev_fm,
                         const CameraIntrinsics& prev_cam,
                         const PlanarMotion& ego, const PlanarMotion& obj,
                         const DepthDistribution& dd);

struct BevGrid {
  int W = 0, L = 0;
  std::vector<double> value;
  std::vector<std::uint8_t> valid;
};

/// Mean per-cell cost over the height axis for every (x, z) column; columns
/// with no jointly valid cell are flagged invalid.
BevGrid reduce_to_bev(const CostVolume& cv);

/// Mean per-cell cost over jointly valid cells whose center lies inside the
/// given box; nullopt when the box covers no such cell.
std::optional<double> box_mean_cost(const CostVolume& cv, const Box3D& box);

/// Debug dump of a volume: fixed little-endian header (magic "DVOL",
/// version, dims, anchor, weight scale) followed by row-major float cell
/// features and the validity bytes.
void dump_volume(const std::string& path, const LocalVolume& vol);
LocalVolume load_volume(const std::string& path);

}  // namespace dyno
