#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dyno/box.hpp"
#include "dyno/geometry.hpp"

namespace dyno {

/// A camera rigidly mounted on the rig: planar mount pose relative to the
/// rig origin plus a fixed height offset (negative = above the ground).
struct CameraRig {
  CameraIntrinsics k;
  PlanarMotion mount;
  double mount_y = -1.4;
  int width = 320;
  int height = 180;
};

/// One rigid object: its pose at frame 0 (world frame), a constant
/// ground-plane velocity, and the seed of its procedural surface pattern.
struct SceneObject {
  int id = 0;
  Box3D box0;                     // world frame, frame_id 0
  double vx = 0.0, vz = 0.0;      // world frame, m/s
  std::uint64_t feature_seed = 0;
  double texture_amplitude = 1.0;
};

struct SceneConfig {
  int n_frames = 3;
  double dt = 0.5;
  int n_cameras = 1;
  int n_objects = 10;
  double moving_ratio = 0.5;
  double speed_min = 1.0, speed_max = 6.0;  // moving objects, m/s
  double spawn_x_min = -8.0, spawn_x_max = 8.0;
  double spawn_z_min = 8.0, spawn_z_max = 28.0;  // rig frame at t0
  double size_w_min = 1.6, size_w_max = 2.0;
  double size_l_min = 3.2, size_l_max = 4.4;
  double size_h_min = 1.4, size_h_max = 1.8;
  double ego_speed = 4.0;       // forward, m/s
  double ego_lateral = 1.5;     // sideways, m/s (gives parallax off-axis)
  double ego_yaw_rate = 0.0;    // rad/s; keep 0 for closed-form scenes
  int image_width = 320, image_height = 180;
  double focal = 260.0;
  int channels = 8;
  double depth_hint_sigma = 0.75;  // meters at z_ref
  double z_ref = 20.0;
  double texture_amplitude = 1.0;
  double visibility_threshold = 0.25;  // min visible fraction for proposals
};

/// Immutable synthetic world: camera rig, per-frame ego poses and rigid
/// constant-velocity objects. All derived data (renderings, ground truth,
/// proposals) is a pure function of this value. The generating config is
/// kept so that downstream sampling stays reproducible after serialization.
struct Scene {
  std::uint64_t seed = 0;
  std::vector<CameraRig> cameras;
  std::vector<PlanarMotion> ego_poses;  // rig pose per frame, world frame
  std::vector<double> frame_times;      // strictly increasing, seconds
  std::vector<SceneObject> objects;
  SceneConfig config;

  int frame_count() const { return static_cast<int>(frame_times.size()); }
};

/// Noise model of the stand-in single-frame proposal detector.
struct ProposalNoise {
  double sigma_z = 2.0;      // depth noise at z_ref, scales with z / z_ref
  double sigma_lateral = 0.25;
  double sigma_size = 0.12;
  double sigma_yaw = 0.08;
  bool velocity_from_gt = false;  // false: proposals start at zero velocity
  double sigma_velocity = 1.0;    // only used when velocity_from_gt
  double false_positive_rate = 0.5;  // expected spurious boxes per frame
  double score_true_min = 0.5, score_true_max = 1.0;
  double score_false_min = 0.1, score_false_max = 0.6;
};

/// Dense per-pixel features plus a noisy depth estimate with validity mask.
/// Feature layout is row-major, channel-interleaved:
/// values[(v * width + u) * channels + c].
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;
  std::vector<double> depth_hint;
  std::vector<std::uint8_t> depth_valid;

  const float* at(int u, int v) const {
    return values.data() + (static_cast<std::size_t>(v) * width + u) * channels;
  }
};

/// Feature map plus the per-pixel object index (-1 = background) and true
/// depth used to produce it. hit_count counts pixels whose ray meets the
/// object at all; visible_count only those that survive the z-buffer.
struct Rendering {
  FeatureMap map;
  std::vector<std::int32_t> instance;
  std::vector<double> true_depth;
  std::vector<int> hit_count;
  std::vector<int> visible_count;
};

struct RayHit {
  int object_index = -1;  // index into scene.objects, -1 = miss
  double depth = 0.0;     // camera-frame z of the hit
  Point3 local;           // hit point in the object's box frame
};

Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Pose of camera `cam` at frame `frame` (planar part; world frame).
PlanarMotion camera_pose(const Scene& scene, int cam, int frame);

/// Camera-frame displacement of static points between two frames, i.e. the
/// relative transform mapping camera coordinates at `frame_from` to camera
/// coordinates at `frame_to`.
PlanarMotion relative_ego_motion(const Scene& scene, int cam, int frame_from,
                                 int frame_to);

/// World-frame translation of an object over [t_from, t_to] re-expressed in
/// the camera frame at `frame_to` (the frame the correspondence equations
/// work in).
PlanarMotion object_motion_in_camera(const Scene& scene, int cam,
                                     int object_index, int frame_from,
                                     int frame_to);

/// Ground-truth boxes (world frame) advected to the frame time; track ids
/// are the object ids.
std::vector<Box3D> ground_truth(const Scene& scene, int frame);

/// Value of the object's procedural surface field at a box-local point.
double surface_feature(const SceneObject& obj, const Point3& local,
                       int channel);

/// Casts the ray through (real-valued) pixel coordinates against every
/// object box, returning the nearest hit.
RayHit raycast(const Scene& scene, int cam, int frame, const Pixel& px);

Rendering render(const Scene& scene, int cam, int frame);

FeatureMap render_feature_map(const Scene& scene, int cam, int frame);

/// Fraction of each object's projected footprint that survives the z-buffer
/// (0 when fully off-screen or occluded).
std::vector<double> visibility(const Rendering& r, int n_objects);

/// Noisy world-frame proposals standing in for the perspective-view
/// detector; one box per sufficiently visible object plus spurious boxes.
/// track_id tags the source object index (-1 for false positives) so that
/// ablations can look up ground truth; real consumers ignore it.
std::vector<Box3D> sample_proposals(const Scene& scene, int frame,
                                    const ProposalNoise& noise,
                                    std::uint64_t seed);

}  // namespace dyno
