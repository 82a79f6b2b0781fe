#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "dyno/box.hpp"

namespace dyno {

struct TrackerConfig {
  double nms_iou = 0.1;
  double score_threshold = 0.25;
  int max_misses = 2;  // removed once consecutively unmatched more than this
  double gate_distance = 2.0;
  std::map<int, double> gate_per_class;
  Eigen::Vector4d process_noise{0.25, 0.25, 1.0, 1.0};       // Q diagonal
  Eigen::Vector4d measurement_noise{0.25, 0.25, 0.5, 0.5};   // R diagonal
  Eigen::Vector4d initial_variance{1.0, 1.0, 4.0, 4.0};
  bool use_velocity_warp = true;
  double score_alpha = 0.7;  // EMA toward the matched detection score
  double score_decay = 0.9;  // per missed frame
};

/// One tracklet: constant-velocity Kalman state [x, z, vx, vz] on the ground
/// plane plus the last associated box (size / yaw / class) and life-cycle
/// counters. States live in the frame of the last processed step.
struct TrackState {
  int track_id = -1;
  Eigen::Vector4d kalman_mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d kalman_cov = Eigen::Matrix4d::Identity();
  Box3D box_template;
  int misses = 0;
  int age = 0;
  double score = 0.0;
};

/// Greedy score-descending NMS at the IoU threshold, then score filtering.
std::vector<Box3D> preprocess(const std::vector<Box3D>& dets,
                              const TrackerConfig& cfg);

TrackState kalman_predict(const TrackState& ts, double dt,
                          const Eigen::Vector4d& q_diag);

/// Identity measurement model on all four components; Joseph-form update.
/// Throws InvalidNoise when R is not positive semidefinite.
TrackState kalman_update(const TrackState& ts,
                         const Eigen::Vector4d& measurement,
                         const Eigen::Matrix4d& R);

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, det index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_dets;
};

/// Warps detection centers to the previous frame (inverse ego motion, then
/// minus velocity * dt) and greedily accepts ascending-distance pairs within
/// the class gate. Ties break on (track_id, det index).
Association associate(const std::vector<TrackState>& tracks,
                      const std::vector<Box3D>& dets, const PlanarMotion& ego,
                      double dt, const TrackerConfig& cfg);

/// Velocity-warped nearest-center multi-object tracker. step() must be
/// called sequentially per stream; `ego` maps the previous step's frame
/// coordinates to the current frame.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(std::move(cfg)) {}

  std::vector<Box3D> step(const std::vector<Box3D>& dets,
                          const PlanarMotion& ego, double dt, int frame_id);

  const std::vector<TrackState>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<TrackState> tracks_;
  int next_id_ = 0;
};

}  // namespace dyno
