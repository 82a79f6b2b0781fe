#include "dyno/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "dyno/errors.hpp"

namespace dyno {

std::vector<Box3D> preprocess(const std::vector<Box3D>& dets,
                              const TrackerConfig& cfg) {
  std::vector<int> order(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });
  std::vector<Box3D> kept;
  for (int i : order) {
    bool suppressed = false;
    for (const Box3D& k : kept) {
      if (box_iou_3d(dets[i], k) > cfg.nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  std::vector<Box3D> out;
  for (const Box3D& b : kept) {
    if (b.score >= cfg.score_threshold) out.push_back(b);
  }
  return out;
}

TrackState kalman_predict(const TrackState& ts, double dt,
                          const Eigen::Vector4d& q_diag) {
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  TrackState out = ts;
  out.kalman_mean = F * ts.kalman_mean;
  out.kalman_cov = F * ts.kalman_cov * F.transpose();
  out.kalman_cov.diagonal() += q_diag;
  out.kalman_cov = 0.5 * (out.kalman_cov + out.kalman_cov.transpose()).eval();
  return out;
}

TrackState kalman_update(const TrackState& ts,
                         const Eigen::Vector4d& measurement,
                         const Eigen::Matrix4d& R) {
  if (!R.isApprox(R.transpose(), 1e-9))
    throw InvalidNoise("kalman_update: R must be symmetric");
  Eigen::LDLT<Eigen::Matrix4d> rchk(R);
  if (rchk.info() != Eigen::Success ||
      (rchk.vectorD().array() < -1e-9).any())
    throw InvalidNoise("kalman_update: R must be positive semidefinite");

  const Eigen::Matrix4d S = ts.kalman_cov + R;
  const Eigen::Matrix4d K = S.ldlt().solve(ts.kalman_cov).transpose();
  TrackState out = ts;
  out.kalman_mean = ts.kalman_mean + K * (measurement - ts.kalman_mean);
  const Eigen::Matrix4d I_K = Eigen::Matrix4d::Identity() - K;
  // Joseph form keeps the covariance PSD under roundoff.
  out.kalman_cov =
      I_K * ts.kalman_cov * I_K.transpose() + K * R * K.transpose();
  out.kalman_cov = 0.5 * (out.kalman_cov + out.kalman_cov.transpose()).eval();
  return out;
}

Association associate(const std::vector<TrackState>& tracks,
                      const std::vector<Box3D>& dets, const PlanarMotion& ego,
                      double dt, const TrackerConfig& cfg) {
  if (!(dt > 0.0)) throw ConfigError("associate: dt must be positive");
  const PlanarMotion inv_ego = inverse(ego);

  struct Pair {
    double dist;
    int track, det, track_id;
  };
  std::vector<Pair> pairs;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    Point3 c = apply_motion(inv_ego, dets[d].center());
    if (cfg.use_velocity_warp) {
      const Point3 v = rotate_only(inv_ego, {dets[d].vx, 0.0, dets[d].vz});
      c.x -= v.x * dt;
      c.z -= v.z * dt;
    }
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (tracks[t].box_template.class_id != dets[d].class_id) continue;
      const double dist = std::hypot(c.x - tracks[t].kalman_mean(0),
                                     c.z - tracks[t].kalman_mean(1));
      double gate = cfg.gate_distance;
      if (auto it = cfg.gate_per_class.find(dets[d].class_id);
          it != cfg.gate_per_class.end())
        gate = it->second;
      if (dist <= gate)
        pairs.push_back({dist, static_cast<int>(t), static_cast<int>(d),
                         tracks[t].track_id});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.det < b.det;
  });

  Association out;
  std::vector<char> track_used(tracks.size(), 0), det_used(dets.size(), 0);
  for (const Pair& p : pairs) {
    if (track_used[p.track] || det_used[p.det]) continue;
    track_used[p.track] = 1;
    det_used[p.det] = 1;
    out.matches.emplace_back(p.track, p.det);
  }
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (!track_used[t]) out.unmatched_tracks.push_back(static_cast<int>(t));
  for (std::size_t d = 0; d < dets.size(); ++d)
    if (!det_used[d]) out.unmatched_dets.push_back(static_cast<int>(d));
  return out;
}

std::vector<Box3D> Tracker::step(const std::vector<Box3D>& dets,
                                 const PlanarMotion& ego, double dt,
                                 int frame_id) {
  const std::vector<Box3D> filtered = preprocess(dets, cfg_);

  // Association distances use the stored (previous-frame) track positions;
  // prediction only forms the update prior.
  const Association assoc = associate(tracks_, filtered, ego, dt, cfg_);

  const double c = std::cos(ego.yaw), s = std::sin(ego.yaw);
  Eigen::Matrix4d G = Eigen::Matrix4d::Zero();
  G(0, 0) = c;
  G(0, 1) = s;
  G(1, 0) = -s;
  G(1, 1) = c;
  G(2, 2) = c;
  G(2, 3) = s;
  G(3, 2) = -s;
  G(3, 3) = c;
  for (TrackState& ts : tracks_) {
    ts = kalman_predict(ts, dt, cfg_.process_noise);
    const Point3 p =
        apply_motion(ego, {ts.kalman_mean(0), 0.0, ts.kalman_mean(1)});
    const Point3 v =
        rotate_only(ego, {ts.kalman_mean(2), 0.0, ts.kalman_mean(3)});
    ts.kalman_mean << p.x, p.z, v.x, v.z;
    ts.kalman_cov = (G * ts.kalman_cov * G.transpose()).eval();
    ts.kalman_cov = 0.5 * (ts.kalman_cov + ts.kalman_cov.transpose()).eval();
    ts.box_template = box_to_parent(ego, ts.box_template);
    ++ts.age;
  }

  Eigen::Matrix4d R = Eigen::Matrix4d::Zero();
  R.diagonal() = cfg_.measurement_noise;
  std::vector<char> matched(tracks_.size(), 0);
  for (const auto& [t, d] : assoc.matches) {
    const Box3D& det = filtered[d];
    const Eigen::Vector4d z(det.x, det.z, det.vx, det.vz);
    tracks_[t] = kalman_update(tracks_[t], z, R);
    tracks_[t].misses = 0;
    tracks_[t].box_template = det;
    tracks_[t].score = cfg_.score_alpha * det.score +
                       (1.0 - cfg_.score_alpha) * tracks_[t].score;
    matched[t] = 1;
  }
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    if (matched[t]) continue;
    ++tracks_[t].misses;
    tracks_[t].score *= cfg_.score_decay;
  }
  std::erase_if(tracks_, [&](const TrackState& ts) {
    return ts.misses > cfg_.max_misses;
  });
  for (int d : assoc.unmatched_dets) {
    TrackState ts;
    ts.track_id = next_id_++;
    const Box3D& det = filtered[d];
    ts.kalman_mean << det.x, det.z, det.vx, det.vz;
    ts.kalman_cov = Eigen::Matrix4d::Zero();
    ts.kalman_cov.diagonal() = cfg_.initial_variance;
    ts.box_template = det;
    ts.score = det.score;
    tracks_.push_back(std::move(ts));
  }

  std::vector<Box3D> out;
  out.reserve(tracks_.size());
  for (const TrackState& ts : tracks_) {
    Box3D b = ts.box_template;
    b.x = ts.kalman_mean(0);
    b.z = ts.kalman_mean(1);
    b.vx = ts.kalman_mean(2);
    b.vz = ts.kalman_mean(3);
    b.score = ts.score;
    b.frame_id = frame_id;
    b.track_id = ts.track_id;
    out.push_back(b);
  }
  return out;
}

}  // namespace dyno
