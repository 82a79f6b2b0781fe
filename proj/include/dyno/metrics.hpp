#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dyno/box.hpp"
#include "dyno/scene.hpp"

namespace dyno {

struct DetectionEvalConfig {
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};  // meters
  double tp_metric_threshold = 2.0;  // TP set used for mATE / mAVE
  double min_recall = 0.1;
  double min_precision = 0.1;
  int interp_points = 101;
};

struct PrCurve {
  std::vector<double> recall;
  std::vector<double> precision;
};

struct DetectionEvalReport {
  // ap[class_id][threshold]
  std::map<int, std::map<double, double>> ap;
  std::map<int, std::map<double, PrCurve>> pr;
  double map = 0.0;
  std::optional<double> mate;  // absent when there is no true positive
  std::optional<double> mave;
};

struct TrackingEvalConfig {
  int recall_points = 40;
  double match_distance = 2.0;
};

struct TrackingEvalReport {
  double amota = 0.0;  // clamped to [0, 1] for reporting
  double amotp = 0.0;
  double recall = 0.0;       // best achievable
  int id_switches = 0;       // at the full (unfiltered) operating point
  std::vector<double> recall_grid;  // achieved recall targets
  std::vector<double> mota;         // per achieved recall point
  std::vector<double> motp;
};

/// Greedy score-descending one-to-one matching of predictions to the nearest
/// unmatched ground truth within the ground-plane distance threshold.
/// Returns (pred index, gt index) pairs.
std::vector<std::pair<int, int>> match_detections(
    const std::vector<Box3D>& preds, const std::vector<Box3D>& gts,
    double threshold);

/// Center-distance AP at each threshold with the clipped-PR convention
/// (operating points under 10 % recall/precision are discarded), mAP over
/// classes and thresholds, and mean translation / velocity errors over the
/// true positives at the 2 m threshold.
DetectionEvalReport detection_report(
    const std::vector<std::vector<Box3D>>& preds_per_frame,
    const std::vector<std::vector<Box3D>>& gts_per_frame,
    const DetectionEvalConfig& cfg = {});

/// MOTA / MOTP swept over recall operating points; AMOTA / AMOTP are the
/// means over the achieved points. Ground-truth track ids come from
/// Box3D::track_id.
TrackingEvalReport tracking_report(
    const std::vector<std::vector<Box3D>>& tracks_per_frame,
    const std::vector<std::vector<Box3D>>& gt_per_frame,
    const TrackingEvalConfig& cfg = {});

struct BiasCell {
  double speed_lo = 0.0, speed_hi = 0.0;
  double time_gap = 0.0;  // seconds
  double mean_abs_bias = 0.0;
  int count = 0;
};

struct BiasTable {
  std::vector<BiasCell> cells;  // only populated (count > 0) cells
  int n_moving = 0;
  int n_static = 0;
  double moving_fraction = 0.0;
  double static_mean_abs_bias = 0.0;  // sanity: ~0 by construction
  int static_samples = 0;
};

/// Depth error a static-assumption stereo recovery would incur on each
/// moving object, aggregated into (speed bin, time gap) cells. The pixel
/// geometry of each observation is the static-world correspondence of the
/// object center (ego parallax only), so the gap formula's linearity in
/// speed and time gap is measured directly; see depth_bias.
BiasTable bias_analysis(const std::vector<Scene>& scenes,
                        const std::vector<int>& frame_gaps,
                        const std::vector<double>& speed_bin_edges);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x,
                     const std::vector<double>& y);

}  // namespace dyno
