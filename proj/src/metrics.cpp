#include "dyno/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dyno/errors.hpp"

namespace dyno {

std::vector<std::pair<int, int>> match_detections(
    const std::vector<Box3D>& preds, const std::vector<Box3D>& gts,
    double threshold) {
  if (!(threshold > 0.0))
    throw ConfigError("match_detections: threshold must be positive");
  std::vector<int> order(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    return a < b;
  });
  std::vector<char> gt_used(gts.size(), 0);
  std::vector<std::pair<int, int>> matches;
  for (int p : order) {
    int best = -1;
    double best_dist = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].class_id != preds[p].class_id) continue;
      const double d = ground_distance(preds[p], gts[g]);
      if (d <= best_dist) {
        best_dist = d;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      gt_used[best] = 1;
      matches.emplace_back(p, best);
    }
  }
  return matches;
}

namespace {

struct RankedPred {
  double score;
  int frame;
  int index;
};

// np.interp semantics: clamp left to the first value, `right` past the end.
double interp(const std::vector<double>& xs, const std::vector<double>& ys,
              double x, double right) {
  if (xs.empty()) return right;
  if (x <= xs.front()) return ys.front();
  if (x > xs.back()) return right;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  if (xs[hi] == xs[lo]) return ys[hi];
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

}  // namespace

DetectionEvalReport detection_report(
    const std::vector<std::vector<Box3D>>& preds_per_frame,
    const std::vector<std::vector<Box3D>>& gts_per_frame,
    const DetectionEvalConfig& cfg) {
  if (preds_per_frame.size() != gts_per_frame.size())
    throw ConfigError("detection_report: frame counts differ");
  const int n_frames = static_cast<int>(gts_per_frame.size());

  std::set<int> classes;
  for (const auto& frame : gts_per_frame)
    for (const Box3D& b : frame) classes.insert(b.class_id);

  DetectionEvalReport report;
  double ap_sum = 0.0;
  int ap_count = 0;
  double ate_sum = 0.0, ave_sum = 0.0;
  int tp_count = 0;

  for (int cls : classes) {
    std::size_t npos = 0;
    for (const auto& frame : gts_per_frame)
      for (const Box3D& b : frame)
        if (b.class_id == cls) ++npos;
    if (npos == 0) continue;

    std::vector<RankedPred> ranked;
    for (int f = 0; f < n_frames; ++f) {
      const auto& frame = preds_per_frame[f];
      for (std::size_t i = 0; i < frame.size(); ++i)
        if (frame[i].class_id == cls)
          ranked.push_back({frame[i].score, f, static_cast<int>(i)});
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const RankedPred& a, const RankedPred& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.frame != b.frame) return a.frame < b.frame;
                return a.index < b.index;
              });

    for (double thr : cfg.thresholds) {
      std::vector<std::vector<char>> gt_used(n_frames);
      for (int f = 0; f < n_frames; ++f)
        gt_used[f].assign(gts_per_frame[f].size(), 0);

      std::vector<double> recall, precision;
      std::size_t tp = 0, fp = 0;
      for (const RankedPred& rp : ranked) {
        const Box3D& pred = preds_per_frame[rp.frame][rp.index];
        const auto& gts = gts_per_frame[rp.frame];
        int best = -1;
        double best_dist = thr;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gt_used[rp.frame][g] || gts[g].class_id != cls) continue;
          const double d = ground_distance(pred, gts[g]);
          if (d <= best_dist) {
            best_dist = d;
            best = static_cast<int>(g);
          }
        }
        if (best >= 0) {
          gt_used[rp.frame][best] = 1;
          ++tp;
          if (thr == cfg.tp_metric_threshold) {
            const Box3D& gt = gts[best];
            ate_sum += best_dist;
            ave_sum += std::hypot(pred.vx - gt.vx, pred.vz - gt.vz);
            ++tp_count;
          }
        } else {
          ++fp;
        }
        recall.push_back(static_cast<double>(tp) / npos);
        precision.push_back(static_cast<double>(tp) / (tp + fp));
      }

      double ap = 0.0;
      if (!recall.empty()) {
        int used = 0;
        double acc = 0.0;
        for (int k = 0; k < cfg.interp_points; ++k) {
          const double r = static_cast<double>(k) / (cfg.interp_points - 1);
          if (r <= cfg.min_recall) continue;
          const double p = interp(recall, precision, r, 0.0);
          acc += std::max(0.0, p - cfg.min_precision);
          ++used;
        }
        if (used > 0) ap = acc / used / (1.0 - cfg.min_precision);
      }
      report.ap[cls][thr] = ap;
      report.pr[cls][thr] = PrCurve{recall, precision};
      ap_sum += ap;
      ++ap_count;
    }
  }

  report.map = ap_count > 0 ? ap_sum / ap_count : 0.0;
  if (tp_count > 0) {
    report.mate = ate_sum / tp_count;
    report.mave = ave_sum / tp_count;
  }
  return report;
}

namespace {

struct MotCounts {
  std::size_t fp = 0, fn = 0, ids = 0, matches = 0, gt_total = 0;
  double dist_sum = 0.0;
};

// CLEAR-MOT pass: sticky correspondences from the previous frame are kept
// when still within the gate, the remainder matched greedily by distance.
MotCounts clear_mot(const std::vector<std::vector<Box3D>>& tracks,
                    const std::vector<std::vector<Box3D>>& gts,
                    double gate) {
  MotCounts out;
  std::map<int, int> last_id;  // gt track id -> matched tracker id
  for (std::size_t f = 0; f < gts.size(); ++f) {
    const auto& gt = gts[f];
    const auto& tk = tracks[f];
    out.gt_total += gt.size();
    std::vector<char> gt_used(gt.size(), 0), tk_used(tk.size(), 0);
    std::vector<std::pair<int, int>> frame_matches;

    // Sticky pass.
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const auto it = last_id.find(gt[g].track_id);
      if (it == last_id.end()) continue;
      int best = -1;
      double best_dist = gate;
      for (std::size_t t = 0; t < tk.size(); ++t) {
        if (tk_used[t] || tk[t].track_id != it->second) continue;
        if (tk[t].class_id != gt[g].class_id) continue;
        const double d = ground_distance(tk[t], gt[g]);
        if (d <= best_dist) {
          best_dist = d;
          best = static_cast<int>(t);
        }
      }
      if (best >= 0) {
        gt_used[g] = 1;
        tk_used[best] = 1;
        frame_matches.emplace_back(static_cast<int>(g), best);
        out.dist_sum += best_dist;
      }
    }
    // Greedy distance pass for the rest.
    struct Pair {
      double dist;
      int g, t;
    };
    std::vector<Pair> pairs;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_used[g]) continue;
      for (std::size_t t = 0; t < tk.size(); ++t) {
        if (tk_used[t] || tk[t].class_id != gt[g].class_id) continue;
        const double d = ground_distance(tk[t], gt[g]);
        if (d <= gate)
          pairs.push_back({d, static_cast<int>(g), static_cast<int>(t)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      if (a.g != b.g) return a.g < b.g;
      return a.t < b.t;
    });
    for (const Pair& p : pairs) {
      if (gt_used[p.g] || tk_used[p.t]) continue;
      gt_used[p.g] = 1;
      tk_used[p.t] = 1;
      frame_matches.emplace_back(p.g, p.t);
      out.dist_sum += p.dist;
    }

    for (const auto& [g, t] : frame_matches) {
      ++out.matches;
      const int gt_id = gt[g].track_id;
      const int tk_id = tk[t].track_id;
      auto it = last_id.find(gt_id);
      if (it != last_id.end() && it->second != tk_id) ++out.ids;
      last_id[gt_id] = tk_id;
    }
    for (std::size_t g = 0; g < gt.size(); ++g)
      if (!gt_used[g]) ++out.fn;
    for (std::size_t t = 0; t < tk.size(); ++t)
      if (!tk_used[t]) ++out.fp;
  }
  return out;
}

std::vector<std::vector<Box3D>> filter_by_score(
    const std::vector<std::vector<Box3D>>& frames, double threshold) {
  std::vector<std::vector<Box3D>> out(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (const Box3D& b : frames[f])
      if (b.score >= threshold) out[f].push_back(b);
  return out;
}

}  // namespace

TrackingEvalReport tracking_report(
    const std::vector<std::vector<Box3D>>& tracks_per_frame,
    const std::vector<std::vector<Box3D>>& gt_per_frame,
    const TrackingEvalConfig& cfg) {
  if (tracks_per_frame.size() != gt_per_frame.size())
    throw ConfigError("tracking_report: frame counts differ");
  TrackingEvalReport report;

  std::size_t gt_total = 0;
  for (const auto& f : gt_per_frame) gt_total += f.size();
  if (gt_total == 0)
    throw ConfigError("tracking_report: no ground-truth objects");

  // Recall as a function of score threshold (greedy per-frame matching).
  std::vector<double> scores;
  std::vector<char> is_tp;
  for (std::size_t f = 0; f < tracks_per_frame.size(); ++f) {
    const auto matches = match_detections(tracks_per_frame[f], gt_per_frame[f],
                                          cfg.match_distance);
    std::vector<char> matched(tracks_per_frame[f].size(), 0);
    for (const auto& [p, g] : matches) matched[p] = 1;
    for (std::size_t i = 0; i < tracks_per_frame[f].size(); ++i) {
      scores.push_back(tracks_per_frame[f][i].score);
      is_tp.push_back(matched[i]);
    }
  }
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  // recall achieved if the threshold admits the first k outputs
  std::vector<double> thr_values;
  std::vector<double> thr_recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += is_tp[order[k]] ? 1 : 0;
    const bool boundary =
        k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (boundary) {
      thr_values.push_back(scores[order[k]]);
      thr_recall.push_back(static_cast<double>(tp) / gt_total);
    }
  }
  report.recall = thr_recall.empty() ? 0.0 : thr_recall.back();

  const MotCounts full = clear_mot(tracks_per_frame, gt_per_frame,
                                   cfg.match_distance);
  report.id_switches = static_cast<int>(full.ids);

  double mota_sum = 0.0, motp_sum = 0.0;
  int achieved = 0;
  for (int k = 1; k <= cfg.recall_points; ++k) {
    const double target = static_cast<double>(k) / cfg.recall_points;
    // Highest threshold whose recall reaches the target.
    std::optional<double> threshold;
    for (std::size_t i = 0; i < thr_values.size(); ++i) {
      if (thr_recall[i] + 1e-12 >= target) {
        threshold = thr_values[i];
        break;
      }
    }
    if (!threshold) continue;
    const MotCounts c = clear_mot(filter_by_score(tracks_per_frame, *threshold),
                                  gt_per_frame, cfg.match_distance);
    const double mota =
        1.0 - static_cast<double>(c.fp + c.fn + c.ids) / c.gt_total;
    const double motp = c.matches > 0 ? c.dist_sum / c.matches : 0.0;
    report.recall_grid.push_back(target);
    report.mota.push_back(mota);
    report.motp.push_back(motp);
    mota_sum += std::clamp(mota, 0.0, 1.0);
    motp_sum += motp;
    ++achieved;
  }
  if (achieved > 0) {
    report.amota = mota_sum / achieved;
    report.amotp = motp_sum / achieved;
  }
  return report;
}

BiasTable bias_analysis(const std::vector<Scene>& scenes,
                        const std::vector<int>& frame_gaps,
                        const std::vector<double>& speed_bin_edges) {
  if (scenes.empty()) throw MissingData("bias_analysis: no scenes");
  if (frame_gaps.empty()) throw MissingData("bias_analysis: no time gaps");
  if (speed_bin_edges.size() < 2)
    throw MissingData("bias_analysis: need at least one speed bin");

  const std::size_t n_bins = speed_bin_edges.size() - 1;
  std::vector<std::vector<double>> sums(frame_gaps.size(),
                                        std::vector<double>(n_bins, 0.0));
  std::vector<std::vector<int>> counts(frame_gaps.size(),
                                       std::vector<int>(n_bins, 0));
  BiasTable table;

  for (const Scene& scene : scenes) {
    const CameraRig& rig = scene.cameras.front();
    std::vector<char> counted(scene.objects.size(), 0);
    for (std::size_t gi = 0; gi < frame_gaps.size(); ++gi) {
      const int gap = frame_gaps[gi];
      for (int f0 = 0; f0 + gap < scene.frame_count(); ++f0) {
        const int f1 = f0 + gap;
        const PlanarMotion ego = relative_ego_motion(scene, 0, f0, f1);
        if (ego.yaw != 0.0) continue;  // closed forms need pure translation
        const double gap_s = scene.frame_times[f1] - scene.frame_times[f0];
        const std::vector<Box3D> gt0 = ground_truth(scene, f0);
        for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
          const SceneObject& obj = scene.objects[oi];
          const double speed = std::hypot(obj.vx, obj.vz);
          if (!counted[oi]) {
            counted[oi] = 1;
            if (speed > 1e-12)
              ++table.n_moving;
            else
              ++table.n_static;
          }
          // Static-world correspondence pixels of the object center.
          const PlanarMotion pose0 = camera_pose(scene, 0, f0);
          Point3 c0 = apply_motion(inverse(pose0), gt0[oi].center());
          c0.y = gt0[oi].y - rig.mount_y;
          if (!(c0.z > 0.5)) continue;
          const Point3 c1s = apply_motion(ego, c0);
          if (!(c1s.z > 0.5)) continue;
          Pixel p0, p1;
          try {
            p0 = project(c0, rig.k);
            p1 = project(c1s, rig.k);
          } catch (const DegenerateProjection&) {
            continue;
          }
          if (std::abs(p0.u - p1.u) <= kNoParallaxEps) continue;
          const PlanarMotion obj_cam =
              object_motion_in_camera(scene, 0, static_cast<int>(oi), f0, f1);
          const double bias = depth_bias(p0, p1, ego, obj_cam, rig.k);
          if (speed <= 1e-12) {
            table.static_mean_abs_bias += std::abs(bias);
            ++table.static_samples;
            continue;
          }
          for (std::size_t b = 0; b < n_bins; ++b) {
            if (speed >= speed_bin_edges[b] && speed < speed_bin_edges[b + 1]) {
              sums[gi][b] += std::abs(bias);
              ++counts[gi][b];
              break;
            }
          }
        }
      }
    }
  }

  if (table.static_samples > 0) table.static_mean_abs_bias /= table.static_samples;
  const int total = table.n_moving + table.n_static;
  table.moving_fraction =
      total > 0 ? static_cast<double>(table.n_moving) / total : 0.0;
  for (std::size_t gi = 0; gi < frame_gaps.size(); ++gi) {
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (counts[gi][b] == 0) continue;  // empty bins stay absent
      BiasCell cell;
      cell.speed_lo = speed_bin_edges[b];
      cell.speed_hi = speed_bin_edges[b + 1];
      cell.time_gap = frame_gaps[gi] *
                      (scenes.front().frame_times[1] - scenes.front().frame_times[0]);
      cell.mean_abs_bias = sums[gi][b] / counts[gi][b];
      cell.count = counts[gi][b];
      table.cells.push_back(cell);
    }
  }
  return table;
}

LinearFit linear_fit(const std::vector<double>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("linear_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace dyno
