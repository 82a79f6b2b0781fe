#include "dyno/refine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "dyno/errors.hpp"

namespace dyno {

namespace {

constexpr std::array<double BoxResidual::*, 9> kAttrs = {
    &BoxResidual::dx,  &BoxResidual::dy,  &BoxResidual::dz,
    &BoxResidual::dw,  &BoxResidual::dh,  &BoxResidual::dl,
    &BoxResidual::dyaw, &BoxResidual::dvx, &BoxResidual::dvz};

std::vector<double> symmetric_grid(const SearchRange& r) {
  const int n = std::max(0, static_cast<int>(std::floor(r.range / r.step + 1e-9)));
  std::vector<double> out;
  out.reserve(2 * n + 1);
  for (int k = -n; k <= n; ++k) out.push_back(k * r.step);
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

// Supported evidence cells of one volume pair plus their weights.
struct Blob {
  const std::vector<Point3>* cells = nullptr;
  std::vector<double> m;
  std::vector<std::size_t> idx;
  double total = 0.0;
};

Blob make_blob(const std::vector<Point3>& cells, std::vector<double> m) {
  Blob b;
  b.cells = &cells;
  b.m = std::move(m);
  for (std::size_t i = 0; i < b.m.size(); ++i) {
    if (b.m[i] > 1e-12) {
      b.idx.push_back(i);
      b.total += b.m[i];
    }
  }
  return b;
}

// Evidence kernel about the hypothesized box shell; faces turned away from
// the camera are damped.
double shell_score(const Blob& blob, const Box3D& box,
                   const RefineConfig& cfg) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hw = 0.5 * box.w, hh = 0.5 * box.h, hl = 0.5 * box.l;
  double acc = 0.0;
  for (std::size_t i : blob.idx) {
    const Point3& p = (*blob.cells)[i];
    const double rx = p.x - box.x, ry = p.y - box.y, rz = p.z - box.z;
    const double qx = c * rx - s * rz;
    const double qz = s * rx + c * rz;
    const double ex = std::abs(qx) - hw;
    const double ey = std::abs(ry) - hh;
    const double ez = std::abs(qz) - hl;
    double sdf;
    if (ex <= 0.0 && ey <= 0.0 && ez <= 0.0) {
      sdf = std::max(ex, std::max(ey, ez));
    } else {
      const double px = std::max(ex, 0.0), py = std::max(ey, 0.0),
                   pz = std::max(ez, 0.0);
      sdf = std::sqrt(px * px + py * py + pz * pz);
    }
    // Dominant face and its camera-frame outward normal.
    double nx = 0.0, ny = 0.0, nz = 0.0;
    if (ex >= ey && ex >= ez) {
      const double sign = qx >= 0.0 ? 1.0 : -1.0;
      nx = sign * c;
      nz = sign * s;
    } else if (ey >= ez) {
      ny = ry >= 0.0 ? 1.0 : -1.0;
    } else {
      const double sign = qz >= 0.0 ? 1.0 : -1.0;
      nx = -sign * s;
      nz = sign * c;
    }
    const bool facing = nx * p.x + ny * p.y + nz * p.z < 0.0;
    const double k = std::exp(-std::abs(sdf) / cfg.shell_scale) *
                     (facing ? 1.0 : cfg.hidden_face_weight);
    acc += k * blob.m[i];
  }
  return acc;
}

struct Sample {
  double score = 0.0;
  double a = 0.0, b = 0.0;  // the two swept attribute values
  double tie = 0.0;         // tie-break key, smaller preferred
};

struct SoftStats {
  double sigma_a = 0.0;
  double sigma_b = 0.0;
};

// Soft-max weights on scores (higher is better); sigma per swept attribute.
SoftStats soft_stats(const std::vector<Sample>& samples,
                     const RefineConfig& cfg) {
  SoftStats st;
  if (samples.empty()) return st;
  double smax = -std::numeric_limits<double>::infinity();
  for (const Sample& s : samples) smax = std::max(smax, s.score);
  std::vector<double> gaps;
  gaps.reserve(samples.size());
  for (const Sample& s : samples) gaps.push_back(smax - s.score);
  double tau = cfg.temperature > 0.0 ? cfg.temperature : median_of(gaps);
  tau = std::max(tau, cfg.tau_floor);
  double wsum = 0.0, ma = 0.0, mb = 0.0;
  std::vector<double> w(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w[i] = std::exp(-gaps[i] / tau);
    wsum += w[i];
    ma += w[i] * samples[i].a;
    mb += w[i] * samples[i].b;
  }
  ma /= wsum;
  mb /= wsum;
  double va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    va += w[i] * (samples[i].a - ma) * (samples[i].a - ma);
    vb += w[i] * (samples[i].b - mb) * (samples[i].b - mb);
  }
  st.sigma_a = std::sqrt(va / wsum) + cfg.sigma_floor;
  st.sigma_b = std::sqrt(vb / wsum) + cfg.sigma_floor;
  return st;
}

const Sample& best_sample(const std::vector<Sample>& samples) {
  const Sample* best = &samples.front();
  for (const Sample& s : samples) {
    if (s.score > best->score + 1e-12 ||
        (std::abs(s.score - best->score) <= 1e-12 && s.tie < best->tie)) {
      best = &s;
    }
  }
  return *best;
}

double weighted_quantile_abs(const std::vector<double>& values,
                             const std::vector<double>& weights, double q) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  double total = 0.0;
  for (double w : weights) total += w;
  double acc = 0.0;
  for (std::size_t i : order) {
    acc += weights[i];
    if (acc >= q * total) return values[i];
  }
  return values.empty() ? 0.0 : values[order.back()];
}

// Vertical offset and size residuals from the evidence blob around the
// (already centered) box.
void fit_blob_extents(const Blob& blob, const Box3D& box,
                      const RefineConfig& cfg, BoxResidual& res,
                      BoxResidual& sig) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  double peak = 0.0;
  for (std::size_t i : blob.idx) peak = std::max(peak, blob.m[i]);
  if (peak <= 0.0) return;
  const double keep = 0.15 * peak;
  const double rx_lim = 0.75 * box.w + cfg.shell_scale;
  const double ry_lim = 0.75 * box.h + cfg.shell_scale;
  const double rz_lim = 0.75 * box.l + cfg.shell_scale;
  std::vector<double> ax, ay, az, w;
  double ysum = 0.0, wsum = 0.0, y2sum = 0.0;
  for (std::size_t i : blob.idx) {
    if (blob.m[i] < keep) continue;
    const Point3& p = (*blob.cells)[i];
    const double rx = p.x - box.x, ry = p.y - box.y, rz = p.z - box.z;
    const double qx = c * rx - s * rz;
    const double qz = s * rx + c * rz;
    if (std::abs(qx) > rx_lim || std::abs(ry) > ry_lim || std::abs(qz) > rz_lim)
      continue;
    ax.push_back(std::abs(qx));
    ay.push_back(std::abs(ry));
    az.push_back(std::abs(qz));
    w.push_back(blob.m[i]);
    ysum += blob.m[i] * ry;
    y2sum += blob.m[i] * ry * ry;
    wsum += blob.m[i];
  }
  if (wsum <= 0.0) return;
  const double ymean = ysum / wsum;
  res.dy = std::clamp(ymean, -cfg.dy_gate, cfg.dy_gate);
  sig.dy = std::sqrt(std::max(0.0, y2sum / wsum - ymean * ymean)) +
           cfg.sigma_floor;
  auto fit = [&](const std::vector<double>& a, double current) {
    const double est = 2.0 * weighted_quantile_abs(a, w, 0.9);
    return std::clamp(0.5 * (est - current), -cfg.size_gate, cfg.size_gate);
  };
  res.dw = fit(ax, box.w);
  res.dh = fit(ay, box.h);
  res.dl = fit(az, box.l);
  sig.dw = sig.dh = sig.dl = 0.25;
}

Box3D offset_box(const Box3D& anchor, double dx, double dy, double dz,
                 double dyaw) {
  Box3D b = anchor;
  b.x += dx;
  b.y += dy;
  b.z += dz;
  b.yaw = wrap_angle(b.yaw + dyaw);
  return b;
}

double ref_support_total(const LocalVolume& ref) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref.valid[i]) acc += ref.weight[i] / ref.weight_scale;
  }
  return acc;
}

}  // namespace

RefineConfig RefineConfig::scaled(double factor) const {
  RefineConfig out = *this;
  out.dz.range *= factor;
  out.dz.step *= factor;
  out.dx.range *= factor;
  out.dx.step *= factor;
  out.dv.range *= factor;
  out.dv.step *= factor;
  out.dyaw.range *= factor;
  out.dyaw.step *= factor;
  return out;
}

Box3D apply_residual(const Box3D& box, const BoxResidual& r) {
  Box3D out = box;
  out.x += r.dx;
  out.y += r.dy;
  out.z += r.dz;
  out.w = std::max(0.1, box.w + r.dw);
  out.h = std::max(0.1, box.h + r.dh);
  out.l = std::max(0.1, box.l + r.dl);
  out.yaw = wrap_angle(box.yaw + r.dyaw);
  out.vx += r.dvx;
  out.vz += r.dvz;
  return out;
}

PairEvaluator::PairEvaluator(const FeatureMap& cur,
                             const CameraIntrinsics& cam_cur,
                             const FeatureMap& prev,
                             const CameraIntrinsics& cam_prev,
                             PlanarMotion ego, double gap, const Box3D& anchor,
                             const VolumeConfig& vcfg,
                             const DepthDistribution& dd)
    : prev_(&prev),
      cam_prev_(cam_prev),
      ego_(ego),
      gap_(gap),
      anchor_(anchor),
      dd_(dd),
      ref_(build_local_volume(cur, cam_cur, anchor, vcfg, dd)) {}

std::shared_ptr<const CostVolume> PairEvaluator::at_velocity(double vx,
                                                             double vz) const {
  const std::pair<long long, long long> key{std::llround(vx * 1e6),
                                            std::llround(vz * 1e6)};
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const PlanarMotion obj{vx * gap_, vz * gap_, 0.0};
  auto cv = std::make_shared<CostVolume>(
      warp_and_cost(ref_, *prev_, cam_prev_, ego_, obj, dd_));
  cache_.emplace(key, cv);
  return cv;
}

CostVolumeBuilder PairEvaluator::builder() const {
  return [this](const Hypothesis& h) {
    return at_velocity(anchor_.vx + h.dvx, anchor_.vz + h.dvz);
  };
}

std::vector<double> match_evidence(const CostVolume& cv, double kappa) {
  std::vector<double> m(cv.per_cell_cost.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double s = cv.support(i);
    if (s <= 0.0) continue;
    m[i] = s * std::exp(-cv.per_cell_cost[i] / kappa);
  }
  return m;
}

std::vector<double> mono_evidence(const LocalVolume& ref) {
  std::vector<double> m(ref.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (ref.valid[i]) m[i] = ref.weight[i] / ref.weight_scale;
  }
  return m;
}

namespace {

// Shared search core; `rebuild` produces the blob for a velocity hypothesis
// (ignores it in the single-frame case).
ResidualEstimate run_search(
    const std::function<Blob(double dvx, double dvz)>& rebuild,
    const Box3D& anchor, const RefineConfig& cfg, bool sweep_velocity) {
  ResidualEstimate est;
  const std::vector<double> dz_vals = symmetric_grid(cfg.dz);
  const std::vector<double> dx_vals = symmetric_grid(cfg.dx);
  const std::vector<double> dyaw_vals = symmetric_grid(cfg.dyaw);
  const std::vector<double> dv_vals =
      sweep_velocity ? symmetric_grid(cfg.dv) : std::vector<double>{0.0};

  // Depth and longitudinal velocity, jointly.
  std::vector<Sample> zsamples;
  zsamples.reserve(dz_vals.size() * dv_vals.size());
  std::map<long long, Blob> blob_cache;
  auto blob_at = [&](double dvx, double dvz) -> const Blob& {
    const long long key =
        std::llround(dvx * 1e6) * 40000019LL + std::llround(dvz * 1e6);
    auto it = blob_cache.find(key);
    if (it == blob_cache.end())
      it = blob_cache.emplace(key, rebuild(dvx, dvz)).first;
    return it->second;
  };
  for (double dvz : dv_vals) {
    const Blob& blob = blob_at(0.0, dvz);
    for (double dz : dz_vals) {
      Sample s;
      s.score = shell_score(blob, offset_box(anchor, 0, 0, dz, 0), cfg);
      s.a = dz;
      s.b = dvz;
      s.tie = std::abs(dz) / cfg.dz.step + std::abs(dvz) / cfg.dv.step;
      zsamples.push_back(s);
    }
  }
  const Sample zbest = best_sample(zsamples);
  const SoftStats zstats = soft_stats(zsamples, cfg);
  est.residual.dz = zbest.a;
  est.residual.dvz = zbest.b;
  est.sigma.dz = zstats.sigma_a;
  est.sigma.dvz = sweep_velocity ? zstats.sigma_b : cfg.sigma_floor;

  // Lateral offset and lateral velocity, jointly.
  std::vector<Sample> xsamples;
  xsamples.reserve(dx_vals.size() * dv_vals.size());
  for (double dvx : dv_vals) {
    const Blob& blob = blob_at(dvx, zbest.b);
    for (double dx : dx_vals) {
      Sample s;
      s.score =
          shell_score(blob, offset_box(anchor, dx, 0, zbest.a, 0), cfg);
      s.a = dx;
      s.b = dvx;
      s.tie = std::abs(dx) / cfg.dx.step + std::abs(dvx) / cfg.dv.step;
      xsamples.push_back(s);
    }
  }
  const Sample xbest = best_sample(xsamples);
  const SoftStats xstats = soft_stats(xsamples, cfg);
  est.residual.dx = xbest.a;
  est.residual.dvx = xbest.b;
  est.sigma.dx = xstats.sigma_a;
  est.sigma.dvx = sweep_velocity ? xstats.sigma_b : cfg.sigma_floor;

  // Yaw against the best blob.
  const Blob& blob = blob_at(xbest.b, zbest.b);
  std::vector<Sample> ysamples;
  ysamples.reserve(dyaw_vals.size());
  for (double dyaw : dyaw_vals) {
    Sample s;
    s.score = shell_score(
        blob, offset_box(anchor, xbest.a, 0, zbest.a, dyaw), cfg);
    s.a = dyaw;
    s.tie = std::abs(dyaw) / cfg.dyaw.step;
    ysamples.push_back(s);
  }
  const Sample ybest = best_sample(ysamples);
  est.residual.dyaw = ybest.a;
  est.sigma.dyaw = soft_stats(ysamples, cfg).sigma_a;

  // Vertical centroid and size residuals from the blob itself.
  est.sigma.dy = cfg.dy_gate;
  est.sigma.dw = est.sigma.dh = est.sigma.dl = 0.25;
  fit_blob_extents(blob,
                   offset_box(anchor, xbest.a, 0, zbest.a, ybest.a), cfg,
                   est.residual, est.sigma);
  return est;
}

}  // namespace

ResidualEstimate estimate_residual(const CostVolumeBuilder& builder,
                                   const Box3D& anchor,
                                   const RefineConfig& cfg) {
  const std::shared_ptr<const CostVolume> cv0 = builder(Hypothesis{});
  if (ref_support_total(cv0->reference) <= cfg.evidence_floor)
    throw NoEvidence("estimate_residual: reference volume has no support");
  auto rebuild = [&](double dvx, double dvz) {
    const auto cv = builder(Hypothesis{.dvx = dvx, .dvz = dvz});
    return make_blob(cv->reference.cells, match_evidence(*cv, cfg.kappa));
  };
  return run_search(rebuild, anchor, cfg, cfg.estimate_velocity);
}

ResidualEstimate estimate_mono_residual(const LocalVolume& ref,
                                        const Box3D& anchor,
                                        const RefineConfig& cfg) {
  if (ref_support_total(ref) <= cfg.evidence_floor)
    throw NoEvidence("estimate_mono_residual: volume has no support");
  Blob blob = make_blob(ref.cells, mono_evidence(ref));
  auto rebuild = [&](double, double) { return blob; };
  ResidualEstimate est = run_search(rebuild, anchor, cfg, false);
  est.residual.dvx = 0.0;
  est.residual.dvz = 0.0;
  est.sigma.dvx = est.sigma.dvz = cfg.dv.range + cfg.sigma_floor;
  return est;
}

double laplacian_score(const std::vector<double>& errors,
                       const std::vector<double>& sigmas) {
  if (errors.size() != sigmas.size())
    throw ConfigError("laplacian_score: mismatched lengths");
  double acc = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(sigmas[i] > 0.0))
      throw InvalidSigma("laplacian_score: sigma must be positive");
    acc += 1.4142135623730951 / sigmas[i] * std::abs(errors[i]) +
           std::log(sigmas[i]);
  }
  return acc;
}

double laplacian_score(const BoxResidual& error, const BoxResidual& sigma) {
  std::vector<double> e, s;
  for (auto attr : kAttrs) {
    e.push_back(error.*attr);
    s.push_back(sigma.*attr);
  }
  return laplacian_score(e, s);
}

ResidualEstimate fuse_estimates(const std::vector<ResidualEstimate>& estimates,
                                const RefineConfig& cfg) {
  if (estimates.empty()) throw NoEstimates("fuse_estimates: empty input");
  ResidualEstimate fused;
  for (auto attr : kAttrs) {
    double wsum = 0.0, rsum = 0.0, inv_sigma = 0.0;
    for (const ResidualEstimate& e : estimates) {
      const double sigma = e.sigma.*attr;
      const double w =
          cfg.fusion_weighting == FusionWeighting::kInverseUncertainty
              ? std::exp(-sigma)
              : std::exp(sigma);
      wsum += w;
      rsum += w * (e.residual.*attr);
      inv_sigma += 1.0 / sigma;
    }
    fused.residual.*attr = rsum / wsum;
    // Harmonic combination: equals the input sigma for a single estimate
    // and tightens as independent estimates accumulate.
    fused.sigma.*attr = std::max(cfg.sigma_floor, 1.0 / inv_sigma);
  }
  return fused;
}

RefineResult recurrent_refine(const Box3D& proposal, const FeatureMap& current,
                              const CameraIntrinsics& cam,
                              const std::vector<RefinePastFrame>& past,
                              const RefineConfig& cfg,
                              const VolumeConfig& vcfg,
                              const DepthDistribution& dd) {
  if (past.empty())
    throw InsufficientFrames("recurrent_refine: needs at least two frames");
  for (const RefinePastFrame& pf : past) {
    if (pf.map == nullptr || !(pf.gap > 0.0))
      throw ConfigError("recurrent_refine: invalid past frame");
  }
  if (cfg.iterations < 1)
    throw ConfigError("recurrent_refine: iterations must be >= 1");

  Box3D box = proposal;
  RefineResult result;

  auto cost_at = [&](const Box3D& b) -> double {
    double acc = 0.0;
    int n = 0;
    for (const RefinePastFrame& pf : past) {
      try {
        PairEvaluator ev(current, cam, *pf.map, pf.cam, pf.ego_to_current,
                         pf.gap, b, vcfg, dd);
        const auto cv = ev.at_velocity(b.vx, b.vz);
        if (const auto c = box_mean_cost(*cv, b)) {
          acc += *c;
          ++n;
        }
      } catch (const DegenerateAnchor&) {
      }
    }
    return n > 0 ? acc / n : 0.0;
  };
  result.initial_cost = cost_at(box);

  double scale = 1.0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    const RefineConfig itcfg = cfg.scaled(scale);
    scale *= cfg.range_decay;

    std::vector<ResidualEstimate> estimates;
    std::vector<std::unique_ptr<PairEvaluator>> evaluators;
    try {
      for (const RefinePastFrame& pf : past) {
        evaluators.push_back(std::make_unique<PairEvaluator>(
            current, cam, *pf.map, pf.cam, pf.ego_to_current, pf.gap, box,
            vcfg, dd));
      }
    } catch (const DegenerateAnchor&) {
      evaluators.clear();
    }
    for (const auto& ev : evaluators) {
      try {
        estimates.push_back(estimate_residual(ev->builder(), box, itcfg));
      } catch (const NoEvidence&) {
      }
    }
    if (!evaluators.empty()) {
      try {
        estimates.push_back(
            estimate_mono_residual(evaluators.front()->reference(), box, itcfg));
      } catch (const NoEvidence&) {
      }
    }

    IterationTrace tr;
    tr.iter = it;
    tr.fused_count = static_cast<int>(estimates.size());
    if (!estimates.empty()) {
      const ResidualEstimate fused = fuse_estimates(estimates, itcfg);
      box = apply_residual(box, fused.residual);
      box.z = std::max(box.z, vcfg.near_plane + 0.05);
      tr.fused_sigma = fused.sigma;
    } else {
      // Maximal uncertainty; the proposal passes through unchanged.
      tr.fused_sigma.dx = itcfg.dx.range;
      tr.fused_sigma.dy = itcfg.dy_gate;
      tr.fused_sigma.dz = itcfg.dz.range;
      tr.fused_sigma.dw = tr.fused_sigma.dh = tr.fused_sigma.dl =
          itcfg.size_gate;
      tr.fused_sigma.dyaw = itcfg.dyaw.range;
      tr.fused_sigma.dvx = tr.fused_sigma.dvz = itcfg.dv.range;
    }
    tr.state = box;
    tr.cost = cost_at(box);
    result.trace.push_back(tr);
  }
  result.refined = box;
  return result;
}

std::vector<std::vector<double>> pair_cost_landscape(
    const std::vector<const PairEvaluator*>& pairs, const Box3D& anchor,
    const std::vector<double>& dz_values,
    const std::vector<double>& dvz_values) {
  if (pairs.empty()) throw ConfigError("pair_cost_landscape: no pairs");
  std::vector<std::vector<double>> grid(
      dz_values.size(),
      std::vector<double>(dvz_values.size(),
                          std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t j = 0; j < dvz_values.size(); ++j) {
    std::vector<std::shared_ptr<const CostVolume>> cvs;
    cvs.reserve(pairs.size());
    for (const PairEvaluator* ev : pairs)
      cvs.push_back(ev->at_velocity(anchor.vx, anchor.vz + dvz_values[j]));
    for (std::size_t i = 0; i < dz_values.size(); ++i) {
      Box3D b = anchor;
      b.z += dz_values[i];
      double acc = 0.0;
      int n = 0;
      for (const auto& cv : cvs) {
        if (const auto c = box_mean_cost(*cv, b)) {
          acc += *c;
          ++n;
        }
      }
      if (n > 0) grid[i][j] = acc / n;
    }
  }
  return grid;
}

double landscape_softmin_sigma_dz(
    const std::vector<std::vector<double>>& landscape,
    const std::vector<double>& dz_values, double temperature) {
  double cmin = std::numeric_limits<double>::infinity();
  for (const auto& row : landscape)
    for (double c : row)
      if (std::isfinite(c)) cmin = std::min(cmin, c);
  if (!std::isfinite(cmin))
    throw NoEvidence("landscape_softmin_sigma_dz: empty landscape");
  std::vector<double> gaps;
  for (const auto& row : landscape)
    for (double c : row)
      if (std::isfinite(c)) gaps.push_back(c - cmin);
  double tau = temperature > 0.0 ? temperature : median_of(gaps);
  tau = std::max(tau, 1e-9);
  double wsum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    for (double c : landscape[i]) {
      if (!std::isfinite(c)) continue;
      const double w = std::exp(-(c - cmin) / tau);
      wsum += w;
      mean += w * dz_values[i];
    }
  }
  mean /= wsum;
  double var = 0.0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    for (double c : landscape[i]) {
      if (!std::isfinite(c)) continue;
      const double w = std::exp(-(c - cmin) / tau);
      var += w * (dz_values[i] - mean) * (dz_values[i] - mean);
    }
  }
  return std::sqrt(var / wsum);
}

}  // namespace dyno
