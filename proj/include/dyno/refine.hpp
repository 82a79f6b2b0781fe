#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "dyno/volume.hpp"

namespace dyno {

/// Additive residual over the full attribute set.
struct BoxResidual {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double dw = 0.0, dh = 0.0, dl = 0.0;
  double dyaw = 0.0;
  double dvx = 0.0, dvz = 0.0;
};

/// Applies a residual with the usual sanity clamps (dims stay positive).
Box3D apply_residual(const Box3D& box, const BoxResidual& r);

/// Residual plus a per-attribute standard deviation (same units). The sigma
/// struct reuses the residual field names; every component is positive.
struct ResidualEstimate {
  BoxResidual residual;
  BoxResidual sigma;
};

enum class FusionWeighting {
  kInverseUncertainty,  // w = exp(-sigma); confident estimates dominate
  kLiteralPaper,        // w = exp(+sigma)
};

struct SearchRange {
  double range = 1.0;  // symmetric, so hypotheses span [-range, range]
  double step = 0.1;
};

struct RefineConfig {
  int iterations = 3;
  SearchRange dz{4.0, 0.4};
  SearchRange dx{2.0, 0.2};
  SearchRange dv{10.0, 0.5};
  SearchRange dyaw{0.3, 0.05};
  double range_decay = 0.5;  // coarse-to-fine shrink per iteration
  FusionWeighting fusion_weighting = FusionWeighting::kInverseUncertainty;
  /// Soft-min temperature; 0 selects the self-normalizing default (median
  /// score spread of the hypothesis set).
  double temperature = 0.0;
  double kappa = 0.08;             // per-cell cost -> match evidence bandwidth
  double shell_scale = 0.6;        // evidence kernel width about the box shell
  double hidden_face_weight = 0.15;
  double size_gate = 0.5;          // clamp on per-axis size residuals
  double dy_gate = 1.0;
  double sigma_floor = 1e-3;
  double evidence_floor = 1e-6;
  double tau_floor = 1e-9;
  bool estimate_velocity = true;   // false freezes the proposal velocity

  RefineConfig scaled(double factor) const;
};

/// Velocity offsets are relative to the anchor velocity; pose offsets are
/// evaluated against the cost volume without rebuilding it.
struct Hypothesis {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double dyaw = 0.0;
  double dvx = 0.0, dvz = 0.0;
};

using CostVolumeBuilder =
    std::function<std::shared_ptr<const CostVolume>(const Hypothesis&)>;

/// Everything needed to match one (current, past) frame pair for one object:
/// builds and caches cost volumes per velocity hypothesis on the grid
/// anchored at the proposal.
class PairEvaluator {
 public:
  PairEvaluator(const FeatureMap& cur, const CameraIntrinsics& cam_cur,
                const FeatureMap& prev, const CameraIntrinsics& cam_prev,
                PlanarMotion ego, double gap, const Box3D& anchor,
                const VolumeConfig& vcfg, const DepthDistribution& dd);

  const LocalVolume& reference() const { return ref_; }
  const Box3D& anchor() const { return anchor_; }
  double gap() const { return gap_; }

  /// Cost volume under an absolute camera-frame velocity hypothesis
  /// (object translation = velocity * gap, yaw rate 0).
  std::shared_ptr<const CostVolume> at_velocity(double vx, double vz) const;

  /// Spec-shaped builder closure over this evaluator.
  CostVolumeBuilder builder() const;

 private:
  const FeatureMap* prev_;
  CameraIntrinsics cam_prev_;
  PlanarMotion ego_;
  double gap_;
  Box3D anchor_;
  DepthDistribution dd_;
  LocalVolume ref_;
  mutable std::map<std::pair<long long, long long>,
                   std::shared_ptr<const CostVolume>>
      cache_;
};

/// Per-cell match evidence: depth support times temporal consistency,
/// exp(-cost / kappa). For a reference-only (single frame) volume the
/// consistency term is absent.
std::vector<double> match_evidence(const CostVolume& cv, double kappa);
std::vector<double> mono_evidence(const LocalVolume& ref);

/// Deterministic residual search over the cost volumes produced by
/// `builder`: joint depth+velocity sweep, then lateral+velocity, then yaw,
/// with vertical offset and sizes read from the evidence blob. Throws
/// NoEvidence when the reference volume carries no supported cell.
ResidualEstimate estimate_residual(const CostVolumeBuilder& builder,
                                   const Box3D& anchor,
                                   const RefineConfig& cfg);

/// Single-frame variant: fits the box to the depth-support blob alone.
/// Velocity is left untouched with maximal uncertainty.
ResidualEstimate estimate_mono_residual(const LocalVolume& ref,
                                        const Box3D& anchor,
                                        const RefineConfig& cfg);

/// Negative log-likelihood of attribute errors under per-attribute
/// Laplacians: sum of sqrt(2)/sigma * |err| + log(sigma).
double laplacian_score(const std::vector<double>& errors,
                       const std::vector<double>& sigmas);
double laplacian_score(const BoxResidual& error, const BoxResidual& sigma);

/// Per-attribute convex combination of residuals with uncertainty-derived
/// weights; the fused sigma is the harmonic combination of the input sigmas
/// (equal to the input for a single estimate, shrinking as estimates agree).
ResidualEstimate fuse_estimates(const std::vector<ResidualEstimate>& estimates,
                                const RefineConfig& cfg);

/// One past frame available to the recurrent loop.
struct RefinePastFrame {
  const FeatureMap* map = nullptr;
  CameraIntrinsics cam;
  PlanarMotion ego_to_current;  // camera-frame motion past -> current
  double gap = 0.0;             // seconds, > 0
};

struct IterationTrace {
  int iter = 0;
  Box3D state;              // camera frame, after this iteration's update
  BoxResidual fused_sigma;
  double cost = 0.0;        // mean in-box pair cost at the updated state
  int fused_count = 0;      // estimates that entered the fusion
};

struct RefineResult {
  Box3D refined;
  double initial_cost = 0.0;  // in-box pair cost at the proposal
  std::vector<IterationTrace> trace;
};

/// k iterations of: build a cost volume per past frame (object warp scaled
/// by each frame's time gap), search residuals per pair, add the
/// single-frame estimate, fuse, apply. Velocity is estimated for the
/// reference frame only under the constant-velocity model.
RefineResult recurrent_refine(const Box3D& proposal,
                              const FeatureMap& current,
                              const CameraIntrinsics& cam,
                              const std::vector<RefinePastFrame>& past,
                              const RefineConfig& cfg,
                              const VolumeConfig& vcfg,
                              const DepthDistribution& dd);

/// Mean in-box cost over the given (dz, dvz) grid, averaged across pairs;
/// used to expose the two-frame depth/velocity ambiguity. Cells come from
/// the proposal-anchored grid; entries without any valid cell are NaN.
std::vector<std::vector<double>> pair_cost_landscape(
    const std::vector<const PairEvaluator*>& pairs, const Box3D& anchor,
    const std::vector<double>& dz_values, const std::vector<double>& dvz_values);

/// Soft-min statistics of a landscape along the dz axis: weights
/// exp(-(c - c_min) / tau) with tau the median cost offset (or the override).
double landscape_softmin_sigma_dz(
    const std::vector<std::vector<double>>& landscape,
    const std::vector<double>& dz_values, double temperature = 0.0);

}  // namespace dyno
