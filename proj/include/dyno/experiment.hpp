#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyno/metrics.hpp"
#include "dyno/refine.hpp"
#include "dyno/scene.hpp"
#include "dyno/tracker.hpp"

namespace dyno {

/// How object motion enters the temporal warping during refinement.
enum class MotionMode {
  kAssumedStatic,    // velocity pinned to zero
  kGtMotion,         // velocity pinned to the ground-truth value
  kEstimatedMotion,  // velocity searched jointly with location
};

std::string motion_mode_name(MotionMode mode);
MotionMode motion_mode_from_name(const std::string& name);

struct ExperimentConfig {
  SceneConfig scene;
  ProposalNoise noise;
  RefineConfig refine;
  VolumeConfig volume;
  DepthDistribution lifting = DepthDistribution::laplacian(1.5);
  TrackerConfig tracker;
  MotionMode mode = MotionMode::kEstimatedMotion;
  int frames_window = 2;  // n; refinement pairs the current frame with n-1 past
  std::vector<std::uint64_t> seeds{1};
  int jobs = 0;  // 0 = hardware concurrency
};

/// One per-iteration refinement record for a proposal, world frame.
struct TraceRecord {
  int frame = 0;
  int proposal_index = 0;
  int object_id = -1;  // source ground-truth object, -1 for false positives
  int iter = 0;
  Box3D state;  // world frame
  BoxResidual fused_sigma;
  double cost = 0.0;
  double center_error = -1.0;    // vs ground truth, -1 when unavailable
  double velocity_error = -1.0;
};

struct SceneRunResult {
  std::vector<std::vector<Box3D>> proposals;  // world frame; zero-velocity
  std::vector<std::vector<Box3D>> refined;    // world frame
  std::vector<std::vector<Box3D>> tracks;     // world frame, track ids set
  std::vector<std::vector<Box3D>> gt;         // world frame, track ids set
  std::vector<TraceRecord> trace;
};

/// Runs detection refinement plus tracking over every frame of one scene.
/// Frames without any past frame pass the proposals through unchanged.
SceneRunResult run_scene(const Scene& scene, const ExperimentConfig& cfg,
                         std::uint64_t proposal_seed);

/// The fixed synthetic benchmark: the scene configuration plus the seed set
/// used by the ablation and analysis commands (seed k generates scene k).
SceneConfig benchmark_scene_config();
std::vector<std::uint64_t> benchmark_seeds(int count = 150);

/// run_scene over many seeds, scenes evaluated independently in parallel.
std::vector<SceneRunResult> run_benchmark(const ExperimentConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds,
                                          int jobs);

/// Concatenates per-scene frame lists, offsetting frame ids so frames from
/// different scenes never mix.
std::vector<std::vector<Box3D>> concat_frames(
    const std::vector<const std::vector<std::vector<Box3D>>*>& per_scene);

struct ModeSummary {
  MotionMode mode = MotionMode::kEstimatedMotion;
  DetectionEvalReport detection;
  TrackingEvalReport tracking;
};

struct BenchmarkReport {
  std::vector<ModeSummary> modes;
  DetectionEvalReport proposal_baseline;  // raw proposals, zero velocity
  /// Median center / velocity error over all traced objects per iteration,
  /// for the estimated-motion run.
  std::vector<double> median_center_error_per_iter;
  std::vector<double> median_velocity_error_per_iter;
  std::vector<double> static_median_center_error_per_iter;
};

/// Full ablation: the three motion modes over the same scenes and proposals.
BenchmarkReport run_mode_ablation(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  int jobs);

/// Constructed two-object crossing stream exercising the velocity-warped
/// association; ground-truth detections carry the true velocities.
Scene make_crossing_scene();

/// Constructed on-axis point-like object for the two-frame depth/velocity
/// ambiguity study. The object recedes at `vz` with a laterally moving rig.
Scene make_illposed_scene(double vz = 1.5);

std::string trace_to_json(const std::vector<TraceRecord>& trace);

}  // namespace dyno
