#include "dyno/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include "dyno/errors.hpp"
#include "dyno/json_io.hpp"
#include "dyno/rng.hpp"

namespace dyno {

std::string motion_mode_name(MotionMode mode) {
  switch (mode) {
    case MotionMode::kAssumedStatic: return "assumed-static";
    case MotionMode::kGtMotion: return "gt-motion";
    case MotionMode::kEstimatedMotion: return "estimated-motion";
  }
  return "unknown";
}

MotionMode motion_mode_from_name(const std::string& name) {
  if (name == "assumed-static") return MotionMode::kAssumedStatic;
  if (name == "gt-motion") return MotionMode::kGtMotion;
  if (name == "estimated-motion") return MotionMode::kEstimatedMotion;
  throw ConfigError("unknown motion mode: " + name);
}

namespace {

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

int pick_camera(const Scene& scene, int frame, const Box3D& world_box) {
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    const CameraRig& rig = scene.cameras[c];
    const PlanarMotion pose = camera_pose(scene, static_cast<int>(c), frame);
    Point3 p = apply_motion(inverse(pose), world_box.center());
    p.y = world_box.y - rig.mount_y;
    if (!(p.z > 0.5)) continue;
    const double u = rig.k.f * p.x / p.z + rig.k.cu;
    const double v = rig.k.f * p.y / p.z + rig.k.cv;
    if (u >= 0.0 && u <= rig.width - 1.0 && v >= 0.0 && v <= rig.height - 1.0)
      return static_cast<int>(c);
  }
  return -1;
}

}  // namespace

SceneRunResult run_scene(const Scene& scene, const ExperimentConfig& cfg,
                         std::uint64_t proposal_seed) {
  if (cfg.frames_window < 2)
    throw ConfigError("run_scene: frames_window must be >= 2");
  const int F = scene.frame_count();
  const int n_cams = static_cast<int>(scene.cameras.size());

  std::vector<std::vector<Rendering>> rendered(n_cams);
  for (int c = 0; c < n_cams; ++c) {
    rendered[c].reserve(F);
    for (int f = 0; f < F; ++f) rendered[c].push_back(render(scene, c, f));
  }

  SceneRunResult result;
  Tracker tracker(cfg.tracker);
  const double default_dt =
      F > 1 ? scene.frame_times[1] - scene.frame_times[0] : 0.5;

  for (int f = 0; f < F; ++f) {
    result.gt.push_back(ground_truth(scene, f));
    std::vector<Box3D> proposals =
        sample_proposals(scene, f, cfg.noise, proposal_seed);
    for (Box3D& p : proposals) p.frame_id = f;
    result.proposals.push_back(proposals);

    std::vector<Box3D> refined;
    refined.reserve(proposals.size());
    for (std::size_t pi = 0; pi < proposals.size(); ++pi) {
      const Box3D& prop = proposals[pi];
      const int cam_idx = pick_camera(scene, f, prop);
      if (cam_idx < 0 || f == 0) {
        refined.push_back(prop);
        continue;
      }
      const CameraRig& rig = scene.cameras[cam_idx];
      const PlanarMotion pose = camera_pose(scene, cam_idx, f);

      Box3D cam_box = box_to_local(pose, prop);
      cam_box.y = prop.y - rig.mount_y;

      RefineConfig rcfg = cfg.refine;
      switch (cfg.mode) {
        case MotionMode::kAssumedStatic:
          cam_box.vx = 0.0;
          cam_box.vz = 0.0;
          rcfg.estimate_velocity = false;
          break;
        case MotionMode::kGtMotion: {
          cam_box.vx = 0.0;
          cam_box.vz = 0.0;
          if (prop.track_id >= 0) {
            const SceneObject& obj = scene.objects[prop.track_id];
            const Point3 v_cam =
                rotate_only(inverse(pose), {obj.vx, 0.0, obj.vz});
            cam_box.vx = v_cam.x;
            cam_box.vz = v_cam.z;
          }
          rcfg.estimate_velocity = false;
          break;
        }
        case MotionMode::kEstimatedMotion:
          rcfg.estimate_velocity = true;
          break;
      }

      std::vector<RefinePastFrame> past;
      for (int k = 1; k < cfg.frames_window && f - k >= 0; ++k) {
        RefinePastFrame pf;
        pf.map = &rendered[cam_idx][f - k].map;
        pf.cam = rig.k;
        pf.ego_to_current = relative_ego_motion(scene, cam_idx, f - k, f);
        pf.gap = scene.frame_times[f] - scene.frame_times[f - k];
        past.push_back(pf);
      }
      Box3D out = prop;
      if (!past.empty()) {
        const RefineResult rr =
            recurrent_refine(cam_box, rendered[cam_idx][f].map, rig.k, past,
                             rcfg, cfg.volume, cfg.lifting);
        out = box_to_parent(pose, rr.refined);
        out.y = rr.refined.y + rig.mount_y;
        out.score = prop.score;
        out.class_id = prop.class_id;
        out.frame_id = f;
        out.track_id = prop.track_id;

        const std::vector<Box3D>& gt_frame = result.gt.back();
        for (const IterationTrace& it : rr.trace) {
          TraceRecord rec;
          rec.frame = f;
          rec.proposal_index = static_cast<int>(pi);
          rec.object_id = prop.track_id;
          rec.iter = it.iter;
          rec.state = box_to_parent(pose, it.state);
          rec.state.y = it.state.y + rig.mount_y;
          rec.fused_sigma = it.fused_sigma;
          rec.cost = it.cost;
          if (prop.track_id >= 0 &&
              prop.track_id < static_cast<int>(gt_frame.size())) {
            const Box3D& gt = gt_frame[prop.track_id];
            rec.center_error = ground_distance(rec.state, gt);
            rec.velocity_error = std::hypot(rec.state.vx - gt.vx,
                                            rec.state.vz - gt.vz);
          }
          result.trace.push_back(rec);
        }
      }
      refined.push_back(out);
    }
    result.refined.push_back(refined);

    const PlanarMotion rig_pose = scene.ego_poses[f];
    std::vector<Box3D> rig_dets;
    rig_dets.reserve(refined.size());
    for (const Box3D& b : refined) rig_dets.push_back(box_to_local(rig_pose, b));
    const PlanarMotion ego_step =
        f > 0 ? compose(inverse(rig_pose), scene.ego_poses[f - 1])
              : PlanarMotion::identity();
    const double dt =
        f > 0 ? scene.frame_times[f] - scene.frame_times[f - 1] : default_dt;
    const std::vector<Box3D> tracked = tracker.step(rig_dets, ego_step, dt, f);
    std::vector<Box3D> world_tracks;
    world_tracks.reserve(tracked.size());
    for (const Box3D& b : tracked) world_tracks.push_back(box_to_parent(rig_pose, b));
    result.tracks.push_back(world_tracks);
  }
  return result;
}

SceneConfig benchmark_scene_config() {
  SceneConfig cfg;  // defaults are the benchmark
  return cfg;
}

std::vector<std::uint64_t> benchmark_seeds(int count) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(count);
  for (int i = 1; i <= count; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  return seeds;
}

std::vector<SceneRunResult> run_benchmark(const ExperimentConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds,
                                          int jobs) {
  std::vector<SceneRunResult> results(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), jobs, [&](int i) {
    const Scene scene = generate_scene(cfg.scene, seeds[i]);
    results[i] = run_scene(scene, cfg, seeds[i]);
  });
  return results;
}

std::vector<std::vector<Box3D>> concat_frames(
    const std::vector<const std::vector<std::vector<Box3D>>*>& per_scene) {
  std::vector<std::vector<Box3D>> out;
  int offset = 0;
  for (const auto* scene_frames : per_scene) {
    for (const auto& frame : *scene_frames) {
      out.push_back(frame);
      for (Box3D& b : out.back()) b.frame_id += offset;
    }
    offset += 1000;
  }
  return out;
}

namespace {

std::vector<double> median_per_iter(const std::vector<SceneRunResult>& results,
                                    int iterations, bool velocity) {
  std::vector<std::vector<double>> per_iter(iterations);
  for (const SceneRunResult& r : results) {
    for (const TraceRecord& t : r.trace) {
      if (t.object_id < 0 || t.iter < 1 || t.iter > iterations) continue;
      const double v = velocity ? t.velocity_error : t.center_error;
      if (v >= 0.0) per_iter[t.iter - 1].push_back(v);
    }
  }
  std::vector<double> medians(iterations, 0.0);
  for (int i = 0; i < iterations; ++i) {
    auto& vals = per_iter[i];
    if (vals.empty()) continue;
    const std::size_t mid = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    medians[i] = vals[mid];
  }
  return medians;
}

}  // namespace

BenchmarkReport run_mode_ablation(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  int jobs) {
  BenchmarkReport report;
  const MotionMode modes[3] = {MotionMode::kAssumedStatic,
                               MotionMode::kGtMotion,
                               MotionMode::kEstimatedMotion};
  std::vector<SceneRunResult> estimated_results;
  std::vector<SceneRunResult> static_results;
  for (MotionMode mode : modes) {
    ExperimentConfig cfg = base;
    cfg.mode = mode;
    std::vector<SceneRunResult> results = run_benchmark(cfg, seeds, jobs);

    std::vector<const std::vector<std::vector<Box3D>>*> refined, gt, tracks;
    for (const SceneRunResult& r : results) {
      refined.push_back(&r.refined);
      gt.push_back(&r.gt);
      tracks.push_back(&r.tracks);
    }
    ModeSummary summary;
    summary.mode = mode;
    summary.detection =
        detection_report(concat_frames(refined), concat_frames(gt));
    summary.tracking =
        tracking_report(concat_frames(tracks), concat_frames(gt));
    report.modes.push_back(std::move(summary));

    if (mode == MotionMode::kEstimatedMotion) {
      estimated_results = std::move(results);
    } else if (mode == MotionMode::kAssumedStatic) {
      static_results = std::move(results);
    }
  }

  {
    std::vector<const std::vector<std::vector<Box3D>>*> props, gt;
    for (const SceneRunResult& r : estimated_results) {
      props.push_back(&r.proposals);
      gt.push_back(&r.gt);
    }
    report.proposal_baseline =
        detection_report(concat_frames(props), concat_frames(gt));
  }
  report.median_center_error_per_iter =
      median_per_iter(estimated_results, base.refine.iterations, false);
  report.median_velocity_error_per_iter =
      median_per_iter(estimated_results, base.refine.iterations, true);
  report.static_median_center_error_per_iter =
      median_per_iter(static_results, base.refine.iterations, false);
  return report;
}

Scene make_crossing_scene() {
  SceneConfig cfg;
  cfg.n_frames = 4;
  cfg.dt = 0.5;
  cfg.n_objects = 2;
  cfg.ego_speed = 0.0;
  cfg.ego_lateral = 0.0;
  Scene scene;
  scene.seed = 7;
  scene.config = cfg;
  CameraRig rig;
  rig.k = {cfg.focal, 0.5 * cfg.image_width, 0.5 * cfg.image_height};
  rig.width = cfg.image_width;
  rig.height = cfg.image_height;
  scene.cameras.push_back(rig);
  for (int f = 0; f < cfg.n_frames; ++f) {
    scene.frame_times.push_back(f * cfg.dt);
    scene.ego_poses.push_back(PlanarMotion::identity());
  }
  auto add = [&](int id, double x0, double z, double vx) {
    SceneObject obj;
    obj.id = id;
    obj.feature_seed = hash_keys(scene.seed, static_cast<std::uint64_t>(id));
    obj.vx = vx;
    obj.vz = 0.0;
    Box3D b;
    b.x = x0;
    b.z = z;
    b.w = b.h = b.l = 0.5;
    b.y = -0.25;
    b.vx = vx;
    b.track_id = id;
    obj.box0 = b;
    scene.objects.push_back(obj);
  };
  add(0, -3.0, 15.3, 4.0);
  add(1, 3.0, 14.7, -4.0);
  return scene;
}

Scene make_illposed_scene(double vz) {
  SceneConfig cfg;
  cfg.n_frames = 3;
  cfg.dt = 1.0;
  cfg.n_objects = 1;
  cfg.ego_speed = 0.0;
  cfg.ego_lateral = 1.0;
  Scene scene;
  scene.seed = 11;
  scene.config = cfg;
  CameraRig rig;
  rig.k = {cfg.focal, 0.5 * cfg.image_width, 0.5 * cfg.image_height};
  rig.width = cfg.image_width;
  rig.height = cfg.image_height;
  scene.cameras.push_back(rig);
  for (int f = 0; f < cfg.n_frames; ++f) {
    const double t = f * cfg.dt;
    scene.frame_times.push_back(t);
    scene.ego_poses.emplace_back(cfg.ego_lateral * t, 0.0, 0.0);
  }
  SceneObject obj;
  obj.id = 0;
  obj.feature_seed = hash_keys(scene.seed, 0x0b7ecULL);
  obj.vx = 0.0;
  obj.vz = vz;
  Box3D b;
  // On the optical axis of the last frame (the rig ends at x = 2), at the
  // camera's height so the reference pixel stays fixed along the depth axis.
  b.x = cfg.ego_lateral * (cfg.n_frames - 1) * cfg.dt;
  b.y = -1.4;
  b.z = 16.0 - vz * (cfg.n_frames - 1) * cfg.dt;
  b.w = b.h = b.l = 0.35;
  b.vz = vz;
  b.track_id = 0;
  obj.box0 = b;
  scene.objects.push_back(obj);
  return scene;
}

std::string trace_to_json(const std::vector<TraceRecord>& trace) {
  JsonWriter w;
  w.begin_array();
  for (const TraceRecord& t : trace) {
    w.begin_object();
    w.key("frame").value(t.frame);
    w.key("proposal_index").value(t.proposal_index);
    w.key("object_id").value(t.object_id);
    w.key("iter").value(t.iter);
    w.key("state").begin_object();
    w.key("x").value(t.state.x);
    w.key("y").value(t.state.y);
    w.key("z").value(t.state.z);
    w.key("w").value(t.state.w);
    w.key("h").value(t.state.h);
    w.key("l").value(t.state.l);
    w.key("yaw").value(t.state.yaw);
    w.key("vx").value(t.state.vx);
    w.key("vz").value(t.state.vz);
    w.end_object();
    w.key("fused_sigma").begin_object();
    w.key("dx").value(t.fused_sigma.dx);
    w.key("dy").value(t.fused_sigma.dy);
    w.key("dz").value(t.fused_sigma.dz);
    w.key("dw").value(t.fused_sigma.dw);
    w.key("dh").value(t.fused_sigma.dh);
    w.key("dl").value(t.fused_sigma.dl);
    w.key("dyaw").value(t.fused_sigma.dyaw);
    w.key("dvx").value(t.fused_sigma.dvx);
    w.key("dvz").value(t.fused_sigma.dvz);
    w.end_object();
    w.key("cost").value(t.cost);
    w.key("center_error").value(t.center_error);
    w.key("velocity_error").value(t.velocity_error);
    w.end_object();
  }
  w.end_array();
  return w.str() + "\n";
}

}  // namespace dyno
