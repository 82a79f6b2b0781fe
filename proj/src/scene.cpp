#include "dyno/scene.hpp"

#include <algorithm>
#include <cmath>

#include "dyno/errors.hpp"
#include "dyno/rng.hpp"

namespace dyno {

namespace {

constexpr double kRayNear = 0.05;

void validate(const SceneConfig& c) {
  if (c.n_frames < 2) throw ConfigError("scene config: n_frames must be >= 2");
  if (c.n_cameras < 1 || c.n_cameras > 3)
    throw ConfigError("scene config: n_cameras must be in [1, 3]");
  if (c.n_objects < 0) throw ConfigError("scene config: n_objects negative");
  if (!(c.dt > 0.0)) throw ConfigError("scene config: dt must be positive");
  if (c.moving_ratio < 0.0 || c.moving_ratio > 1.0)
    throw ConfigError("scene config: moving_ratio outside [0, 1]");
  if (c.speed_min < 0.0 || c.speed_max < c.speed_min)
    throw ConfigError("scene config: invalid speed range");
  if (c.spawn_x_max <= c.spawn_x_min || c.spawn_z_max <= c.spawn_z_min ||
      !(c.spawn_z_min > 0.0))
    throw ConfigError("scene config: invalid spawn volume");
  if (c.size_w_max < c.size_w_min || c.size_l_max < c.size_l_min ||
      c.size_h_max < c.size_h_min || !(c.size_w_min > 0.0) ||
      !(c.size_l_min > 0.0) || !(c.size_h_min > 0.0))
    throw ConfigError("scene config: invalid size ranges");
  if (c.image_width < 8 || c.image_height < 8 || !(c.focal > 0.0))
    throw ConfigError("scene config: invalid camera parameters");
  if (c.channels < 1) throw ConfigError("scene config: channels must be >= 1");
  if (c.visibility_threshold < 0.0 || c.visibility_threshold > 1.0)
    throw ConfigError("scene config: visibility_threshold outside [0, 1]");
}

double value_noise(std::uint64_t seed, int channel, const Point3& p,
                   double pitch) {
  const double gx = p.x / pitch, gy = p.y / pitch, gz = p.z / pitch;
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  const auto iz = static_cast<std::int64_t>(std::floor(gz));
  const double fx = gx - static_cast<double>(ix);
  const double fy = gy - static_cast<double>(iy);
  const double fz = gz - static_cast<double>(iz);
  auto corner = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    return hash_unit(seed, static_cast<std::uint64_t>(channel),
                     static_cast<std::uint64_t>(cx),
                     static_cast<std::uint64_t>(cy),
                     static_cast<std::uint64_t>(cz));
  };
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(corner(ix, iy, iz), corner(ix + 1, iy, iz), fx);
  const double c10 = lerp(corner(ix, iy + 1, iz), corner(ix + 1, iy + 1, iz), fx);
  const double c01 = lerp(corner(ix, iy, iz + 1), corner(ix + 1, iy, iz + 1), fx);
  const double c11 =
      lerp(corner(ix, iy + 1, iz + 1), corner(ix + 1, iy + 1, iz + 1), fx);
  return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
}

double background_feature(int channel, int channels) {
  return 0.05 + 0.1 * static_cast<double>(channel) / std::max(1, channels);
}

// Ray/box intersection in the box frame; ray parameter equals camera depth.
bool intersect_box(const Box3D& box, const Point3& origin, const Point3& dir,
                   double& t_hit, Point3& local_hit) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double ox = origin.x - box.x, oz = origin.z - box.z;
  const Point3 o{c * ox - s * oz, origin.y - box.y, s * ox + c * oz};
  const Point3 d{c * dir.x - s * dir.z, dir.y, s * dir.x + c * dir.z};
  const double half[3] = {0.5 * box.w, 0.5 * box.h, 0.5 * box.l};
  const double oc[3] = {o.x, o.y, o.z};
  const double dc[3] = {d.x, d.y, d.z};
  double t0 = kRayNear, t1 = 1e30;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dc[a]) < 1e-12) {
      if (std::abs(oc[a]) > half[a]) return false;
      continue;
    }
    double ta = (-half[a] - oc[a]) / dc[a];
    double tb = (half[a] - oc[a]) / dc[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_hit = t0;
  local_hit = {o.x + t0 * d.x, o.y + t0 * d.y, o.z + t0 * d.z};
  return true;
}

Box3D object_box_at(const Scene& scene, int object_index, int frame) {
  const SceneObject& obj = scene.objects[object_index];
  const double dt = scene.frame_times[frame] - scene.frame_times[0];
  Box3D b = obj.box0;
  b.x += obj.vx * dt;
  b.z += obj.vz * dt;
  b.vx = obj.vx;
  b.vz = obj.vz;
  b.frame_id = frame;
  b.track_id = obj.id;
  return b;
}

}  // namespace

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  validate(config);
  Scene scene;
  scene.seed = seed;
  scene.config = config;

  const double cu = 0.5 * config.image_width;
  const double cv = 0.5 * config.image_height;
  const double mount_yaws[3] = {0.0, 0.5, -0.5};
  const double mount_xs[3] = {0.0, 0.3, -0.3};
  for (int c = 0; c < config.n_cameras; ++c) {
    CameraRig rig;
    rig.k = {config.focal, cu, cv};
    rig.mount = {mount_xs[c], 0.0, mount_yaws[c]};
    rig.width = config.image_width;
    rig.height = config.image_height;
    scene.cameras.push_back(rig);
  }

  for (int f = 0; f < config.n_frames; ++f) {
    const double t = f * config.dt;
    scene.frame_times.push_back(t);
    scene.ego_poses.emplace_back(config.ego_lateral * t, config.ego_speed * t,
                                 config.ego_yaw_rate * t);
  }

  Rng rng(hash_keys(seed, 0x5ce11eULL));
  for (int i = 0; i < config.n_objects; ++i) {
    SceneObject obj;
    obj.id = i;
    obj.feature_seed = hash_keys(seed, 0xfea7ULL, static_cast<std::uint64_t>(i));
    obj.texture_amplitude = config.texture_amplitude;
    Box3D b;
    b.w = rng.uniform(config.size_w_min, config.size_w_max);
    b.l = rng.uniform(config.size_l_min, config.size_l_max);
    b.h = rng.uniform(config.size_h_min, config.size_h_max);
    b.y = -0.5 * b.h;  // resting on the ground plane
    b.yaw = rng.uniform(-3.141592653589793, 3.141592653589793);
    const double clearance = 0.5 * std::hypot(b.w, b.l) + 0.3;
    bool placed = false;
    for (int attempt = 0; attempt < 128 && !placed; ++attempt) {
      b.x = rng.uniform(config.spawn_x_min, config.spawn_x_max);
      b.z = rng.uniform(config.spawn_z_min, config.spawn_z_max);
      placed = true;
      for (const SceneObject& other : scene.objects) {
        const double need =
            clearance + 0.5 * std::hypot(other.box0.w, other.box0.l);
        if (std::hypot(b.x - other.box0.x, b.z - other.box0.z) < need) {
          placed = false;
          break;
        }
      }
    }
    const bool moving = rng.bernoulli(config.moving_ratio);
    const double speed =
        moving ? rng.uniform(config.speed_min, config.speed_max) : 0.0;
    const double heading = rng.uniform(-3.141592653589793, 3.141592653589793);
    obj.vx = speed * std::sin(heading);
    obj.vz = speed * std::cos(heading);
    b.vx = obj.vx;
    b.vz = obj.vz;
    b.track_id = i;
    obj.box0 = b;
    scene.objects.push_back(obj);
  }
  return scene;
}

PlanarMotion camera_pose(const Scene& scene, int cam, int frame) {
  return compose(scene.ego_poses[frame], scene.cameras[cam].mount);
}

PlanarMotion relative_ego_motion(const Scene& scene, int cam, int frame_from,
                                 int frame_to) {
  return compose(inverse(camera_pose(scene, cam, frame_to)),
                 camera_pose(scene, cam, frame_from));
}

PlanarMotion object_motion_in_camera(const Scene& scene, int cam,
                                     int object_index, int frame_from,
                                     int frame_to) {
  const SceneObject& obj = scene.objects[object_index];
  const double gap = scene.frame_times[frame_to] - scene.frame_times[frame_from];
  const PlanarMotion pose = camera_pose(scene, cam, frame_to);
  const Point3 t_cam = rotate_only(inverse(pose), {obj.vx * gap, 0.0, obj.vz * gap});
  return {t_cam.x, t_cam.z, 0.0};
}

std::vector<Box3D> ground_truth(const Scene& scene, int frame) {
  std::vector<Box3D> out;
  out.reserve(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    out.push_back(object_box_at(scene, static_cast<int>(i), frame));
  return out;
}

double surface_feature(const SceneObject& obj, const Point3& local,
                       int channel) {
  const double coarse = value_noise(obj.feature_seed, channel, local, 0.55);
  const double fine = value_noise(obj.feature_seed ^ 0x9e37ULL, channel, local, 0.18);
  const double field = 0.55 * coarse + 0.45 * fine;
  return 0.5 + obj.texture_amplitude * (field - 0.5);
}

RayHit raycast(const Scene& scene, int cam, int frame, const Pixel& px) {
  const CameraRig& rig = scene.cameras[cam];
  const PlanarMotion pose = camera_pose(scene, cam, frame);
  const Point3 origin{pose.dx, rig.mount_y, pose.dz};
  // Camera-frame direction with unit z, so the ray parameter is camera depth.
  const Point3 dir_cam{(px.u - rig.k.cu) / rig.k.f, (px.v - rig.k.cv) / rig.k.f,
                       1.0};
  const Point3 dir = rotate_only(pose, dir_cam);

  RayHit best;
  double best_t = 1e30;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const Box3D box = object_box_at(scene, static_cast<int>(i), frame);
    double t;
    Point3 local;
    if (intersect_box(box, origin, dir, t, local) && t < best_t) {
      best_t = t;
      best.object_index = static_cast<int>(i);
      best.depth = t;
      best.local = local;
    }
  }
  return best;
}

Rendering render(const Scene& scene, int cam, int frame) {
  const CameraRig& rig = scene.cameras[cam];
  const int W = rig.width, H = rig.height, C = scene.config.channels;
  const int n_obj = static_cast<int>(scene.objects.size());

  Rendering r;
  r.map.width = W;
  r.map.height = H;
  r.map.channels = C;
  r.map.values.assign(static_cast<std::size_t>(W) * H * C, 0.0f);
  r.map.depth_hint.assign(static_cast<std::size_t>(W) * H, 0.0);
  r.map.depth_valid.assign(static_cast<std::size_t>(W) * H, 0);
  r.instance.assign(static_cast<std::size_t>(W) * H, -1);
  r.true_depth.assign(static_cast<std::size_t>(W) * H, 0.0);
  r.hit_count.assign(n_obj, 0);
  r.visible_count.assign(n_obj, 0);

  const PlanarMotion pose = camera_pose(scene, cam, frame);
  const Point3 origin{pose.dx, rig.mount_y, pose.dz};
  std::vector<Box3D> boxes(n_obj);
  for (int i = 0; i < n_obj; ++i) boxes[i] = object_box_at(scene, i, frame);

  const double hint_rel_sigma = scene.config.depth_hint_sigma / scene.config.z_ref;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * W + u;
      const Point3 dir_cam{(u - rig.k.cu) / rig.k.f, (v - rig.k.cv) / rig.k.f,
                           1.0};
      const Point3 dir = rotate_only(pose, dir_cam);
      int best = -1;
      double best_t = 1e30;
      Point3 best_local{};
      for (int i = 0; i < n_obj; ++i) {
        double t;
        Point3 local;
        if (intersect_box(boxes[i], origin, dir, t, local)) {
          ++r.hit_count[i];
          if (t < best_t) {
            best_t = t;
            best = i;
            best_local = local;
          }
        }
      }
      float* out = r.map.values.data() + idx * C;
      if (best < 0) {
        for (int c = 0; c < C; ++c)
          out[c] = static_cast<float>(background_feature(c, C));
        continue;
      }
      ++r.visible_count[best];
      r.instance[idx] = best;
      r.true_depth[idx] = best_t;
      const SceneObject& obj = scene.objects[best];
      for (int c = 0; c < C; ++c)
        out[c] = static_cast<float>(surface_feature(obj, best_local, c));
      Rng px_rng(hash_keys(scene.seed, 0xd3b7ULL,
                           static_cast<std::uint64_t>(cam),
                           static_cast<std::uint64_t>(frame), idx));
      const double factor =
          std::max(0.05, 1.0 + px_rng.normal() * hint_rel_sigma);
      r.map.depth_hint[idx] = best_t * factor;
      r.map.depth_valid[idx] = 1;
    }
  }
  return r;
}

FeatureMap render_feature_map(const Scene& scene, int cam, int frame) {
  return render(scene, cam, frame).map;
}

std::vector<double> visibility(const Rendering& r, int n_objects) {
  std::vector<double> out(n_objects, 0.0);
  for (int i = 0; i < n_objects; ++i) {
    if (r.hit_count[i] > 0)
      out[i] = static_cast<double>(r.visible_count[i]) / r.hit_count[i];
  }
  return out;
}

std::vector<Box3D> sample_proposals(const Scene& scene, int frame,
                                    const ProposalNoise& noise,
                                    std::uint64_t seed) {
  const int n_obj = static_cast<int>(scene.objects.size());
  const int n_cam = static_cast<int>(scene.cameras.size());

  // Best per-object visibility over cameras plus the camera that sees it.
  std::vector<double> best_vis(n_obj, 0.0);
  std::vector<int> best_cam(n_obj, 0);
  for (int c = 0; c < n_cam; ++c) {
    const Rendering r = render(scene, c, frame);
    const std::vector<double> vis = visibility(r, n_obj);
    for (int i = 0; i < n_obj; ++i) {
      if (vis[i] > best_vis[i]) {
        best_vis[i] = vis[i];
        best_cam[i] = c;
      }
    }
  }

  std::vector<Box3D> out;
  const std::vector<Box3D> gt = ground_truth(scene, frame);
  for (int i = 0; i < n_obj; ++i) {
    if (best_vis[i] < scene.config.visibility_threshold) continue;
    Rng rng(hash_keys(seed, 0x9a0bULL, static_cast<std::uint64_t>(frame),
                      static_cast<std::uint64_t>(i)));
    const PlanarMotion pose = camera_pose(scene, best_cam[i], frame);
    Box3D cam_box = box_to_local(pose, gt[i]);
    cam_box.y = gt[i].y - scene.cameras[best_cam[i]].mount_y;

    // Range noise along the ground-plane viewing ray, growing with depth.
    const double range = std::hypot(cam_box.x, cam_box.z);
    if (range > 1e-6) {
      const double gx = cam_box.x / range, gz = cam_box.z / range;
      const double dr =
          rng.normal() * noise.sigma_z * (cam_box.z / scene.config.z_ref);
      const double dl = rng.normal() * noise.sigma_lateral;
      cam_box.x += gx * dr - gz * dl;
      cam_box.z += gz * dr + gx * dl;
    }
    cam_box.y += rng.normal() * noise.sigma_lateral;
    cam_box.w = std::max(0.2, cam_box.w + rng.normal() * noise.sigma_size);
    cam_box.h = std::max(0.2, cam_box.h + rng.normal() * noise.sigma_size);
    cam_box.l = std::max(0.2, cam_box.l + rng.normal() * noise.sigma_size);
    cam_box.yaw = wrap_angle(cam_box.yaw + rng.normal() * noise.sigma_yaw);
    if (noise.velocity_from_gt) {
      cam_box.vx += rng.normal() * noise.sigma_velocity;
      cam_box.vz += rng.normal() * noise.sigma_velocity;
    } else {
      cam_box.vx = 0.0;
      cam_box.vz = 0.0;
    }
    cam_box.score = rng.uniform(noise.score_true_min, noise.score_true_max);

    Box3D world = box_to_parent(pose, cam_box);
    world.y = cam_box.y + scene.cameras[best_cam[i]].mount_y;
    world.class_id = gt[i].class_id;
    world.frame_id = frame;
    world.track_id = i;  // provenance tag, not an identity claim
    out.push_back(world);
  }

  // Spurious detections, Poisson-many per frame.
  Rng fp_rng(hash_keys(seed, 0xfa15eULL, static_cast<std::uint64_t>(frame)));
  const double limit = std::exp(-noise.false_positive_rate);
  int n_fp = 0;
  for (double p = fp_rng.uniform(); p > limit; p *= fp_rng.uniform()) ++n_fp;
  const SceneConfig& cfg = scene.config;
  const PlanarMotion rig_pose = scene.ego_poses[frame];
  for (int j = 0; j < n_fp; ++j) {
    Box3D b;
    b.w = fp_rng.uniform(cfg.size_w_min, cfg.size_w_max);
    b.l = fp_rng.uniform(cfg.size_l_min, cfg.size_l_max);
    b.h = fp_rng.uniform(cfg.size_h_min, cfg.size_h_max);
    Box3D rig_box = b;
    rig_box.x = fp_rng.uniform(cfg.spawn_x_min, cfg.spawn_x_max);
    rig_box.z = fp_rng.uniform(cfg.spawn_z_min, cfg.spawn_z_max);
    rig_box.y = -0.5 * b.h;
    rig_box.yaw = fp_rng.uniform(-3.141592653589793, 3.141592653589793);
    Box3D world = box_to_parent(rig_pose, rig_box);
    world.y = rig_box.y;
    world.score = fp_rng.uniform(noise.score_false_min, noise.score_false_max);
    world.class_id = 0;
    world.frame_id = frame;
    world.track_id = -1;
    out.push_back(world);
  }
  return out;
}

}  // namespace dyno
