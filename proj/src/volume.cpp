#include "dyno/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "dyno/errors.hpp"

namespace dyno {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kBehindEps = 1e-9;

int axis_count(double lo, double hi, double cell) {
  return static_cast<int>(std::floor((hi - lo) / cell)) + 1;
}

// Centered fill: (count - 1) * cell of span placed symmetrically in the range.
double axis_start(double lo, double hi, double cell, int count) {
  return lo + 0.5 * ((hi - lo) - (count - 1) * cell);
}
}  // namespace

GridDims grid_dims(const VolumeConfig& cfg) {
  if (!(cfg.cell > 0.0) || !(cfg.extent_x > 0.0) || !(cfg.extent_z > 0.0) ||
      !(cfg.y_max > cfg.y_min))
    throw ConfigError("volume config: invalid extents or cell size");
  GridDims d;
  d.W = axis_count(-cfg.extent_x, cfg.extent_x, cfg.cell);
  d.H = axis_count(cfg.y_min, cfg.y_max, cfg.cell);
  d.L = axis_count(-cfg.extent_z, cfg.extent_z, cfg.cell);
  return d;
}

double DepthDistribution::weight(double cell_z, double hint,
                                 bool hint_valid) const {
  if (kind == Kind::kUniform) return 1.0;
  if (!hint_valid) return 0.0;
  const double b = scale / kSqrt2;  // Laplace diversity for stddev == scale
  return std::exp(-std::abs(cell_z - hint) / b) / (2.0 * b);
}

double DepthDistribution::max_weight() const {
  if (kind == Kind::kUniform) return 1.0;
  return kSqrt2 / (2.0 * scale);
}

double CostVolume::support(std::size_t i) const {
  if (!joint_valid(i)) return 0.0;
  const double wr = reference.weight[i] / reference.weight_scale;
  const double ww = warped.weight[i] / warped.weight_scale;
  return std::sqrt(wr * ww);
}

std::vector<Point3> volume_grid(const Box3D& anchor, const VolumeConfig& cfg) {
  if (!(anchor.z > cfg.near_plane))
    throw DegenerateAnchor("volume_grid: anchor behind the near plane");
  const GridDims d = grid_dims(cfg);
  const double x0 = anchor.x + axis_start(-cfg.extent_x, cfg.extent_x, cfg.cell, d.W);
  const double y0 = anchor.y + axis_start(cfg.y_min, cfg.y_max, cfg.cell, d.H);
  const double z0 = anchor.z + axis_start(-cfg.extent_z, cfg.extent_z, cfg.cell, d.L);
  std::vector<Point3> cells;
  cells.reserve(d.size());
  for (int iz = 0; iz < d.L; ++iz)
    for (int iy = 0; iy < d.H; ++iy)
      for (int ix = 0; ix < d.W; ++ix)
        cells.push_back({x0 + ix * cfg.cell, y0 + iy * cfg.cell,
                         z0 + iz * cfg.cell});
  return cells;
}

LocalVolume lift_features(const FeatureMap& fm, const CameraIntrinsics& cam,
                          const std::vector<Point3>& cells,
                          const DepthDistribution& dd) {
  LocalVolume vol;
  vol.C = fm.channels;
  vol.cells = cells;
  vol.feat.assign(cells.size() * fm.channels, 0.0f);
  vol.grid.assign(cells.size() * fm.channels, 0.0f);
  vol.weight.assign(cells.size(), 0.0);
  vol.weight_scale = dd.max_weight();
  vol.valid.assign(cells.size(), 0);

  const int W = fm.width, H = fm.height, C = fm.channels;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Point3& p = cells[i];
    if (!(p.z > kBehindEps)) continue;
    const double u = cam.f * p.x / p.z + cam.cu;
    const double v = cam.f * p.y / p.z + cam.cv;
    if (!(u >= 0.0) || !(u <= W - 1.0) || !(v >= 0.0) || !(v <= H - 1.0))
      continue;
    vol.valid[i] = 1;
    const int iu = std::min(static_cast<int>(u), W - 2 >= 0 ? W - 2 : 0);
    const int iv = std::min(static_cast<int>(v), H - 2 >= 0 ? H - 2 : 0);
    const double fu = u - iu, fv = v - iv;
    const float* p00 = fm.at(iu, iv);
    const float* p10 = fm.at(std::min(iu + 1, W - 1), iv);
    const float* p01 = fm.at(iu, std::min(iv + 1, H - 1));
    const float* p11 = fm.at(std::min(iu + 1, W - 1), std::min(iv + 1, H - 1));
    const double w00 = (1 - fu) * (1 - fv), w10 = fu * (1 - fv);
    const double w01 = (1 - fu) * fv, w11 = fu * fv;

    const std::size_t pix = static_cast<std::size_t>(std::lround(v)) * W +
                            static_cast<std::size_t>(std::lround(u));
    const bool hint_valid = fm.depth_valid.empty() ? false : fm.depth_valid[pix] != 0;
    const double hint = fm.depth_hint.empty() ? 0.0 : fm.depth_hint[pix];
    const double w = dd.weight(p.z, hint, hint_valid);
    vol.weight[i] = w;

    float* feat = vol.feat.data() + i * C;
    float* grid = vol.grid.data() + i * C;
    for (int c = 0; c < C; ++c) {
      const double s = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
      feat[c] = static_cast<float>(s);
      grid[c] = static_cast<float>(w * s);
    }
  }
  return vol;
}

LocalVolume build_local_volume(const FeatureMap& fm,
                               const CameraIntrinsics& cam, const Box3D& anchor,
                               const VolumeConfig& cfg,
                               const DepthDistribution& dd) {
  LocalVolume vol = lift_features(fm, cam, volume_grid(anchor, cfg), dd);
  const GridDims d = grid_dims(cfg);
  vol.anchor = anchor;
  vol.W = d.W;
  vol.H = d.H;
  vol.L = d.L;
  return vol;
}

CostVolume warp_and_cost(const LocalVolume& ref, const FeatureMap& prev_fm,
                         const CameraIntrinsics& prev_cam,
                         const PlanarMotion& ego, const PlanarMotion& obj,
                         const DepthDistribution& dd) {
  const PlanarMotion inv_ego = inverse(ego);
  const PlanarMotion inv_obj = inverse(obj);
  const Point3 c = ref.anchor.center();

  std::vector<Point3> past(ref.cells.size());
  for (std::size_t i = 0; i < ref.cells.size(); ++i) {
    const Point3& p = ref.cells[i];
    // Object motion acts about the anchor center (rigid-body warp), ego
    // motion about the camera origin.
    Point3 q{p.x - c.x, p.y, p.z - c.z};
    q = apply_motion(inv_obj, q);
    q.x += c.x;
    q.z += c.z;
    past[i] = apply_motion(inv_ego, q);
  }

  CostVolume cv;
  cv.reference = ref;
  cv.warped = lift_features(prev_fm, prev_cam, past, dd);
  cv.warped.anchor = ref.anchor;
  cv.warped.W = ref.W;
  cv.warped.H = ref.H;
  cv.warped.L = ref.L;
  cv.per_cell_cost.assign(ref.cells.size(), 0.0);
  const int C = ref.C;
  for (std::size_t i = 0; i < ref.cells.size(); ++i) {
    if (!cv.reference.valid[i] || !cv.warped.valid[i]) continue;
    const float* a = cv.reference.feat.data() + i * C;
    const float* b = cv.warped.feat.data() + i * C;
    double acc = 0.0;
    for (int ch = 0; ch < C; ++ch) acc += std::abs(double(a[ch]) - double(b[ch]));
    cv.per_cell_cost[i] = acc / C;
  }
  return cv;
}

BevGrid reduce_to_bev(const CostVolume& cv) {
  const int W = cv.reference.W, H = cv.reference.H, L = cv.reference.L;
  if (W <= 0 || H <= 0 || L <= 0)
    throw ConfigError("reduce_to_bev: cost volume has no grid dims");
  BevGrid bev;
  bev.W = W;
  bev.L = L;
  bev.value.assign(static_cast<std::size_t>(W) * L, 0.0);
  bev.valid.assign(static_cast<std::size_t>(W) * L, 0);
  for (int iz = 0; iz < L; ++iz) {
    for (int ix = 0; ix < W; ++ix) {
      double acc = 0.0;
      int n = 0;
      for (int iy = 0; iy < H; ++iy) {
        const std::size_t i =
            (static_cast<std::size_t>(iz) * H + iy) * W + ix;
        if (!cv.joint_valid(i)) continue;
        acc += cv.per_cell_cost[i];
        ++n;
      }
      const std::size_t col = static_cast<std::size_t>(iz) * W + ix;
      if (n > 0) {
        bev.value[col] = acc / n;
        bev.valid[col] = 1;
      }
    }
  }
  return bev;
}

std::optional<double> box_mean_cost(const CostVolume& cv, const Box3D& box) {
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < cv.reference.cells.size(); ++i) {
    if (!cv.joint_valid(i)) continue;
    if (!contains(box, cv.reference.cells[i])) continue;
    acc += cv.per_cell_cost[i];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return acc / n;
}

namespace {
template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void dump_volume(const std::string& path, const LocalVolume& vol) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("dump_volume: cannot open " + path);
  os.write("DVOL", 4);
  put<std::uint32_t>(os, 1);  // format version
  put<std::uint32_t>(os, static_cast<std::uint32_t>(vol.W));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(vol.H));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(vol.L));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(vol.C));
  const double anchor[9] = {vol.anchor.x, vol.anchor.y, vol.anchor.z,
                            vol.anchor.w, vol.anchor.h, vol.anchor.l,
                            vol.anchor.yaw, vol.anchor.vx, vol.anchor.vz};
  os.write(reinterpret_cast<const char*>(anchor), sizeof(anchor));
  put<double>(os, vol.weight_scale);
  put<std::uint64_t>(os, vol.cells.size());
  for (const Point3& p : vol.cells) {
    put<double>(os, p.x);
    put<double>(os, p.y);
    put<double>(os, p.z);
  }
  os.write(reinterpret_cast<const char*>(vol.feat.data()),
           static_cast<std::streamsize>(vol.feat.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(vol.grid.data()),
           static_cast<std::streamsize>(vol.grid.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(vol.weight.data()),
           static_cast<std::streamsize>(vol.weight.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(vol.valid.data()),
           static_cast<std::streamsize>(vol.valid.size()));
  if (!os) throw IoError("dump_volume: write failed for " + path);
}

LocalVolume load_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_volume: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "DVOL", 4) != 0)
    throw IoError("load_volume: bad magic in " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != 1) throw IoError("load_volume: unsupported version");
  LocalVolume vol;
  vol.W = static_cast<int>(get<std::uint32_t>(is));
  vol.H = static_cast<int>(get<std::uint32_t>(is));
  vol.L = static_cast<int>(get<std::uint32_t>(is));
  vol.C = static_cast<int>(get<std::uint32_t>(is));
  double anchor[9];
  is.read(reinterpret_cast<char*>(anchor), sizeof(anchor));
  vol.anchor.x = anchor[0];
  vol.anchor.y = anchor[1];
  vol.anchor.z = anchor[2];
  vol.anchor.w = anchor[3];
  vol.anchor.h = anchor[4];
  vol.anchor.l = anchor[5];
  vol.anchor.yaw = anchor[6];
  vol.anchor.vx = anchor[7];
  vol.anchor.vz = anchor[8];
  vol.weight_scale = get<double>(is);
  const auto n = get<std::uint64_t>(is);
  vol.cells.resize(n);
  for (auto& p : vol.cells) {
    p.x = get<double>(is);
    p.y = get<double>(is);
    p.z = get<double>(is);
  }
  vol.feat.resize(n * vol.C);
  is.read(reinterpret_cast<char*>(vol.feat.data()),
          static_cast<std::streamsize>(vol.feat.size() * sizeof(float)));
  vol.grid.resize(n * vol.C);
  is.read(reinterpret_cast<char*>(vol.grid.data()),
          static_cast<std::streamsize>(vol.grid.size() * sizeof(float)));
  vol.weight.resize(n);
  is.read(reinterpret_cast<char*>(vol.weight.data()),
          static_cast<std::streamsize>(vol.weight.size() * sizeof(double)));
  vol.valid.resize(n);
  is.read(reinterpret_cast<char*>(vol.valid.data()),
          static_cast<std::streamsize>(n));
  if (!is) throw IoError("load_volume: truncated file " + path);
  return vol;
}

}  // namespace dyno
