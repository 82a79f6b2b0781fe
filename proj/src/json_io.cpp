#include "dyno/json_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dyno/errors.hpp"

namespace dyno {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // Keep a numeric token JSON-parseable.
  if (s == "inf" || s == "-inf" || s == "nan" || s == "-nan")
    throw IoError("json: refusing to serialize non-finite number");
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

}  // namespace

void JsonWriter::newline() {
  out_ += '\n';
  out_.append(2 * stack_.size(), ' ');
}

void JsonWriter::separator() {
  if (pending_key_) {
    pending_key_ = false;
    return;
  }
  if (!stack_.empty()) {
    if (has_items_.back()) out_ += ',';
    has_items_.back() = true;
    newline();
  }
}

JsonWriter& JsonWriter::begin_object() {
  separator();
  out_ += '{';
  stack_.push_back('o');
  has_items_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  const bool had = has_items_.back();
  stack_.pop_back();
  has_items_.pop_back();
  if (had) newline();
  out_ += '}';
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  separator();
  out_ += '[';
  stack_.push_back('a');
  has_items_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  const bool had = has_items_.back();
  stack_.pop_back();
  has_items_.pop_back();
  if (had) newline();
  out_ += ']';
  return *this;
}

JsonWriter& JsonWriter::key(const std::string& k) {
  separator();
  out_ += '"';
  out_ += escape(k);
  out_ += "\": ";
  pending_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  separator();
  out_ += format_double(v);
  return *this;
}

JsonWriter& JsonWriter::value(int v) { return value(static_cast<std::int64_t>(v)); }

JsonWriter& JsonWriter::value(std::int64_t v) {
  separator();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  separator();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  separator();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
  separator();
  out_ += '"';
  out_ += escape(v);
  out_ += '"';
  return *this;
}

JsonWriter& JsonWriter::value(const char* v) { return value(std::string(v)); }

// ---------------------------------------------------------------------------
// Parsing helpers

namespace {

using njson = nlohmann::json;

njson parse_document(const std::string& text) {
  try {
    return njson::parse(text);
  } catch (const njson::parse_error& e) {
    // Translate the byte offset into a line for the error message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError("json parse error at line " + std::to_string(line) +
                      ", column " + std::to_string(col) + ": " + e.what());
  }
}

const njson& require(const njson& j, const char* key, const std::string& ctx) {
  if (!j.is_object())
    throw SchemaError(ctx + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end())
    throw SchemaError(ctx + ": missing required key '" + key + "'");
  return *it;
}

double require_num(const njson& j, const char* key, const std::string& ctx) {
  const njson& v = require(j, key, ctx);
  if (!v.is_number())
    throw SchemaError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

std::int64_t require_int(const njson& j, const char* key,
                         const std::string& ctx) {
  const njson& v = require(j, key, ctx);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw SchemaError(ctx + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t require_u64(const njson& j, const char* key,
                          const std::string& ctx) {
  const njson& v = require(j, key, ctx);
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw SchemaError(ctx + "." + key + ": expected an unsigned integer");
  return v.get<std::uint64_t>();
}

const njson& require_array(const njson& j, const char* key,
                           const std::string& ctx) {
  const njson& v = require(j, key, ctx);
  if (!v.is_array())
    throw SchemaError(ctx + "." + key + ": expected an array");
  return v;
}

double opt_num(const njson& j, const char* key, double fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<double>();
}

void write_box_fields(JsonWriter& w, const Box3D& b, bool with_track_id) {
  w.key("x").value(b.x);
  w.key("y").value(b.y);
  w.key("z").value(b.z);
  w.key("w").value(b.w);
  w.key("h").value(b.h);
  w.key("l").value(b.l);
  w.key("yaw").value(b.yaw);
  w.key("vx").value(b.vx);
  w.key("vz").value(b.vz);
  w.key("score").value(b.score);
  w.key("class_id").value(b.class_id);
  if (with_track_id) w.key("track_id").value(b.track_id);
}

Box3D parse_box(const njson& j, const std::string& ctx) {
  Box3D b;
  b.x = require_num(j, "x", ctx);
  b.y = require_num(j, "y", ctx);
  b.z = require_num(j, "z", ctx);
  b.w = require_num(j, "w", ctx);
  b.h = require_num(j, "h", ctx);
  b.l = require_num(j, "l", ctx);
  b.yaw = require_num(j, "yaw", ctx);
  b.vx = require_num(j, "vx", ctx);
  b.vz = require_num(j, "vz", ctx);
  b.score = require_num(j, "score", ctx);
  b.class_id = static_cast<int>(require_int(j, "class_id", ctx));
  if (j.contains("track_id"))
    b.track_id = static_cast<int>(require_int(j, "track_id", ctx));
  if (!(b.w > 0.0 && b.h > 0.0 && b.l > 0.0))
    throw SchemaError(ctx + ": box dimensions must be positive");
  if (b.score < 0.0 || b.score > 1.0)
    throw SchemaError(ctx + ": score outside [0, 1]");
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scene

std::string scene_to_json(const Scene& scene) {
  JsonWriter w;
  w.begin_object();
  w.key("version").value(1);
  w.key("seed").value(scene.seed);
  w.key("cameras").begin_array();
  for (const CameraRig& cam : scene.cameras) {
    w.begin_object();
    w.key("f").value(cam.k.f);
    w.key("cu").value(cam.k.cu);
    w.key("cv").value(cam.k.cv);
    w.key("width").value(cam.width);
    w.key("height").value(cam.height);
    w.key("pose").begin_object();
    w.key("dx").value(cam.mount.dx);
    w.key("dz").value(cam.mount.dz);
    w.key("yaw").value(cam.mount.yaw);
    w.key("y").value(cam.mount_y);
    w.end_object();
    w.end_object();
  }
  w.end_array();
  w.key("frames").begin_array();
  for (double t : scene.frame_times) w.value(t);
  w.end_array();
  w.key("ego").begin_array();
  for (const PlanarMotion& p : scene.ego_poses) {
    w.begin_object();
    w.key("dx").value(p.dx);
    w.key("dz").value(p.dz);
    w.key("yaw").value(p.yaw);
    w.end_object();
  }
  w.end_array();
  w.key("objects").begin_array();
  for (const SceneObject& obj : scene.objects) {
    w.begin_object();
    w.key("id").value(obj.id);
    w.key("box0").begin_object();
    write_box_fields(w, obj.box0, true);
    w.end_object();
    w.key("motion").begin_object();
    w.key("vx").value(obj.vx);
    w.key("vz").value(obj.vz);
    w.end_object();
    w.key("feature_seed").value(obj.feature_seed);
    w.key("texture_amplitude").value(obj.texture_amplitude);
    w.end_object();
  }
  w.end_array();
  const SceneConfig& c = scene.config;
  w.key("config").begin_object();
  w.key("n_frames").value(c.n_frames);
  w.key("dt").value(c.dt);
  w.key("n_cameras").value(c.n_cameras);
  w.key("n_objects").value(c.n_objects);
  w.key("moving_ratio").value(c.moving_ratio);
  w.key("speed_min").value(c.speed_min);
  w.key("speed_max").value(c.speed_max);
  w.key("spawn_x_min").value(c.spawn_x_min);
  w.key("spawn_x_max").value(c.spawn_x_max);
  w.key("spawn_z_min").value(c.spawn_z_min);
  w.key("spawn_z_max").value(c.spawn_z_max);
  w.key("size_w_min").value(c.size_w_min);
  w.key("size_w_max").value(c.size_w_max);
  w.key("size_l_min").value(c.size_l_min);
  w.key("size_l_max").value(c.size_l_max);
  w.key("size_h_min").value(c.size_h_min);
  w.key("size_h_max").value(c.size_h_max);
  w.key("ego_speed").value(c.ego_speed);
  w.key("ego_lateral").value(c.ego_lateral);
  w.key("ego_yaw_rate").value(c.ego_yaw_rate);
  w.key("image_width").value(c.image_width);
  w.key("image_height").value(c.image_height);
  w.key("focal").value(c.focal);
  w.key("channels").value(c.channels);
  w.key("depth_hint_sigma").value(c.depth_hint_sigma);
  w.key("z_ref").value(c.z_ref);
  w.key("texture_amplitude").value(c.texture_amplitude);
  w.key("visibility_threshold").value(c.visibility_threshold);
  w.end_object();
  w.end_object();
  return w.str() + "\n";
}

namespace {
SceneConfig scene_config_from_jsonobj(const njson& j, const std::string& ctx) {
  SceneConfig c;
  c.n_frames = static_cast<int>(require_int(j, "n_frames", ctx));
  c.dt = require_num(j, "dt", ctx);
  c.n_cameras = static_cast<int>(require_int(j, "n_cameras", ctx));
  c.n_objects = static_cast<int>(require_int(j, "n_objects", ctx));
  c.moving_ratio = require_num(j, "moving_ratio", ctx);
  c.speed_min = require_num(j, "speed_min", ctx);
  c.speed_max = require_num(j, "speed_max", ctx);
  c.spawn_x_min = require_num(j, "spawn_x_min", ctx);
  c.spawn_x_max = require_num(j, "spawn_x_max", ctx);
  c.spawn_z_min = require_num(j, "spawn_z_min", ctx);
  c.spawn_z_max = require_num(j, "spawn_z_max", ctx);
  c.size_w_min = require_num(j, "size_w_min", ctx);
  c.size_w_max = require_num(j, "size_w_max", ctx);
  c.size_l_min = require_num(j, "size_l_min", ctx);
  c.size_l_max = require_num(j, "size_l_max", ctx);
  c.size_h_min = require_num(j, "size_h_min", ctx);
  c.size_h_max = require_num(j, "size_h_max", ctx);
  c.ego_speed = require_num(j, "ego_speed", ctx);
  c.ego_lateral = require_num(j, "ego_lateral", ctx);
  c.ego_yaw_rate = require_num(j, "ego_yaw_rate", ctx);
  c.image_width = static_cast<int>(require_int(j, "image_width", ctx));
  c.image_height = static_cast<int>(require_int(j, "image_height", ctx));
  c.focal = require_num(j, "focal", ctx);
  c.channels = static_cast<int>(require_int(j, "channels", ctx));
  c.depth_hint_sigma = require_num(j, "depth_hint_sigma", ctx);
  c.z_ref = require_num(j, "z_ref", ctx);
  c.texture_amplitude = require_num(j, "texture_amplitude", ctx);
  c.visibility_threshold = require_num(j, "visibility_threshold", ctx);
  return c;
}
}  // namespace

Scene scene_from_json(const std::string& text) {
  const njson j = parse_document(text);
  const std::string ctx = "scene";
  if (require_int(j, "version", ctx) != 1)
    throw SchemaError("scene: unsupported version");
  Scene scene;
  scene.seed = require_u64(j, "seed", ctx);
  for (const njson& cj : require_array(j, "cameras", ctx)) {
    CameraRig cam;
    cam.k.f = require_num(cj, "f", "scene.cameras[]");
    cam.k.cu = require_num(cj, "cu", "scene.cameras[]");
    cam.k.cv = require_num(cj, "cv", "scene.cameras[]");
    cam.width = static_cast<int>(require_int(cj, "width", "scene.cameras[]"));
    cam.height = static_cast<int>(require_int(cj, "height", "scene.cameras[]"));
    if (!(cam.k.f > 0.0))
      throw SchemaError("scene.cameras[]: focal length must be positive");
    const njson& pose = require(cj, "pose", "scene.cameras[]");
    cam.mount = PlanarMotion(require_num(pose, "dx", "scene.cameras[].pose"),
                             require_num(pose, "dz", "scene.cameras[].pose"),
                             require_num(pose, "yaw", "scene.cameras[].pose"));
    cam.mount_y = require_num(pose, "y", "scene.cameras[].pose");
    scene.cameras.push_back(cam);
  }
  if (scene.cameras.empty())
    throw SchemaError("scene: needs at least one camera");
  double prev_t = -1e300;
  for (const njson& t : require_array(j, "frames", ctx)) {
    if (!t.is_number()) throw SchemaError("scene.frames[]: expected numbers");
    const double tv = t.get<double>();
    if (tv <= prev_t)
      throw SchemaError("scene.frames[]: times must be strictly increasing");
    prev_t = tv;
    scene.frame_times.push_back(tv);
  }
  for (const njson& e : require_array(j, "ego", ctx)) {
    scene.ego_poses.emplace_back(require_num(e, "dx", "scene.ego[]"),
                                 require_num(e, "dz", "scene.ego[]"),
                                 require_num(e, "yaw", "scene.ego[]"));
  }
  if (scene.ego_poses.size() != scene.frame_times.size())
    throw SchemaError("scene: ego pose count must match frame count");
  for (const njson& oj : require_array(j, "objects", ctx)) {
    SceneObject obj;
    obj.id = static_cast<int>(require_int(oj, "id", "scene.objects[]"));
    obj.box0 = parse_box(require(oj, "box0", "scene.objects[]"),
                         "scene.objects[].box0");
    const njson& m = require(oj, "motion", "scene.objects[]");
    obj.vx = require_num(m, "vx", "scene.objects[].motion");
    obj.vz = require_num(m, "vz", "scene.objects[].motion");
    obj.feature_seed = require_u64(oj, "feature_seed", "scene.objects[]");
    obj.texture_amplitude = opt_num(oj, "texture_amplitude", 1.0);
    obj.box0.vx = obj.vx;
    obj.box0.vz = obj.vz;
    scene.objects.push_back(obj);
  }
  scene.config = scene_config_from_jsonobj(require(j, "config", ctx),
                                           "scene.config");
  return scene;
}

// ---------------------------------------------------------------------------
// Detections and tracklets

std::string detections_to_json(const std::vector<std::vector<Box3D>>& frames,
                               bool with_track_id) {
  JsonWriter w;
  w.begin_array();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    w.begin_object();
    const int frame_id =
        frames[f].empty() ? static_cast<int>(f) : frames[f].front().frame_id;
    w.key("frame_id").value(frame_id);
    w.key("boxes").begin_array();
    for (const Box3D& b : frames[f]) {
      w.begin_object();
      write_box_fields(w, b, with_track_id);
      w.end_object();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  return w.str() + "\n";
}

std::vector<std::vector<Box3D>> detections_from_json(const std::string& text) {
  const njson j = parse_document(text);
  if (!j.is_array()) throw SchemaError("detections: expected a top-level array");
  std::vector<std::vector<Box3D>> frames;
  for (const njson& fj : j) {
    const int frame_id =
        static_cast<int>(require_int(fj, "frame_id", "detections[]"));
    std::vector<Box3D> boxes;
    for (const njson& bj : require_array(fj, "boxes", "detections[]")) {
      Box3D b = parse_box(bj, "detections[].boxes[]");
      b.frame_id = frame_id;
      boxes.push_back(b);
    }
    frames.push_back(std::move(boxes));
  }
  return frames;
}

std::string tracklets_to_json(const std::vector<std::vector<Box3D>>& frames) {
  JsonWriter w;
  w.begin_array();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    w.begin_object();
    const int frame_id =
        frames[f].empty() ? static_cast<int>(f) : frames[f].front().frame_id;
    w.key("frame_id").value(frame_id);
    w.key("tracks").begin_array();
    for (const Box3D& b : frames[f]) {
      w.begin_object();
      w.key("track_id").value(b.track_id);
      w.key("box").begin_object();
      write_box_fields(w, b, false);
      w.end_object();
      w.key("score").value(b.score);
      w.end_object();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  return w.str() + "\n";
}

std::vector<std::vector<Box3D>> tracklets_from_json(const std::string& text) {
  const njson j = parse_document(text);
  if (!j.is_array()) throw SchemaError("tracklets: expected a top-level array");
  std::vector<std::vector<Box3D>> frames;
  for (const njson& fj : j) {
    const int frame_id =
        static_cast<int>(require_int(fj, "frame_id", "tracklets[]"));
    std::vector<Box3D> boxes;
    for (const njson& tj : require_array(fj, "tracks", "tracklets[]")) {
      Box3D b = parse_box(require(tj, "box", "tracklets[].tracks[]"),
                          "tracklets[].tracks[].box");
      b.track_id =
          static_cast<int>(require_int(tj, "track_id", "tracklets[].tracks[]"));
      b.score = require_num(tj, "score", "tracklets[].tracks[]");
      b.frame_id = frame_id;
      boxes.push_back(b);
    }
    frames.push_back(std::move(boxes));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Reports

std::string detection_report_to_json(const DetectionEvalReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("mAP").value(report.map);
  w.key("mATE");
  if (report.mate)
    w.value(*report.mate);
  else
    w.value("absent");
  w.key("mAVE");
  if (report.mave)
    w.value(*report.mave);
  else
    w.value("absent");
  w.key("ap").begin_array();
  for (const auto& [cls, per_thr] : report.ap) {
    for (const auto& [thr, ap] : per_thr) {
      w.begin_object();
      w.key("class_id").value(cls);
      w.key("threshold").value(thr);
      w.key("ap").value(ap);
      w.end_object();
    }
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

std::string detection_report_to_csv(const DetectionEvalReport& report) {
  std::ostringstream os;
  os << "metric,class_id,threshold,value\n";
  for (const auto& [cls, per_thr] : report.ap)
    for (const auto& [thr, ap] : per_thr)
      os << "AP," << cls << "," << format_double(thr) << ","
         << format_double(ap) << "\n";
  os << "mAP,,," << format_double(report.map) << "\n";
  os << "mATE,,," << (report.mate ? format_double(*report.mate) : "absent")
     << "\n";
  os << "mAVE,,," << (report.mave ? format_double(*report.mave) : "absent")
     << "\n";
  return os.str();
}

std::string tracking_report_to_json(const TrackingEvalReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("AMOTA").value(report.amota);
  w.key("AMOTP").value(report.amotp);
  w.key("recall").value(report.recall);
  w.key("id_switches").value(report.id_switches);
  w.key("points").begin_array();
  for (std::size_t i = 0; i < report.recall_grid.size(); ++i) {
    w.begin_object();
    w.key("recall").value(report.recall_grid[i]);
    w.key("mota").value(report.mota[i]);
    w.key("motp").value(report.motp[i]);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

std::string tracking_report_to_csv(const TrackingEvalReport& report) {
  std::ostringstream os;
  os << "metric,recall_point,value\n";
  for (std::size_t i = 0; i < report.recall_grid.size(); ++i) {
    os << "MOTA," << format_double(report.recall_grid[i]) << ","
       << format_double(report.mota[i]) << "\n";
    os << "MOTP," << format_double(report.recall_grid[i]) << ","
       << format_double(report.motp[i]) << "\n";
  }
  os << "AMOTA,," << format_double(report.amota) << "\n";
  os << "AMOTP,," << format_double(report.amotp) << "\n";
  os << "recall,," << format_double(report.recall) << "\n";
  os << "id_switches,," << report.id_switches << "\n";
  return os.str();
}

std::string bias_table_to_csv(const BiasTable& table) {
  std::ostringstream os;
  os << "speed_lo,speed_hi,time_gap,mean_abs_bias,count\n";
  for (const BiasCell& c : table.cells) {
    os << format_double(c.speed_lo) << "," << format_double(c.speed_hi) << ","
       << format_double(c.time_gap) << "," << format_double(c.mean_abs_bias)
       << "," << c.count << "\n";
  }
  os << "# moving_fraction," << format_double(table.moving_fraction) << ",,,\n";
  os << "# static_mean_abs_bias," << format_double(table.static_mean_abs_bias)
     << ",,,\n";

  // Per-gap linear fit of mean bias against bin-center speed.
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> per_gap;
  for (const BiasCell& c : table.cells) {
    per_gap[c.time_gap].first.push_back(0.5 * (c.speed_lo + c.speed_hi));
    per_gap[c.time_gap].second.push_back(c.mean_abs_bias);
  }
  for (const auto& [gap, xy] : per_gap) {
    if (xy.first.size() < 2) continue;
    const LinearFit fit = linear_fit(xy.first, xy.second);
    os << "# fit,gap=" << format_double(gap) << ",slope="
       << format_double(fit.slope) << ",intercept="
       << format_double(fit.intercept) << ",r2=" << format_double(fit.r2)
       << "\n";
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace dyno
