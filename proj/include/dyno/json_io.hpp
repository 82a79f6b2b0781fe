#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyno/metrics.hpp"
#include "dyno/scene.hpp"

namespace dyno {

/// Deterministic JSON emitter: fixed key order (insertion order), floats
/// printed with 17 significant digits so values round-trip bit-exactly,
/// UTF-8, LF endings, two-space indent.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(const std::string& k);
  JsonWriter& value(double v);
  JsonWriter& value(int v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(bool v);
  JsonWriter& value(const std::string& v);
  JsonWriter& value(const char* v);
  std::string str() const { return out_; }

 private:
  void separator();
  void newline();
  std::string out_;
  std::vector<char> stack_;      // 'o' or 'a'
  std::vector<bool> has_items_;
  bool pending_key_ = false;
};

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

/// Detection file: one entry per frame, `{frame_id, boxes: [...]}`. Boxes in
/// gt files additionally carry `track_id`.
std::string detections_to_json(const std::vector<std::vector<Box3D>>& frames,
                               bool with_track_id = false);
std::vector<std::vector<Box3D>> detections_from_json(const std::string& text);

/// Tracklet file: `{frame_id, tracks: [{track_id, box, score}]}` per frame.
std::string tracklets_to_json(const std::vector<std::vector<Box3D>>& frames);
std::vector<std::vector<Box3D>> tracklets_from_json(const std::string& text);

std::string detection_report_to_json(const DetectionEvalReport& report);
std::string detection_report_to_csv(const DetectionEvalReport& report);
std::string tracking_report_to_json(const TrackingEvalReport& report);
std::string tracking_report_to_csv(const TrackingEvalReport& report);

/// Plot-ready bias table (speed_bin, time_gap, mean_bias, count), one row
/// per populated cell, plus per-gap linear-fit footer rows.
std::string bias_table_to_csv(const BiasTable& table);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dyno
