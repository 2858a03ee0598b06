#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "yieldest/detect.hpp"
#include "yieldest/eval.hpp"
#include "yieldest/imaging.hpp"
#include "yieldest/yieldmap.hpp"

namespace yieldest {

namespace fs = std::filesystem;

/// Every JSON document written here carries this "format_version".
inline constexpr int kFormatVersion = 1;

/// Reads and parses a JSON file; syntax errors become ParseError with the
/// offending line.
nlohmann::json read_json_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);
/// Throws IncompatibleFormatError unless j["format_version"] == kFormatVersion.
void check_format_version(const nlohmann::json& j, const std::string& source);

// ---- manifests

struct FrameEntry {
  std::string id;
  fs::path path;  // absolute after loading

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

struct DatasetManifest {
  std::string dataset_id;
  Side side = Side::Single;
  std::vector<FrameEntry> frames;
  std::optional<fs::path> annotations;
  std::optional<long> harvested_count;

  const FrameEntry& frame(const std::string& id) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Relative paths resolve against the manifest's directory; every frame file
/// must exist.
DatasetManifest load_manifest(const fs::path& path);
/// Frame and annotation paths are written relative to the manifest directory.
void save_manifest(const DatasetManifest& manifest, const fs::path& path);

// ---- polygon annotations (VGG Image Annotator export)

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

using Polygon = std::vector<Point2>;

struct PolygonAnnotation {
  std::string frame_id;  // file name without extension
  std::vector<Polygon> polygons;
};

struct PolygonLoad {
  std::vector<PolygonAnnotation> annotations;
  std::vector<std::string> warnings;  // skipped shapes
};

/// Accepts "regions" given as a list or as an object keyed by index, and an
/// optional top-level "_via_img_metadata" wrapper. Polygons and rects are
/// read; shapes with fewer than three vertices are dropped with a warning.
PolygonLoad load_polygon_annotations(const fs::path& path);
PolygonLoad parse_polygon_annotations(const nlohmann::json& j, const std::string& source = "<json>");

/// Pixels whose centre lies inside the polygon (even-odd rule).
BinaryMask rasterize_polygon(const Polygon& polygon, int width, int height);
/// Tight axis-aligned pixel box around the polygon's vertices.
BoundingBox polygon_bbox(const Polygon& polygon);

// ---- box annotations

struct BoxAnnotation {
  std::string frame_id;
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;

  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

/// {"format_version", "frames": [{"frame", "width", "height", "boxes": [[x,y,w,h], ...]}]}
std::vector<BoxAnnotation> load_bbox_annotations(const fs::path& path);
std::vector<BoxAnnotation> bbox_annotations_from_json(const nlohmann::json& j, const std::string& source = "<json>");
nlohmann::json to_json(const std::vector<BoxAnnotation>& annotations);
void save_bbox_annotations(const std::vector<BoxAnnotation>& annotations, const fs::path& path);

// ---- colour models

nlohmann::json to_json(const ColorModel& model);
ColorModel color_model_from_json(const nlohmann::json& j, const std::string& source = "<json>");
void save_color_model(const ColorModel& model, const fs::path& path);
ColorModel load_color_model(const fs::path& path);

nlohmann::json to_json(const DetectConfig& cfg);
DetectConfig detect_config_from_json(const nlohmann::json& j);

// ---- detections (JSON lines)

/// {"frame", "bbox": [x,y,w,h], "area", "mask_rle"}
nlohmann::json to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);
void write_detections(std::ostream& out, const std::vector<Detection>& detections);
void write_detections(const fs::path& path, const std::vector<Detection>& detections);
std::vector<Detection> read_detections(const fs::path& path);
std::vector<Detection> read_detections(std::istream& in, const std::string& source);

// ---- scenes: side models plus overlaps

struct SceneFile {
  std::string dataset_id;
  std::optional<long> harvested_count;
  SideModel front{Side::Front, {}};
  SideModel back{Side::Back, {}};
  std::vector<OverlapRecord> overlaps;

  friend bool operator==(const SceneFile&, const SceneFile&) = default;
};

nlohmann::json to_json(const SideModel& side);
SideModel side_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneFile& scene);
SceneFile scene_from_json(const nlohmann::json& j, const std::string& source = "<json>");
void write_side_model(const SceneFile& scene, const fs::path& path);
SceneFile load_scene(const fs::path& path);

// ---- reports and metrics

nlohmann::json to_json(const YieldReport& r);
/// Writes `<stem>.json` (machine readable) and `<stem>.txt` (table).
void write_report(const std::vector<YieldReport>& reports, const fs::path& stem);

nlohmann::json to_json(const MetricsCurve& curve);
nlohmann::json to_json(const CountConfusion& c);

}  // namespace yieldest
