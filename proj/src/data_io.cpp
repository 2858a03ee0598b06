#include "yieldest/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "yieldest/errors.hpp"
#include "yieldest/rle.hpp"

namespace yieldest {

using nlohmann::json;

namespace {

// nlohmann type/range/out-of-range errors mean the document has the wrong
// shape; report them against the file they came from.
template <class F>
auto guarded(const std::string& source, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_text(const std::string& text, const std::string& source, std::size_t first_line = 1) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = first_line + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(source, line, e.what());
  } catch (const json::exception& e) {
    // e.g. a number literal that overflows a double
    throw ParseError(source, first_line, e.what());
  }
}

json box_to_json(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("bounding box must be [x, y, w, h]");
  BoundingBox b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (b.w < 1 || b.h < 1) throw ValidationError("bounding box must have w, h >= 1");
  return b;
}

json extent_to_json(const Extent3& e) { return {{"min", e.min}, {"max", e.max}}; }

Extent3 extent_from_json(const json& j) {
  Extent3 e;
  e.min = j.at("min").get<std::array<double, 3>>();
  e.max = j.at("max").get<std::array<double, 3>>();
  return e;
}

std::vector<Point2> via_points(const json& shape) {
  const std::string name = shape.value("name", "");
  std::vector<Point2> pts;
  if (name == "polygon" || name == "polyline") {
    const auto xs = shape.at("all_points_x").get<std::vector<double>>();
    const auto ys = shape.at("all_points_y").get<std::vector<double>>();
    if (xs.size() != ys.size()) throw ValidationError("polygon x/y vertex lists differ in length");
    for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], ys[i]});
  } else if (name == "rect") {
    const double x = shape.at("x").get<double>(), y = shape.at("y").get<double>();
    const double w = shape.at("width").get<double>(), h = shape.at("height").get<double>();
    pts = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
  }
  return pts;
}

}  // namespace

json read_json_file(const fs::path& path) { return parse_text(slurp(path), path.string()); }

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void check_format_version(const json& j, const std::string& source) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw IncompatibleFormatError(source + ": missing format_version");
  }
  const json& v = j["format_version"];
  if (!v.is_number_integer() || v.get<long>() != kFormatVersion) {
    throw IncompatibleFormatError(source + ": format_version " + v.dump() + " is not supported (expected " +
                                  std::to_string(kFormatVersion) + ")");
  }
}

// ---- manifests

const FrameEntry& DatasetManifest::frame(const std::string& id) const {
  for (const auto& f : frames) {
    if (f.id == id) return f;
  }
  throw NotFoundError("frame '" + id + "' not in dataset '" + dataset_id + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_json_file(path);
  const std::string src = path.string();
  check_format_version(j, src);
  const fs::path base = fs::absolute(path).parent_path();
  return guarded(src, [&] {
    DatasetManifest m;
    m.dataset_id = j.at("dataset_id").get<std::string>();
    if (m.dataset_id.empty()) throw ValidationError(src + ": dataset_id is empty");
    m.side = side_from_string(j.value("side", "single"));
    std::set<std::string> ids;
    for (const auto& f : j.at("frames")) {
      FrameEntry e{f.at("id").get<std::string>(), fs::path(f.at("path").get<std::string>())};
      if (!ids.insert(e.id).second) throw ValidationError(src + ": duplicate frame id '" + e.id + "'");
      if (e.path.is_relative()) e.path = base / e.path;
      e.path = e.path.lexically_normal();
      if (!fs::exists(e.path)) throw IoError(src + ": frame '" + e.id + "' file not found: " + e.path.string());
      m.frames.push_back(std::move(e));
    }
    if (j.contains("annotations") && !j["annotations"].is_null()) {
      fs::path a = j["annotations"].get<std::string>();
      if (a.is_relative()) a = base / a;
      m.annotations = a.lexically_normal();
    }
    if (j.contains("harvested_count") && !j["harvested_count"].is_null()) {
      m.harvested_count = j["harvested_count"].get<long>();
      if (*m.harvested_count < 0) throw ValidationError(src + ": harvested_count must be >= 0");
    }
    return m;
  });
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) { return fs::absolute(p).lexically_relative(base).generic_string(); };
  json frames = json::array();
  for (const auto& f : m.frames) frames.push_back({{"id", f.id}, {"path", rel(f.path)}});
  json j = {{"format_version", kFormatVersion}, {"dataset_id", m.dataset_id}, {"side", to_string(m.side)}, {"frames", frames}};
  if (m.annotations) j["annotations"] = rel(*m.annotations);
  if (m.harvested_count) j["harvested_count"] = *m.harvested_count;
  write_text_file(path, j.dump(2) + "\n");
}

// ---- polygons

PolygonLoad parse_polygon_annotations(const json& root, const std::string& source) {
  return guarded(source, [&] {
    PolygonLoad out;
    if (root.is_null()) return out;
    const json& images = root.contains("_via_img_metadata") ? root["_via_img_metadata"] : root;
    if (!images.is_object()) throw ValidationError(source + ": expected an object of image entries");
    for (const auto& [key, image] : images.items()) {
      if (!image.is_object() || !image.contains("filename")) continue;
      PolygonAnnotation ann;
      ann.frame_id = fs::path(image["filename"].get<std::string>()).stem().string();
      std::vector<const json*> regions;
      if (image.contains("regions")) {
        const json& r = image["regions"];
        if (r.is_array() || r.is_object()) {
          for (const auto& region : r) regions.push_back(&region);
        }
      }
      for (std::size_t i = 0; i < regions.size(); ++i) {
        const json& shape = regions[i]->at("shape_attributes");
        Polygon poly = via_points(shape);
        if (poly.size() < 3) {
          out.warnings.push_back(ann.frame_id + ": region " + std::to_string(i) + " (" + shape.value("name", "?") +
                                 ") has fewer than 3 vertices; skipped");
          continue;
        }
        ann.polygons.push_back(std::move(poly));
      }
      out.annotations.push_back(std::move(ann));
    }
    return out;
  });
}

PolygonLoad load_polygon_annotations(const fs::path& path) {
  const std::string text = slurp(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  return parse_polygon_annotations(parse_text(text, path.string()), path.string());
}

BinaryMask rasterize_polygon(const Polygon& poly, int width, int height) {
  BinaryMask mask(width, height);
  const std::size_t n = poly.size();
  if (n < 3) return mask;
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double cy = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = poly[i];
      const Point2& b = poly[(i + 1) % n];
      // Half-open rule so a vertex on the scanline is counted once.
      if ((a.y <= cy) != (b.y <= cy)) xs.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // pixel x is inside when xs[k] <= x + 0.5 < xs[k+1]
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int x1 = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int x = x0; x < x1; ++x) mask.set(x, y, true);
    }
  }
  return mask;
}

BoundingBox polygon_bbox(const Polygon& poly) {
  if (poly.empty()) throw ValidationError("polygon has no vertices");
  double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const int bx = static_cast<int>(std::floor(x0));
  const int by = static_cast<int>(std::floor(y0));
  return {bx, by, std::max(1, static_cast<int>(std::ceil(x1)) - bx), std::max(1, static_cast<int>(std::ceil(y1)) - by)};
}

// ---- boxes

std::vector<BoxAnnotation> bbox_annotations_from_json(const json& j, const std::string& source) {
  check_format_version(j, source);
  return guarded(source, [&] {
    std::vector<BoxAnnotation> out;
    std::set<std::string> seen;
    for (const auto& f : j.at("frames")) {
      BoxAnnotation a;
      a.frame_id = f.at("frame").get<std::string>();
      a.width = f.at("width").get<int>();
      a.height = f.at("height").get<int>();
      if (a.width < 1 || a.height < 1) throw ValidationError(source + ": frame '" + a.frame_id + "' has no size");
      if (!seen.insert(a.frame_id).second) throw ValidationError(source + ": duplicate frame '" + a.frame_id + "'");
      for (const auto& b : f.at("boxes")) {
        const BoundingBox box = box_from_json(b);
        if (box.x < 0 || box.y < 0 || box.right() > a.width || box.bottom() > a.height) {
          throw ValidationError(source + ": box " + b.dump() + " exceeds frame '" + a.frame_id + "' (" +
                                std::to_string(a.width) + "x" + std::to_string(a.height) + ")");
        }
        a.boxes.push_back(box);
      }
      out.push_back(std::move(a));
    }
    return out;
  });
}

std::vector<BoxAnnotation> load_bbox_annotations(const fs::path& path) {
  return bbox_annotations_from_json(read_json_file(path), path.string());
}

json to_json(const std::vector<BoxAnnotation>& annotations) {
  json frames = json::array();
  for (const auto& a : annotations) {
    json boxes = json::array();
    for (const auto& b : a.boxes) boxes.push_back(box_to_json(b));
    frames.push_back({{"frame", a.frame_id}, {"width", a.width}, {"height", a.height}, {"boxes", boxes}});
  }
  return {{"format_version", kFormatVersion}, {"frames", frames}};
}

void save_bbox_annotations(const std::vector<BoxAnnotation>& annotations, const fs::path& path) {
  write_text_file(path, to_json(annotations).dump(2) + "\n");
}

// ---- colour models

json to_json(const DetectConfig& c) {
  return {{"slic",
           {{"target_count", c.slic.target_count},
            {"compactness", c.slic.compactness},
            {"iterations", c.slic.iterations},
            {"seed_perturbation", c.slic.seed_perturbation}}},
          {"em",
           {{"max_iterations", c.em.max_iterations},
            {"tolerance", c.em.tolerance},
            {"rng_seed", c.em.rng_seed},
            {"covariance_floor", c.em.covariance_floor}}},
          {"components", c.components},
          {"kl_threshold", c.kl_threshold},
          {"min_area", c.min_area}};
}

DetectConfig detect_config_from_json(const json& j) {
  DetectConfig c;
  if (j.contains("slic")) {
    const json& s = j["slic"];
    c.slic.target_count = s.value("target_count", c.slic.target_count);
    c.slic.compactness = s.value("compactness", c.slic.compactness);
    c.slic.iterations = s.value("iterations", c.slic.iterations);
    c.slic.seed_perturbation = s.value("seed_perturbation", c.slic.seed_perturbation);
  }
  if (j.contains("em")) {
    const json& e = j["em"];
    c.em.max_iterations = e.value("max_iterations", c.em.max_iterations);
    c.em.tolerance = e.value("tolerance", c.em.tolerance);
    c.em.rng_seed = e.value("rng_seed", c.em.rng_seed);
    c.em.covariance_floor = e.value("covariance_floor", c.em.covariance_floor);
  }
  c.components = j.value("components", c.components);
  c.kl_threshold = j.value("kl_threshold", c.kl_threshold);
  c.min_area = j.value("min_area", c.min_area);
  c.validate();
  return c;
}

json to_json(const ColorModel& m) {
  json labels = json::array();
  for (const auto l : m.labels) labels.push_back(to_string(l));
  return {{"format_version", kFormatVersion}, {"kind", "color-model"}, {"colorspace", m.colorspace},
          {"provenance", to_string(m.provenance)}, {"mixture", to_json(m.mixture)}, {"labels", labels},
          {"config", to_json(m.config)}};
}

ColorModel color_model_from_json(const json& j, const std::string& source) {
  check_format_version(j, source);
  return guarded(source, [&] {
    if (j.value("kind", "") != "color-model") throw ValidationError(source + ": not a color model document");
    ColorModel m{mixture_from_json(j.at("mixture")), {}, provenance_from_string(j.at("provenance").get<std::string>()),
                 j.at("colorspace").get<std::string>(), detect_config_from_json(j.at("config"))};
    if (m.colorspace != "CIELAB-D65") throw IncompatibleFormatError(source + ": unsupported colorspace " + m.colorspace);
    for (const auto& l : j.at("labels")) m.labels.push_back(color_label_from_string(l.get<std::string>()));
    if (static_cast<int>(m.labels.size()) != m.mixture.size()) {
      throw ValidationError(source + ": " + std::to_string(m.labels.size()) + " labels for " +
                            std::to_string(m.mixture.size()) + " components");
    }
    if (m.mixture.dim() != 3) throw ValidationError(source + ": colour mixture must be 3-dimensional");
    return m;
  });
}

void save_color_model(const ColorModel& model, const fs::path& path) {
  write_text_file(path, to_json(model).dump(2) + "\n");
}

ColorModel load_color_model(const fs::path& path) { return color_model_from_json(read_json_file(path), path.string()); }

// ---- detections

json to_json(const Detection& d) {
  return {{"frame", d.frame_id}, {"bbox", box_to_json(d.bbox)}, {"area", d.area}, {"mask_rle", rle_to_json(rle_encode(d.mask))}};
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.frame_id = j.at("frame").get<std::string>();
  d.bbox = box_from_json(j.at("bbox"));
  d.area = j.at("area").get<long>();
  d.mask = rle_decode(rle_from_json(j.at("mask_rle")));
  if (d.mask.width() != d.bbox.w || d.mask.height() != d.bbox.h) {
    throw ValidationError("detection mask size does not match its bbox");
  }
  return d;
}

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  for (const auto& d : detections) out << to_json(d).dump() << '\n';
}

void write_detections(const fs::path& path, const std::vector<Detection>& detections) {
  std::ostringstream ss;
  write_detections(ss, detections);
  write_text_file(path, ss.str());
}

std::vector<Detection> read_detections(std::istream& in, const std::string& source) {
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_text(line, source, lineno);
    try {
      out.push_back(detection_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

std::vector<Detection> read_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_detections(in, path.string());
}

// ---- scenes

json to_json(const SideModel& side) {
  json tracks = json::array();
  for (const auto& t : side.tracks) {
    json obs = json::array();
    for (const auto& o : t.observations) {
      json jo = {{"frame", o.frame_id}, {"area", o.area}};
      if (o.roi) jo["bbox"] = box_to_json(*o.roi);
      if (o.count) jo["count"] = *o.count;
      obs.push_back(std::move(jo));
    }
    json jt = {{"id", t.id}, {"extent", extent_to_json(t.extent)}, {"on_ground", t.on_ground},
               {"background", t.background}, {"observations", obs}};
    if (t.count) jt["count"] = *t.count;
    tracks.push_back(std::move(jt));
  }
  return {{"side", to_string(side.side)}, {"tracks", tracks}};
}

SideModel side_model_from_json(const json& j) {
  SideModel s;
  s.side = side_from_string(j.at("side").get<std::string>());
  for (const auto& jt : j.at("tracks")) {
    ClusterTrack t;
    t.id = jt.at("id").get<std::string>();
    t.extent = extent_from_json(jt.at("extent"));
    t.on_ground = jt.value("on_ground", false);
    t.background = jt.value("background", false);
    if (jt.contains("count")) t.count = jt["count"].get<int>();
    for (const auto& jo : jt.at("observations")) {
      TrackObservation o;
      o.frame_id = jo.at("frame").get<std::string>();
      o.area = jo.at("area").get<long>();
      if (o.area < 0) throw ValidationError("observation area must be >= 0 (cluster '" + t.id + "')");
      if (jo.contains("bbox")) o.roi = box_from_json(jo["bbox"]);
      if (jo.contains("count")) o.count = jo["count"].get<int>();
      t.observations.push_back(std::move(o));
    }
    s.tracks.push_back(std::move(t));
  }
  s.validate();
  return s;
}

json to_json(const SceneFile& scene) {
  json overlaps = json::array();
  for (const auto& o : scene.overlaps) overlaps.push_back({{"front", o.front_id}, {"back", o.back_id}, {"volume", o.volume}});
  json j = {{"format_version", kFormatVersion}, {"dataset_id", scene.dataset_id},
            {"sides", json::array({to_json(scene.front), to_json(scene.back)})}, {"overlaps", overlaps}};
  if (scene.harvested_count) j["harvested_count"] = *scene.harvested_count;
  return j;
}

SceneFile scene_from_json(const json& j, const std::string& source) {
  check_format_version(j, source);
  return guarded(source, [&] {
    SceneFile s;
    s.dataset_id = j.value("dataset_id", "");
    if (j.contains("harvested_count") && !j["harvested_count"].is_null()) s.harvested_count = j["harvested_count"].get<long>();
    bool have_front = false, have_back = false;
    for (const auto& js : j.at("sides")) {
      SideModel side = side_model_from_json(js);
      if (side.side == Side::Back) {
        if (have_back) throw ValidationError(source + ": two back sides");
        s.back = std::move(side);
        have_back = true;
      } else {
        // A single-sided dataset is stored as its front.
        if (have_front) throw ValidationError(source + ": two front sides");
        s.front = std::move(side);
        have_front = true;
      }
    }
    for (const auto& o : j.value("overlaps", json::array())) {
      s.overlaps.push_back({o.at("front").get<std::string>(), o.at("back").get<std::string>(), o.at("volume").get<double>()});
    }
    return s;
  });
}

void write_side_model(const SceneFile& scene, const fs::path& path) { write_text_file(path, to_json(scene).dump(2) + "\n"); }

SceneFile load_scene(const fs::path& path) { return scene_from_json(read_json_file(path), path.string()); }

// ---- reports

json to_json(const YieldReport& r) {
  json j = {{"dataset_id", r.dataset_id}, {"method", r.method}, {"front_sum", r.front_sum}, {"back_sum", r.back_sum},
            {"single_side_sum", r.single_side_sum()}, {"merged_total", r.merged_total}};
  j["harvested"] = r.harvested ? json(*r.harvested) : json(nullptr);
  if (r.harvested && *r.harvested > 0) {
    j["merged_accuracy"] = format_percent(*r.merged_accuracy());
    j["single_side_accuracy"] = format_percent(*r.single_side_accuracy());
  }
  return j;
}

void write_report(const std::vector<YieldReport>& reports, const fs::path& stem) {
  json rows = json::array();
  for (const auto& r : reports) rows.push_back(to_json(r));
  fs::path json_path = stem, txt_path = stem;
  json_path += ".json";
  txt_path += ".txt";
  write_text_file(json_path, json{{"format_version", kFormatVersion}, {"reports", rows}}.dump(2) + "\n");
  write_text_file(txt_path, render_yield_table(reports));
}

json to_json(const MetricsCurve& curve) {
  json pts = json::array();
  for (const auto& p : curve.points) {
    pts.push_back({{"iou", p.iou}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}});
  }
  return {{"dataset_id", curve.dataset_id}, {"method", curve.method}, {"points", pts}};
}

json to_json(const CountConfusion& c) {
  json j = {{"matrix", c.matrix}, {"total", c.total()}, {"accuracy", c.accuracy()}};
  const auto fpr = c.false_positive_rejection_rate();
  j["false_positive_rejection_rate"] = fpr ? json(*fpr) : json(nullptr);
  return j;
}

}  // namespace yieldest
