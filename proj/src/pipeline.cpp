#include "yieldest/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "yieldest/errors.hpp"

namespace yieldest {

using nlohmann::json;

BinaryMask detect_mask(const RgbImage& frame, const ColorModel& model) { return classify_frame(rgb_to_lab(frame), model); }

std::vector<Detection> detect_frame(const RgbImage& frame, const std::string& frame_id, const ColorModel& model) {
  return detections_from_mask(detect_mask(frame, model), model.config.min_area, frame_id);
}

ObservationCounter patch_counter(std::function<const BinaryMask&(const std::string&)> mask_of, CountConfig cfg) {
  cfg.validate();
  return [mask_of = std::move(mask_of), cfg](const TrackObservation& obs) {
    if (!obs.roi) return embedded_count(obs);
    return count_cluster(ClusterPatch::from_frame_mask(obs.frame_id, mask_of(obs.frame_id), *obs.roi), cfg).count;
  };
}

YieldReport estimate_yield(const SceneFile& scene, const ObservationCounter& counter, const std::string& method,
                           std::optional<long> harvested) {
  const auto overlaps = drop_flagged_overlaps(scene.front, scene.back, scene.overlaps);
  SideModel front = filter_ground_and_background(scene.front);
  SideModel back = filter_ground_and_background(scene.back);
  for (SideModel* side : {&front, &back}) {
    for (auto& t : side->tracks) {
      if (!t.count) t.count = aggregate_track_count(t, counter);
    }
  }
  return make_yield_report(scene.dataset_id, method, front, back, overlaps, harvested);
}

std::set<ClusterKey> cluster_keys(const SceneFile& scene) {
  std::set<ClusterKey> keys;
  for (const SideModel* side : {&scene.front, &scene.back}) {
    for (const auto& t : side->tracks) keys.insert({to_string(side->side), t.id});
  }
  return keys;
}

void apply_external_counts(SceneFile& scene, const std::map<ClusterKey, int>& counts) {
  for (SideModel* side : {&scene.front, &scene.back}) {
    for (auto& t : side->tracks) {
      const auto it = counts.find({to_string(side->side), t.id});
      if (it != counts.end()) t.count = it->second;
    }
  }
}

namespace {

ScriptedClick click_from_json(const json& j) {
  return {j.at("frame").get<std::string>(), j.at("x").get<int>(), j.at("y").get<int>(),
          color_label_from_string(j.at("label").get<std::string>())};
}

}  // namespace

std::vector<ScriptedClick> read_click_script(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<ScriptedClick> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  if (text[first] == '[') {
    // A JSON list of clicks.
    const json j = read_json_file(path);
    for (std::size_t i = 0; i < j.size(); ++i) {
      try {
        out.push_back(click_from_json(j[i]));
      } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": click " + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }
  // Otherwise one click per line.
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(click_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

void write_click_script(const std::vector<ScriptedClick>& clicks, const fs::path& path) {
  json list = json::array();
  for (const auto& c : clicks) list.push_back({{"frame", c.frame_id}, {"x", c.x}, {"y", c.y}, {"label", to_string(c.label)}});
  write_text_file(path, list.dump(2) + "\n");
}

void run_click_script(SupervisionSession& session, const std::vector<ScriptedClick>& clicks) {
  for (const auto& c : clicks) {
    const ClickResult r = click_to_cluster(session, c.frame_id, c.x, c.y);
    label_cluster(session, r.component, c.label);
  }
}

}  // namespace yieldest
