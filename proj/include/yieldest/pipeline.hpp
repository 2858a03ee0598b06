#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "yieldest/count.hpp"
#include "yieldest/data_io.hpp"
#include "yieldest/detect.hpp"
#include "yieldest/yieldmap.hpp"

namespace yieldest {

/// Apple mask of an sRGB frame under a finalized colour model.
BinaryMask detect_mask(const RgbImage& frame, const ColorModel& model);
std::vector<Detection> detect_frame(const RgbImage& frame, const std::string& frame_id, const ColorModel& model);

/// Counts an observation from its ROI in the frame's apple mask. Frames are
/// fetched through `mask_of` only when an observation is actually counted.
/// Observations without an ROI fall back to their embedded count.
ObservationCounter patch_counter(std::function<const BinaryMask&(const std::string&)> mask_of, CountConfig cfg);

/// Fills unresolved track counts with `counter`, drops ground/background
/// tracks and their overlaps, and merges the two sides.
YieldReport estimate_yield(const SceneFile& scene, const ObservationCounter& counter, const std::string& method,
                           std::optional<long> harvested);

/// Applies external counts keyed by (side, cluster id) to a scene's tracks.
void apply_external_counts(SceneFile& scene, const std::map<ClusterKey, int>& counts);
std::set<ClusterKey> cluster_keys(const SceneFile& scene);

/// Replays a click script: each entry clicks a pixel and labels the
/// highlighted colour class.
struct ScriptedClick {
  std::string frame_id;
  int x = 0;
  int y = 0;
  ColorLabel label = ColorLabel::Apple;
};

/// A JSON list of {frame, x, y, label}; JSON lines are accepted as well.
std::vector<ScriptedClick> read_click_script(const fs::path& path);
void write_click_script(const std::vector<ScriptedClick>& clicks, const fs::path& path);
void run_click_script(SupervisionSession& session, const std::vector<ScriptedClick>& clicks);

}  // namespace yieldest
