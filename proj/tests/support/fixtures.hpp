#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "yieldest/count.hpp"
#include "yieldest/detect.hpp"
#include "yieldest/imaging.hpp"
#include "yieldest/pipeline.hpp"
#include "yieldest/simulate.hpp"

namespace fixtures {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "yieldest");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

yieldest::RgbImage flat_image(int w, int h, std::array<std::uint8_t, 3> rgb);

struct DiscPatch {
  yieldest::ClusterPatch patch;
  std::vector<std::array<double, 2>> centers;  // frame coordinates
  double radius = 0;
};

/// k filled discs, radius in [rmin, rmax], centres at least `separation`
/// diameters apart, drawn into a tight patch placed at (origin_x, origin_y).
DiscPatch disc_patch(int k, std::uint64_t seed, double rmin = 8.0, double rmax = 14.0, double separation = 1.5,
                     int origin_x = 0, int origin_y = 0);

/// Click script in the style of a human supervisor: scan each truth mask,
/// click an apple pixel whose colour class is still unlabelled, accept the
/// class as apple when most of its highlight is apple. At most max_clicks.
std::vector<yieldest::ScriptedClick> supervise(const yieldest::SupervisionSession& session,
                                               const std::vector<yieldest::BinaryMask>& truth, int max_clicks = 20);

/// Rendered simulator frames written as PNGs plus a manifest listing them.
struct SimDataset {
  std::filesystem::path manifest;
  yieldest::SimulatedScene scene;
};

/// Small one-tree scene; frames go to dir/frames, manifest to dir/<id>.manifest.json.
SimDataset write_sim_dataset(const std::filesystem::path& dir, const std::string& dataset_id, std::uint64_t seed,
                             int fruits = 20);

/// Detection config sized for the small simulator frames.
yieldest::DetectConfig small_detect_config();

}  // namespace fixtures
