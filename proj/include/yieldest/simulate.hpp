#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"
#include "yieldest/yieldmap.hpp"

namespace yieldest {

struct SceneParams {
  int trees = 6;
  int fruits_per_tree = 40;
  /// Fraction of clusters that are seen from both sides of the row.
  double both_side_fraction = 0.5;
  /// Per-fruit probability, within a both-side cluster, of being hidden from
  /// one of the two sides.
  double occlusion_rate = 0.1;
  /// Extra tracks flagged as fallen fruit or background trees.
  int spurious_tracks = 4;
  /// Observations per track; the last one has a fruit hidden behind a leaf.
  int observations_per_track = 4;
  bool render = true;

  // Rendering layout: one cluster per cell, cells tiled into frames.
  int cell_size = 96;
  int cells_x = 4;
  int cells_y = 3;
  int fruit_radius_px = 9;

  void validate() const;
};

struct SimFrame {
  std::string id;
  Side side = Side::Front;
  RgbImage image;
  BinaryMask apple_mask;            // true apple pixels
  std::vector<BoundingBox> fruit_boxes;  // one box per rendered fruit
};

struct SimulatedScene {
  long truth = 0;
  SideModel front;
  SideModel back;
  std::vector<OverlapRecord> overlaps;
  std::vector<SimFrame> frames;  // empty unless params.render
};

/// Deterministic synthetic orchard row. Tracks carry true per-observation
/// counts in `TrackObservation::count`, and ROIs into the rendered frames.
SimulatedScene simulate_scene(std::uint64_t seed, const SceneParams& params = {});

}  // namespace yieldest
