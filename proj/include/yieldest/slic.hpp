#pragma once

#include <array>
#include <vector>

#include "yieldest/imaging.hpp"

namespace yieldest {

struct SlicConfig {
  int target_count = 2000;
  double compactness = 10.0;
  int iterations = 10;
  bool seed_perturbation = true;

  void validate() const;
};

struct Superpixel {
  int id = 0;
  long pixel_count = 0;
  std::array<double, 3> mean_lab{};
  double centroid_x = 0;
  double centroid_y = 0;
  BoundingBox bbox;
};

/// Over-segmentation of one frame. `labels` holds dense ids 0..n-1 in
/// raster order of each superpixel's first pixel.
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Superpixel> superpixels;

  int label_at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// SLIC over (L,a,b,x,y) with grid seeding at spacing S = sqrt(N/K) and
/// distance sqrt(d_lab^2 + (m d_xy / S)^2), followed by 4-connectivity
/// enforcement. Fragments below a quarter of the mean superpixel size are
/// merged into the closest adjacent segment. If the count still falls
/// outside 0.7K..1.3K, smallest segments are merged or largest split.
SuperpixelMap slic_segment(const LabImage& img, const SlicConfig& cfg);

/// Per-id statistics; ids with no pixels are omitted. Result is sorted by id.
std::vector<Superpixel> superpixel_stats(const LabImage& img, const std::vector<int>& labels);

}  // namespace yieldest
