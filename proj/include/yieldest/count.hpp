#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"
#include "yieldest/mixture.hpp"

namespace yieldest {

inline constexpr int kMaxClusterCount = 6;

/// Segmented apple pixels of one cluster region of interest.
struct ClusterPatch {
  std::string frame_id;
  BoundingBox bbox;  // frame coordinates
  BinaryMask mask;   // bbox-sized

  static ClusterPatch from_frame_mask(std::string frame_id, const BinaryMask& frame_mask, const BoundingBox& roi);

  long foreground() const { return mask.width() == 0 ? 0 : mask.count(); }
  /// Foreground pixel coordinates in frame space, one (x, y) row each.
  PointSet coordinates() const;
};

struct CountConfig {
  int min_count_area = 30;
  int max_count = kMaxClusterCount;
  int restarts = 3;
  /// Adjacent pixels are strongly correlated; BIC counts every
  /// `pixels_per_sample` foreground pixels as one observation (log-likelihood
  /// scaled by 1/s, sample size n/s). 1 gives plain per-pixel BIC.
  double pixels_per_sample = 10.0;
  EmConfig em;

  void validate() const;
};

struct CountResult {
  int count = 0;
  std::vector<Gaussian> fruit_models;  // frame coordinates, one per fruit
  std::map<int, double> bic_scores;    // candidate k -> BIC
};

/// Fits 2-D mixtures with k = 1..max_count over the patch's foreground pixel
/// coordinates and keeps the k with the lowest BIC (ties go to the smaller k).
/// Patches below min_count_area count 0.
CountResult count_cluster(const ClusterPatch& patch, const CountConfig& cfg = {});

/// Key of a cluster in an external counts file: (side, cluster id). An empty
/// side matches a cluster id on any side.
struct ClusterKey {
  std::string side;
  std::string cluster_id;
  auto operator<=>(const ClusterKey&) const = default;
};

/// JSON lines {"cluster_id": ..., "count": 0..6, "side"?: ...}. Every id must
/// exist in `known`; counts outside [0,6] are a ValidationError.
std::map<ClusterKey, int> ingest_external_counts(const std::filesystem::path& file, const std::set<ClusterKey>& known);
std::map<ClusterKey, int> ingest_external_counts(std::istream& in, const std::set<ClusterKey>& known,
                                                 const std::string& source = "<stream>");

nlohmann::json to_json(const CountResult& r);

}  // namespace yieldest
