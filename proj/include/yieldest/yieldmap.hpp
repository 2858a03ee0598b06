#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"

namespace yieldest {

enum class Side { Front, Back, Single };

const char* to_string(Side side);
Side side_from_string(const std::string& s);

/// Axis-aligned box in scene units.
struct Extent3 {
  std::array<double, 3> min{0, 0, 0};
  std::array<double, 3> max{0, 0, 0};

  double volume() const;
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

double intersection_volume(const Extent3& a, const Extent3& b);

struct TrackObservation {
  std::string frame_id;
  long area = 0;                     // segmented apple pixels
  std::optional<BoundingBox> roi;    // reprojected cluster outline, frame coords
  std::optional<int> count;          // pre-resolved count, if any

  friend bool operator==(const TrackObservation&, const TrackObservation&) = default;
};

struct ClusterTrack {
  std::string id;
  std::vector<TrackObservation> observations;
  Extent3 extent;
  bool on_ground = false;
  bool background = false;
  std::optional<int> count;  // resolved fruit count

  friend bool operator==(const ClusterTrack&, const ClusterTrack&) = default;
};

struct SideModel {
  Side side = Side::Front;
  std::vector<ClusterTrack> tracks;

  void validate() const;
  friend bool operator==(const SideModel&, const SideModel&) = default;
};

struct OverlapRecord {
  std::string front_id;
  std::string back_id;
  double volume = 0;

  friend bool operator==(const OverlapRecord&, const OverlapRecord&) = default;
};

using ObservationCounter = std::function<int(const TrackObservation&)>;

/// Median count of the (up to) three observations with the most apple
/// pixels; ties prefer the earlier frame id. With two observations the lower
/// count is returned. Counts are clipped to [0, 6].
int aggregate_track_count(const ClusterTrack& track, const ObservationCounter& counter);

/// Counter that returns each observation's pre-resolved count.
int embedded_count(const TrackObservation& obs);

/// Fill every track's count with aggregate_track_count.
void resolve_counts(SideModel& side, const ObservationCounter& counter);

std::vector<ClusterTrack> filter_ground_and_background(std::vector<ClusterTrack> tracks);
SideModel filter_ground_and_background(SideModel side);
/// Drop overlap records that point at flagged tracks of either side.
std::vector<OverlapRecord> drop_flagged_overlaps(const SideModel& front, const SideModel& back,
                                                 std::vector<OverlapRecord> overlaps);

long side_sum(const SideModel& side);
long sum_single_sides(const SideModel& front, const SideModel& back);

/// Inclusion-exclusion merge. Overlap records are grouped into connected
/// components of the front/back intersection graph. Each group subtracts
/// round_half_up(min(front count, back count) * intersection / smaller group
/// volume); the total is clamped to [max(front, back), front + back].
long merge_sides(const SideModel& front, const SideModel& back, const std::vector<OverlapRecord>& overlaps);

/// estimated / harvested * 100. Throws DivisionError for harvested == 0.
double yield_accuracy(long estimated, long harvested);
/// Two-decimal rendering, e.g. "94.81%".
std::string format_percent(double pct);

struct YieldReport {
  std::string dataset_id;
  std::string method;  // counting method label, e.g. "GMM"
  long front_sum = 0;
  long back_sum = 0;
  long merged_total = 0;
  std::optional<long> harvested;

  long single_side_sum() const { return front_sum + back_sum; }
  std::optional<double> merged_accuracy() const;
  std::optional<double> single_side_accuracy() const;
};

YieldReport make_yield_report(std::string dataset_id, std::string method, const SideModel& front,
                              const SideModel& back, const std::vector<OverlapRecord>& overlaps,
                              std::optional<long> harvested);

/// Text table in the layout of the harvested / merged / single-side summary.
std::string render_yield_table(const std::vector<YieldReport>& reports);

}  // namespace yieldest
