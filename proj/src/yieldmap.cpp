#include "yieldest/yieldmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "yieldest/count.hpp"
#include "yieldest/errors.hpp"

namespace yieldest {

const char* to_string(Side side) {
  switch (side) {
    case Side::Front: return "front";
    case Side::Back: return "back";
    case Side::Single: return "single";
  }
  return "single";
}

Side side_from_string(const std::string& s) {
  if (s == "front") return Side::Front;
  if (s == "back") return Side::Back;
  if (s == "single") return Side::Single;
  throw ValidationError("unknown side '" + s + "' (expected front|back|single)");
}

double Extent3::volume() const {
  double v = 1;
  for (int i = 0; i < 3; ++i) v *= std::max(0.0, max[i] - min[i]);
  return v;
}

double intersection_volume(const Extent3& a, const Extent3& b) {
  double v = 1;
  for (int i = 0; i < 3; ++i) v *= std::max(0.0, std::min(a.max[i], b.max[i]) - std::max(a.min[i], b.min[i]));
  return v;
}

void SideModel::validate() const {
  std::set<std::string> ids;
  for (const auto& t : tracks) {
    if (!ids.insert(t.id).second) throw ValidationError("duplicate cluster id '" + t.id + "' within a side");
    if (t.observations.empty()) throw ValidationError("cluster '" + t.id + "' has no observations");
  }
}

int aggregate_track_count(const ClusterTrack& track, const ObservationCounter& counter) {
  if (track.observations.empty()) throw ValidationError("cluster '" + track.id + "' has no observations");
  std::vector<const TrackObservation*> obs;
  for (const auto& o : track.observations) obs.push_back(&o);
  std::sort(obs.begin(), obs.end(), [](const TrackObservation* a, const TrackObservation* b) {
    if (a->area != b->area) return a->area > b->area;
    return a->frame_id < b->frame_id;
  });
  const std::size_t used = std::min<std::size_t>(3, obs.size());
  std::vector<int> counts;
  for (std::size_t i = 0; i < used; ++i) counts.push_back(std::clamp(counter(*obs[i]), 0, kMaxClusterCount));
  std::sort(counts.begin(), counts.end());
  return counts[(counts.size() - 1) / 2];
}

int embedded_count(const TrackObservation& obs) {
  if (!obs.count) throw ValidationError("observation in frame '" + obs.frame_id + "' has no count");
  return *obs.count;
}

void resolve_counts(SideModel& side, const ObservationCounter& counter) {
  for (auto& t : side.tracks) t.count = aggregate_track_count(t, counter);
}

std::vector<ClusterTrack> filter_ground_and_background(std::vector<ClusterTrack> tracks) {
  std::erase_if(tracks, [](const ClusterTrack& t) { return t.on_ground || t.background; });
  return tracks;
}

SideModel filter_ground_and_background(SideModel side) {
  side.tracks = filter_ground_and_background(std::move(side.tracks));
  return side;
}

std::vector<OverlapRecord> drop_flagged_overlaps(const SideModel& front, const SideModel& back,
                                                 std::vector<OverlapRecord> overlaps) {
  std::set<std::string> flagged_front, flagged_back;
  for (const auto& t : front.tracks) {
    if (t.on_ground || t.background) flagged_front.insert(t.id);
  }
  for (const auto& t : back.tracks) {
    if (t.on_ground || t.background) flagged_back.insert(t.id);
  }
  std::erase_if(overlaps, [&](const OverlapRecord& o) {
    return flagged_front.contains(o.front_id) || flagged_back.contains(o.back_id);
  });
  return overlaps;
}

long side_sum(const SideModel& side) {
  long total = 0;
  for (const auto& t : side.tracks) {
    if (!t.count) throw ValidationError("cluster '" + t.id + "' has no resolved count");
    total += *t.count;
  }
  return total;
}

long sum_single_sides(const SideModel& front, const SideModel& back) { return side_sum(front) + side_sum(back); }

long merge_sides(const SideModel& front, const SideModel& back, const std::vector<OverlapRecord>& overlaps) {
  const long front_total = side_sum(front);
  const long back_total = side_sum(back);

  // Nodes: front tracks [0, nf), back tracks [nf, nf + nb).
  const int nf = static_cast<int>(front.tracks.size());
  const int nb = static_cast<int>(back.tracks.size());
  std::map<std::string, int> front_index, back_index;
  for (int i = 0; i < nf; ++i) front_index[front.tracks[i].id] = i;
  for (int i = 0; i < nb; ++i) back_index[back.tracks[i].id] = nf + i;

  std::vector<int> parent(nf + nb);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };

  std::vector<std::pair<int, double>> edges;  // (front node, volume)
  for (const auto& o : overlaps) {
    const auto f = front_index.find(o.front_id);
    const auto b = back_index.find(o.back_id);
    if (f == front_index.end()) throw ReferenceError("overlap references unknown front cluster '" + o.front_id + "'");
    if (b == back_index.end()) throw ReferenceError("overlap references unknown back cluster '" + o.back_id + "'");
    if (!(o.volume >= 0)) throw ValidationError("overlap volume must be >= 0");
    parent[find(f->second)] = find(b->second);
    edges.emplace_back(f->second, o.volume);
  }

  struct Group {
    long front_count = 0, back_count = 0;
    double front_volume = 0, back_volume = 0, intersection = 0;
    bool has_edge = false;
  };
  std::map<int, Group> groups;
  for (int i = 0; i < nf + nb; ++i) {
    Group& g = groups[find(i)];
    const ClusterTrack& t = i < nf ? front.tracks[i] : back.tracks[i - nf];
    if (i < nf) {
      g.front_count += *t.count;
      g.front_volume += t.extent.volume();
    } else {
      g.back_count += *t.count;
      g.back_volume += t.extent.volume();
    }
  }
  for (const auto& [node, volume] : edges) {
    Group& g = groups[find(node)];
    g.intersection += volume;
    g.has_edge = true;
  }

  long deduction = 0;
  for (const auto& [root, g] : groups) {
    if (!g.has_edge) continue;
    const double smaller = std::min(g.front_volume, g.back_volume);
    const double fraction = smaller > 0 ? std::clamp(g.intersection / smaller, 0.0, 1.0) : 0.0;
    const double weighted = static_cast<double>(std::min(g.front_count, g.back_count)) * fraction;
    deduction += static_cast<long>(std::floor(weighted + 0.5));
  }
  const long merged = front_total + back_total - deduction;
  return std::clamp(merged, std::max(front_total, back_total), front_total + back_total);
}

double yield_accuracy(long estimated, long harvested) {
  if (harvested == 0) throw DivisionError("harvested count is zero");
  if (harvested < 0) throw ValidationError("harvested count must be >= 1");
  return static_cast<double>(estimated) / static_cast<double>(harvested) * 100.0;
}

std::string format_percent(double pct) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", pct);
  return buf;
}

std::optional<double> YieldReport::merged_accuracy() const {
  if (!harvested) return std::nullopt;
  return yield_accuracy(merged_total, *harvested);
}

std::optional<double> YieldReport::single_side_accuracy() const {
  if (!harvested) return std::nullopt;
  return yield_accuracy(single_side_sum(), *harvested);
}

YieldReport make_yield_report(std::string dataset_id, std::string method, const SideModel& front,
                              const SideModel& back, const std::vector<OverlapRecord>& overlaps,
                              std::optional<long> harvested) {
  YieldReport r;
  r.dataset_id = std::move(dataset_id);
  r.method = std::move(method);
  r.front_sum = side_sum(front);
  r.back_sum = side_sum(back);
  r.merged_total = merge_sides(front, back, overlaps);
  r.harvested = harvested;
  return r;
}

std::string render_yield_table(const std::vector<YieldReport>& reports) {
  auto cell = [](long value, const std::optional<double>& pct) {
    std::string s = std::to_string(value);
    if (pct) s += " (" + format_percent(*pct) + ")";
    return s;
  };
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Dataset", "Method", "Harvested FCs", "Merged FCs from both sides", "Sum of FCs from single sides"});
  for (const auto& r : reports) {
    rows.push_back({r.dataset_id, r.method, r.harvested ? std::to_string(*r.harvested) : "-",
                    cell(r.merged_total, r.merged_accuracy()), cell(r.single_side_sum(), r.single_side_accuracy())});
  }
  std::array<std::size_t, 5> widths{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 5; ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  auto rule = [&] {
    out << '+';
    for (const auto w : widths) out << std::string(w + 2, '-') << '+';
    out << '\n';
  };
  rule();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << '|';
    for (std::size_t c = 0; c < 5; ++c) out << ' ' << rows[r][c] << std::string(widths[c] - rows[r][c].size(), ' ') << " |";
    out << '\n';
    if (r == 0) rule();
  }
  rule();
  return out.str();
}

}  // namespace yieldest
