#include "yieldest/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

constexpr double kFruitRadius = 0.04;  // scene units
constexpr double kTreeSpacing = 3.0;
constexpr std::array<double, 6> kClusterSizeWeights = {0.35, 0.25, 0.17, 0.11, 0.07, 0.05};

using Rgb = std::array<std::uint8_t, 3>;
constexpr Rgb kLeaf = {62, 122, 44};
constexpr Rgb kLeafDark = {34, 84, 30};
constexpr Rgb kBranch = {104, 74, 46};
constexpr Rgb kApple = {186, 32, 38};

struct Fruit {
  std::array<double, 3> pos{};
  double slot_x = 0;  // layout offset in fruit radii
  double slot_y = 0;
};

struct Cluster {
  std::vector<Fruit> fruits;
  std::vector<bool> seen_front;
  std::vector<bool> seen_back;
};

// Offsets (in units of the slot spacing) of up to six fruits in a cluster.
constexpr std::array<std::array<double, 2>, 6> kSlots = {{{-1, -0.5}, {0, -0.5}, {1, -0.5}, {-1, 0.5}, {0, 0.5}, {1, 0.5}}};

Extent3 sphere_bounds(const std::vector<const Fruit*>& fruits) {
  Extent3 e;
  for (int i = 0; i < 3; ++i) {
    e.min[i] = std::numeric_limits<double>::infinity();
    e.max[i] = -std::numeric_limits<double>::infinity();
  }
  for (const auto* f : fruits) {
    for (int i = 0; i < 3; ++i) {
      e.min[i] = std::min(e.min[i], f->pos[i] - kFruitRadius);
      e.max[i] = std::max(e.max[i], f->pos[i] + kFruitRadius);
    }
  }
  return e;
}

std::uint8_t noisy(std::uint8_t base, double noise) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(base + noise), 0L, 255L));
}

class Canvas {
 public:
  Canvas(int w, int h, std::mt19937_64& rng) : img(w, h), apples(w, h), rng_(rng) {}

  void fill_background() {
    std::uniform_real_distribution<double> u(0, 1);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) img.set(x, y, kLeaf);
    }
    // darker foliage blobs and a few branches
    const int blobs = img.width() * img.height() / 3000;
    for (int i = 0; i < blobs; ++i) {
      disc(u(rng_) * img.width(), u(rng_) * img.height(), 6 + 10 * u(rng_), kLeafDark, false);
    }
    const int branches = std::max(1, img.width() / 120);
    for (int i = 0; i < branches; ++i) {
      const int x0 = static_cast<int>(u(rng_) * img.width());
      const int thick = 3 + static_cast<int>(u(rng_) * 4);
      for (int y = 0; y < img.height(); ++y) {
        const int cx = x0 + static_cast<int>(6 * std::sin(y / 23.0 + i));
        for (int x = cx; x < cx + thick; ++x) {
          if (x >= 0 && x < img.width()) img.set(x, y, kBranch);
        }
      }
    }
  }

  void disc(double cx, double cy, double r, Rgb color, bool apple) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (std::hypot(x - cx, y - cy) > r) continue;
        img.set(x, y, color);
        apples.set(x, y, apple);
      }
    }
  }

  void add_noise(double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const Rgb p = img.at(x, y);
        img.set(x, y, {noisy(p[0], n(rng_)), noisy(p[1], n(rng_)), noisy(p[2], n(rng_))});
      }
    }
  }

  RgbImage img;
  BinaryMask apples;

 private:
  std::mt19937_64& rng_;
};

struct PendingObservation {
  ClusterTrack* track;
  std::size_t obs_index;
  std::vector<std::array<double, 2>> fruit_px;  // centers relative to cell center
  bool occlude_last;
};

void render_side(Side side, std::vector<PendingObservation>& pending, const SceneParams& p, std::mt19937_64& rng,
                 std::vector<SimFrame>& frames) {
  const int per_frame = p.cells_x * p.cells_y;
  const int nframes = static_cast<int>((pending.size() + per_frame - 1) / per_frame);
  std::uniform_int_distribution<int> jitter(-3, 3);
  for (int f = 0; f < nframes; ++f) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", to_string(side), f);
    Canvas canvas(p.cells_x * p.cell_size, p.cells_y * p.cell_size, rng);
    canvas.fill_background();
    SimFrame frame{id, side, RgbImage(1, 1), BinaryMask(1, 1), {}};
    for (int c = 0; c < per_frame; ++c) {
      const std::size_t idx = static_cast<std::size_t>(f) * per_frame + c;
      if (idx >= pending.size()) break;
      PendingObservation& po = pending[idx];
      const int cell_x = (c % p.cells_x) * p.cell_size;
      const int cell_y = (c / p.cells_x) * p.cell_size;
      const double cx = cell_x + p.cell_size / 2.0 + jitter(rng);
      const double cy = cell_y + p.cell_size / 2.0 + jitter(rng);
      const double r = p.fruit_radius_px;
      for (std::size_t i = 0; i < po.fruit_px.size(); ++i) {
        const double fx = cx + po.fruit_px[i][0];
        const double fy = cy + po.fruit_px[i][1];
        canvas.disc(fx, fy, r, kApple, true);
        // specular highlight, still apple-coloured
        canvas.disc(fx - r / 3, fy - r / 3, r / 3, {214, 70, 70}, true);
      }
      if (po.occlude_last && !po.fruit_px.empty()) {
        const auto& last = po.fruit_px.back();
        canvas.disc(cx + last[0], cy + last[1], r + 2, kLeafDark, false);
      }
      TrackObservation& obs = po.track->observations[po.obs_index];
      obs.frame_id = id;
      obs.roi = BoundingBox{cell_x, cell_y, p.cell_size, p.cell_size};
      const std::size_t visible = po.fruit_px.size() - (po.occlude_last && !po.fruit_px.empty() ? 1 : 0);
      for (std::size_t i = 0; i < visible; ++i) {
        const double fx = cx + po.fruit_px[i][0];
        const double fy = cy + po.fruit_px[i][1];
        const int bx = static_cast<int>(std::floor(fx - r));
        const int by = static_cast<int>(std::floor(fy - r));
        const int bx1 = static_cast<int>(std::ceil(fx + r));
        const int by1 = static_cast<int>(std::ceil(fy + r));
        frame.fruit_boxes.push_back(BoundingBox{bx, by, bx1 - bx + 1, by1 - by + 1}.clamped(canvas.img.width(), canvas.img.height()));
      }
    }
    // Areas are measured before noise so they reflect the true apple pixels.
    for (int c = 0; c < per_frame; ++c) {
      const std::size_t idx = static_cast<std::size_t>(f) * per_frame + c;
      if (idx >= pending.size()) break;
      TrackObservation& obs = pending[idx].track->observations[pending[idx].obs_index];
      obs.area = canvas.apples.crop(*obs.roi).count();
    }
    canvas.add_noise(6.0);
    frame.image = std::move(canvas.img);
    frame.apple_mask = std::move(canvas.apples);
    frames.push_back(std::move(frame));
  }
}

}  // namespace

void SceneParams::validate() const {
  if (trees < 1 || fruits_per_tree < 1) throw InvalidConfigError("scene needs trees >= 1 and fruits_per_tree >= 1");
  if (!(both_side_fraction >= 0 && both_side_fraction <= 1)) throw InvalidConfigError("both_side_fraction must be in [0,1]");
  if (!(occlusion_rate >= 0 && occlusion_rate <= 1)) throw InvalidConfigError("occlusion_rate must be in [0,1]");
  if (spurious_tracks < 0) throw InvalidConfigError("spurious_tracks must be >= 0");
  if (observations_per_track < 1) throw InvalidConfigError("observations_per_track must be >= 1");
  if (cells_x < 1 || cells_y < 1) throw InvalidConfigError("cell grid must be at least 1x1");
  if (fruit_radius_px < 2 || cell_size < 8 * fruit_radius_px) {
    throw InvalidConfigError("cell_size must be at least 8 fruit radii");
  }
}

SimulatedScene simulate_scene(std::uint64_t seed, const SceneParams& p) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::discrete_distribution<int> cluster_size(kClusterSizeWeights.begin(), kClusterSizeWeights.end());

  // Fruit positions.
  const double slot_spacing = 3.0 + 2.0 / p.fruit_radius_px;  // fruit radii; >= 1.5 diameters
  std::vector<Cluster> clusters;
  SimulatedScene scene;
  std::vector<std::array<double, 3>> centers;
  for (int t = 0; t < p.trees; ++t) {
    int remaining = p.fruits_per_tree;
    while (remaining > 0) {
      const int size = std::min(remaining, cluster_size(rng) + 1);
      remaining -= size;
      scene.truth += size;
      // Rejection-sample the center so clusters never interpenetrate.
      const std::array<double, 3> half = {(slot_spacing + 1) * kFruitRadius + 0.02,
                                          (slot_spacing / 2 + 1) * kFruitRadius + 0.02, 2 * kFruitRadius + 0.02};
      std::array<double, 3> center{};
      for (int attempt = 0;; ++attempt) {
        center = {t * kTreeSpacing + (2 * u(rng) - 1), 0.5 + 2 * u(rng), 0.6 * u(rng) - 0.3};
        bool clear = true;
        for (const auto& other : centers) {
          bool apart = false;
          for (int i = 0; i < 3; ++i) apart = apart || std::abs(other[i] - center[i]) >= 2 * half[i];
          clear = clear && apart;
        }
        if (clear || attempt > 1000) break;
      }
      centers.push_back(center);
      std::array<int, 6> order = {0, 1, 2, 3, 4, 5};
      std::shuffle(order.begin(), order.end(), rng);
      Cluster c;
      for (int i = 0; i < size; ++i) {
        Fruit f;
        f.slot_x = kSlots[order[i]][0] * slot_spacing;
        f.slot_y = kSlots[order[i]][1] * slot_spacing;
        f.pos = {center[0] + f.slot_x * kFruitRadius, center[1] + f.slot_y * kFruitRadius,
                 center[2] + 0.02 * (2 * u(rng) - 1)};
        c.fruits.push_back(f);
      }
      const double vis = u(rng);
      const bool both = vis < p.both_side_fraction;
      const bool front_only = !both && u(rng) < 0.5;
      c.seen_front.assign(size, both || front_only);
      c.seen_back.assign(size, both || !front_only);
      if (both) {
        for (int i = 0; i < size; ++i) {
          if (u(rng) < p.occlusion_rate) {
            if (u(rng) < 0.5) c.seen_front[i] = false;
            else c.seen_back[i] = false;
          }
        }
      }
      clusters.push_back(std::move(c));
    }
  }

  scene.front.side = Side::Front;
  scene.back.side = Side::Back;
  // Tracks are reserved up front so the pending pointers stay valid.
  scene.front.tracks.reserve(clusters.size() + p.spurious_tracks);
  scene.back.tracks.reserve(clusters.size() + p.spurious_tracks);
  std::vector<std::pair<std::size_t, std::vector<std::array<double, 2>>>> front_layouts, back_layouts;

  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const Cluster& c = clusters[ci];
    for (int s = 0; s < 2; ++s) {
      const auto& seen = s == 0 ? c.seen_front : c.seen_back;
      std::vector<const Fruit*> visible;
      for (std::size_t i = 0; i < c.fruits.size(); ++i) {
        if (seen[i]) visible.push_back(&c.fruits[i]);
      }
      if (visible.empty()) continue;
      SideModel& side = s == 0 ? scene.front : scene.back;
      char id[32];
      std::snprintf(id, sizeof id, "%s%04zu", s == 0 ? "F" : "B", ci);
      ClusterTrack track;
      track.id = id;
      track.extent = sphere_bounds(visible);
      const int count = static_cast<int>(visible.size());
      track.count = std::nullopt;
      std::vector<std::array<double, 2>> layout;
      for (const auto* f : visible) {
        // The back side sees the row mirrored.
        const double mx = s == 0 ? f->slot_x : -f->slot_x;
        layout.push_back({mx * p.fruit_radius_px, f->slot_y * p.fruit_radius_px});
      }
      for (int o = 0; o < p.observations_per_track; ++o) {
        const bool occlude = p.observations_per_track > 1 && o == p.observations_per_track - 1;
        TrackObservation obs;
        obs.count = occlude ? count - 1 : count;
        obs.area = static_cast<long>(std::lround(std::numbers::pi * p.fruit_radius_px * p.fruit_radius_px)) * *obs.count;
        track.observations.push_back(obs);
      }
      side.tracks.push_back(std::move(track));
      (s == 0 ? front_layouts : back_layouts).emplace_back(side.tracks.size() - 1, std::move(layout));
    }
  }
  for (const auto& ft : scene.front.tracks) {
    for (const auto& bt : scene.back.tracks) {
      const double v = intersection_volume(ft.extent, bt.extent);
      if (v > 0) scene.overlaps.push_back({ft.id, bt.id, v});
    }
  }

  // Spurious tracks: fallen fruit and fruit on trees in the next row.
  for (int i = 0; i < p.spurious_tracks; ++i) {
    SideModel& side = i % 2 == 0 ? scene.front : scene.back;
    ClusterTrack t;
    char id[32];
    std::snprintf(id, sizeof id, "%s%04d", i % 2 == 0 ? "FX" : "BX", i);
    t.id = id;
    t.on_ground = (i / 2) % 2 == 0;
    t.background = !t.on_ground;
    const double x = u(rng) * p.trees * kTreeSpacing;
    const double y = t.on_ground ? -0.05 : 1.0 + u(rng);
    const double z = t.on_ground ? 0.0 : (i % 2 == 0 ? -3.0 : 3.0);
    t.extent = {{x - 0.05, y - 0.05, z - 0.05}, {x + 0.05, y + 0.05, z + 0.05}};
    const int count = 1 + static_cast<int>(u(rng) * 3);
    for (int o = 0; o < p.observations_per_track; ++o) {
      TrackObservation obs;
      char fid[32];
      std::snprintf(fid, sizeof fid, "%s-x%02d", to_string(side.side), o);
      obs.frame_id = fid;
      obs.count = count;
      obs.area = 250L * count;
      t.observations.push_back(obs);
    }
    side.tracks.push_back(std::move(t));
  }

  if (p.render) {
    for (int s = 0; s < 2; ++s) {
      SideModel& side = s == 0 ? scene.front : scene.back;
      auto& layouts = s == 0 ? front_layouts : back_layouts;
      std::vector<PendingObservation> pending;
      for (int o = 0; o < p.observations_per_track; ++o) {
        for (auto& [ti, layout] : layouts) {
          const bool occlude = p.observations_per_track > 1 && o == p.observations_per_track - 1;
          pending.push_back({&side.tracks[ti], static_cast<std::size_t>(o), layout, occlude});
        }
      }
      render_side(side.side, pending, p, rng, scene.frames);
    }
  } else {
    for (int s = 0; s < 2; ++s) {
      SideModel& side = s == 0 ? scene.front : scene.back;
      for (auto& t : side.tracks) {
        for (std::size_t o = 0; o < t.observations.size(); ++o) {
          if (t.observations[o].frame_id.empty()) {
            char fid[32];
            std::snprintf(fid, sizeof fid, "%s-o%02zu", to_string(side.side), o);
            t.observations[o].frame_id = fid;
          }
        }
      }
    }
  }
  return scene;
}

}  // namespace yieldest
