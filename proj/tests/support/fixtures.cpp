#include "fixtures.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "yieldest/data_io.hpp"
#include "yieldest/png_io.hpp"

namespace fixtures {

using namespace yieldest;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

RgbImage flat_image(int w, int h, std::array<std::uint8_t, 3> rgb) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.set(x, y, rgb);
  }
  return img;
}

DiscPatch disc_patch(int k, std::uint64_t seed, double rmin, double rmax, double separation, int origin_x, int origin_y) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const double r = rmin + (rmax - rmin) * u(rng);
  const double sep = separation * 2 * r;
  std::vector<std::array<double, 2>> c;
  for (int tries = 0; static_cast<int>(c.size()) < k; ++tries) {
    if (tries > 100000) throw std::runtime_error("disc placement failed");
    if (tries % 2000 == 1999) c.clear();  // stuck: start the layout over
    const double x = u(rng) * sep * 3, y = u(rng) * sep * 2;
    bool ok = true;
    for (const auto& p : c) ok = ok && std::hypot(p[0] - x, p[1] - y) >= sep;
    if (ok) c.push_back({x, y});
  }
  const int w = static_cast<int>(sep * 3 + 2 * r + 4), h = static_cast<int>(sep * 2 + 2 * r + 4);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const auto& p : c) {
        if (std::hypot(x - (p[0] + r + 2), y - (p[1] + r + 2)) <= r) m.set(x, y, true);
      }
    }
  }
  DiscPatch out{{"patch", {origin_x, origin_y, w, h}, m}, {}, r};
  for (const auto& p : c) out.centers.push_back({p[0] + r + 2 + origin_x, p[1] + r + 2 + origin_y});
  return out;
}

std::vector<ScriptedClick> supervise(const SupervisionSession& session, const std::vector<BinaryMask>& truth, int max_clicks) {
  std::vector<ScriptedClick> clicks;
  std::set<int> decided;
  const auto ids = session.frame_ids();
  for (std::size_t fi = 0; fi < truth.size() && static_cast<int>(clicks.size()) < max_clicks; ++fi) {
    const BinaryMask& m = truth[fi];
    const auto& sp = session.superpixels(static_cast<int>(fi));
    const auto& assignment = session.assignment(static_cast<int>(fi));
    for (int y = 0; y < m.height() && static_cast<int>(clicks.size()) < max_clicks; y += 3) {
      for (int x = 0; x < m.width() && static_cast<int>(clicks.size()) < max_clicks; x += 3) {
        if (!m.get(x, y)) continue;
        const int comp = assignment[sp.map.label_at(x, y)];
        if (decided.contains(comp)) continue;
        decided.insert(comp);
        long inside = 0, total = 0;
        for (long p = 0; p < static_cast<long>(sp.map.labels.size()); ++p) {
          if (assignment[sp.map.labels[p]] != comp) continue;
          ++total;
          if (m.get(p)) ++inside;
        }
        clicks.push_back({ids[fi], x, y, 2 * inside > total ? ColorLabel::Apple : ColorLabel::Background});
      }
    }
  }
  return clicks;
}

SimDataset write_sim_dataset(const std::filesystem::path& dir, const std::string& dataset_id, std::uint64_t seed,
                             int fruits) {
  SceneParams p;
  p.trees = 1;
  p.fruits_per_tree = fruits;
  SimDataset out{dir / (dataset_id + ".manifest.json"), simulate_scene(seed, p)};
  std::filesystem::create_directories(dir / "frames");
  DatasetManifest m;
  m.dataset_id = dataset_id;
  for (const auto& f : out.scene.frames) {
    const auto path = dir / "frames" / (f.id + ".png");
    write_png_rgb(path, f.image);
    m.frames.push_back({f.id, path});
  }
  m.harvested_count = out.scene.truth;
  save_manifest(m, out.manifest);
  return out;
}

DetectConfig small_detect_config() {
  DetectConfig cfg;
  cfg.slic.target_count = 600;
  cfg.components = 12;
  return cfg;
}

}  // namespace fixtures
