#include "yieldest/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

struct Center {
  double l, a, b, x, y;
};

double gradient_at(const LabImage& img, int x, int y) {
  const int w = img.width(), h = img.height();
  const double* xm = img.at(std::max(x - 1, 0), y);
  const double* xp = img.at(std::min(x + 1, w - 1), y);
  const double* ym = img.at(x, std::max(y - 1, 0));
  const double* yp = img.at(x, std::min(y + 1, h - 1));
  double g = 0;
  for (int c = 0; c < 3; ++c) {
    g += (xp[c] - xm[c]) * (xp[c] - xm[c]);
    g += (yp[c] - ym[c]) * (yp[c] - ym[c]);
  }
  return g;
}

std::vector<Center> seed_centers(const LabImage& img, const SlicConfig& cfg, double step) {
  const int w = img.width(), h = img.height();
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  const double sx = static_cast<double>(w) / nx;
  const double sy = static_cast<double>(h) / ny;

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cx = std::min(w - 1, static_cast<int>((i + 0.5) * sx));
      int cy = std::min(h - 1, static_cast<int>((j + 0.5) * sy));
      if (cfg.seed_perturbation) {
        double best = gradient_at(img, cx, cy);
        const int ox = cx, oy = cy;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = ox + dx, py = oy + dy;
            if (px < 0 || py < 0 || px >= w || py >= h) continue;
            const double g = gradient_at(img, px, py);
            if (g < best) {
              best = g;
              cx = px;
              cy = py;
            }
          }
        }
      }
      const double* p = img.at(cx, cy);
      centers.push_back({p[0], p[1], p[2], static_cast<double>(cx), static_cast<double>(cy)});
    }
  }
  return centers;
}

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }
  void attach(int child, int root) { parent_[find(child)] = find(root); }

 private:
  std::vector<int> parent_;
};

struct Fragment {
  long size = 0;
  double sum[5] = {0, 0, 0, 0, 0};
  double mean(int c) const { return sum[c] / static_cast<double>(size); }
};

// Relabels `labels` so every segment is 4-connected. Returns dense labels.
std::vector<int> enforce_connectivity(const LabImage& img, const std::vector<int>& labels, long min_size,
                                      double spatial_weight) {
  const int w = img.width(), h = img.height();
  const long n = img.pixel_count();

  std::vector<int> frag(n, -1);
  std::vector<Fragment> frags;
  std::vector<long> stack;
  for (long s = 0; s < n; ++s) {
    if (frag[s] >= 0) continue;
    const int id = static_cast<int>(frags.size());
    Fragment f;
    frag[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const long p = stack.back();
      stack.pop_back();
      const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
      const double* lab = img.at(p);
      ++f.size;
      f.sum[0] += lab[0];
      f.sum[1] += lab[1];
      f.sum[2] += lab[2];
      f.sum[3] += px;
      f.sum[4] += py;
      const long nbrs[4] = {px > 0 ? p - 1 : -1, px + 1 < w ? p + 1 : -1, py > 0 ? p - w : -1,
                            py + 1 < h ? p + w : -1};
      for (const long q : nbrs) {
        if (q >= 0 && frag[q] < 0 && labels[q] == labels[s]) {
          frag[q] = id;
          stack.push_back(q);
        }
      }
    }
    frags.push_back(f);
  }

  const int nf = static_cast<int>(frags.size());
  std::vector<std::vector<int>> adjacency(nf);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long p = static_cast<long>(y) * w + x;
      if (x + 1 < w && frag[p] != frag[p + 1]) {
        adjacency[frag[p]].push_back(frag[p + 1]);
        adjacency[frag[p + 1]].push_back(frag[p]);
      }
      if (y + 1 < h && frag[p] != frag[p + w]) {
        adjacency[frag[p]].push_back(frag[p + w]);
        adjacency[frag[p + w]].push_back(frag[p]);
      }
    }
  }
  for (auto& adj : adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }

  UnionFind uf(nf);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int f = 0; f < nf; ++f) {
      if (uf.find(f) != f || frags[f].size >= min_size) continue;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (const int raw : adjacency[f]) {
        const int g = uf.find(raw);
        if (g == f) continue;
        double d = 0;
        for (int c = 0; c < 3; ++c) d += (frags[f].mean(c) - frags[g].mean(c)) * (frags[f].mean(c) - frags[g].mean(c));
        double dxy = 0;
        for (int c = 3; c < 5; ++c) dxy += (frags[f].mean(c) - frags[g].mean(c)) * (frags[f].mean(c) - frags[g].mean(c));
        d += spatial_weight * dxy;
        if (d < best_d || (d == best_d && g < best)) {
          best_d = d;
          best = g;
        }
      }
      if (best < 0) continue;
      uf.attach(f, best);
      frags[best].size += frags[f].size;
      for (int c = 0; c < 5; ++c) frags[best].sum[c] += frags[f].sum[c];
      auto& dst = adjacency[best];
      for (const int raw : adjacency[f]) dst.push_back(raw);
      std::sort(dst.begin(), dst.end());
      dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
      adjacency[f].clear();
      changed = true;
    }
  }

  std::vector<int> dense(nf, -1);
  std::vector<int> out(n);
  int next = 0;
  for (long p = 0; p < n; ++p) {
    const int root = uf.find(frag[p]);
    if (dense[root] < 0) dense[root] = next++;
    out[p] = dense[root];
  }
  return out;
}

struct Segments {
  std::vector<Fragment> stats;
  std::vector<std::vector<int>> adjacency;
};

Segments describe(const LabImage& img, const std::vector<int>& labels, int count) {
  const int w = img.width(), h = img.height();
  Segments seg;
  seg.stats.resize(count);
  seg.adjacency.resize(count);
  for (long p = 0; p < img.pixel_count(); ++p) {
    Fragment& f = seg.stats[labels[p]];
    const double* lab = img.at(p);
    ++f.size;
    f.sum[0] += lab[0];
    f.sum[1] += lab[1];
    f.sum[2] += lab[2];
    f.sum[3] += static_cast<double>(p % w);
    f.sum[4] += static_cast<double>(p / w);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long p = static_cast<long>(y) * w + x;
      const int a = labels[p];
      if (x + 1 < w && labels[p + 1] != a) {
        seg.adjacency[a].push_back(labels[p + 1]);
        seg.adjacency[labels[p + 1]].push_back(a);
      }
      if (y + 1 < h && labels[p + w] != a) {
        seg.adjacency[a].push_back(labels[p + w]);
        seg.adjacency[labels[p + w]].push_back(a);
      }
    }
  }
  for (auto& adj : seg.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  return seg;
}

// Renumbers labels densely in raster order of first appearance.
int densify(std::vector<int>& labels) {
  std::vector<int> dense;
  int next = 0;
  for (int& l : labels) {
    if (l >= static_cast<int>(dense.size())) dense.resize(l + 1, -1);
    if (dense[l] < 0) dense[l] = next++;
    l = dense[l];
  }
  return next;
}

// Smallest segment joins its nearest neighbour in the SLIC metric.
void merge_smallest(const LabImage& img, std::vector<int>& labels, int count, double spatial_weight) {
  const Segments seg = describe(img, labels, count);
  int f = 0;
  for (int i = 1; i < count; ++i) {
    if (seg.stats[i].size < seg.stats[f].size) f = i;
  }
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const int g : seg.adjacency[f]) {
    double d = 0;
    for (int c = 0; c < 5; ++c) {
      const double diff = seg.stats[f].mean(c) - seg.stats[g].mean(c);
      d += (c < 3 ? 1.0 : spatial_weight) * diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = g;
    }
  }
  if (best < 0) return;
  for (int& l : labels) {
    if (l == f) l = best;
  }
}

// Largest segment is cut in two 4-connected parts: a breadth-first prefix of
// half its size grown from its first pixel, and the largest component of the
// rest. Other leftover pieces touch the prefix and rejoin it.
void split_largest(const LabImage& img, std::vector<int>& labels, int count) {
  const int w = img.width(), h = img.height();
  const long n = img.pixel_count();
  std::vector<long> size(count, 0);
  for (const int l : labels) ++size[l];
  int f = 0;
  for (int i = 1; i < count; ++i) {
    if (size[i] > size[f]) f = i;
  }
  if (size[f] < 2) return;
  const long start = std::find(labels.begin(), labels.end(), f) - labels.begin();
  const int fresh = count;
  const int rest = count + 1;
  for (int& l : labels) {
    if (l == f) l = rest;
  }
  auto neighbours = [&](long p, auto&& visit) {
    const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
    if (px > 0) visit(p - 1);
    if (px + 1 < w) visit(p + 1);
    if (py > 0) visit(p - w);
    if (py + 1 < h) visit(p + w);
  };
  std::vector<long> queue{start};
  labels[start] = f;
  for (std::size_t head = 0; head < queue.size() && static_cast<long>(queue.size()) < size[f] / 2; ++head) {
    neighbours(queue[head], [&](long q) {
      if (labels[q] == rest && static_cast<long>(queue.size()) < size[f] / 2) {
        labels[q] = f;
        queue.push_back(q);
      }
    });
  }
  // Components of the remainder.
  std::vector<std::vector<long>> pieces;
  for (long s = 0; s < n; ++s) {
    if (labels[s] != rest) continue;
    std::vector<long> piece{s};
    labels[s] = fresh;
    for (std::size_t head = 0; head < piece.size(); ++head) {
      neighbours(piece[head], [&](long q) {
        if (labels[q] == rest) {
          labels[q] = fresh;
          piece.push_back(q);
        }
      });
    }
    pieces.push_back(std::move(piece));
  }
  std::size_t keep = 0;
  for (std::size_t i = 1; i < pieces.size(); ++i) {
    if (pieces[i].size() > pieces[keep].size()) keep = i;
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i == keep) continue;
    for (const long p : pieces[i]) labels[p] = f;
  }
}

// Brings the segment count inside [0.7, 1.3] x target.
void rebalance_count(const LabImage& img, std::vector<int>& labels, int target, double spatial_weight) {
  const int lo = static_cast<int>(std::ceil(0.7 * target - 1e-9));
  const int hi = std::max(lo, static_cast<int>(std::floor(1.3 * target + 1e-9)));
  int count = densify(labels);
  while (count > hi) {
    merge_smallest(img, labels, count, spatial_weight);
    const int next = densify(labels);
    if (next == count) break;
    count = next;
  }
  while (count < lo) {
    split_largest(img, labels, count);
    const int next = densify(labels);
    if (next == count) break;
    count = next;
  }
}

}  // namespace

void SlicConfig::validate() const {
  if (target_count < 1) throw InvalidConfigError("slic target_count must be >= 1");
  if (!(compactness > 0)) throw InvalidConfigError("slic compactness must be > 0");
  if (iterations < 1) throw InvalidConfigError("slic iterations must be >= 1");
}

SuperpixelMap slic_segment(const LabImage& img, const SlicConfig& cfg) {
  cfg.validate();
  const long n = img.pixel_count();
  if (cfg.target_count > n) {
    throw InvalidConfigError("slic target_count " + std::to_string(cfg.target_count) + " exceeds pixel count " +
                             std::to_string(n));
  }
  const int w = img.width(), h = img.height();
  const double step = std::sqrt(static_cast<double>(n) / cfg.target_count);
  std::vector<Center> centers = seed_centers(img, cfg, step);
  const int nc = static_cast<int>(centers.size());
  const double spatial_weight = (cfg.compactness / step) * (cfg.compactness / step);
  const double grid_x = static_cast<double>(w) / std::max(1L, std::lround(w / step));
  const double grid_y = static_cast<double>(h) / std::max(1L, std::lround(h / step));
  const int radius = std::max(1, static_cast<int>(std::ceil(std::max({step, grid_x, grid_y}))));

  std::vector<int> labels(n, -1);
  std::vector<double> dist(n);
  std::vector<double> acc(static_cast<std::size_t>(nc) * 6);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < nc; ++k) {
      const Center& c = centers[k];
      const int x0 = std::max(0, static_cast<int>(c.x) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(c.x) + radius);
      const int y0 = std::max(0, static_cast<int>(c.y) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(c.y) + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const long p = static_cast<long>(y) * w + x;
          const double* lab = img.at(p);
          const double dl = lab[0] - c.l, da = lab[1] - c.a, db = lab[2] - c.b;
          const double dx = x - c.x, dy = y - c.y;
          const double d = dl * dl + da * da + db * db + spatial_weight * (dx * dx + dy * dy);
          if (d < dist[p]) {
            dist[p] = d;
            labels[p] = k;
          }
        }
      }
    }

    // Pixels outside every search window fall back to the spatially nearest center.
    for (long p = 0; p < n; ++p) {
      if (labels[p] >= 0) continue;
      const double px = static_cast<double>(p % w), py = static_cast<double>(p / w);
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < nc; ++k) {
        const double d = (px - centers[k].x) * (px - centers[k].x) + (py - centers[k].y) * (py - centers[k].y);
        if (d < best) {
          best = d;
          labels[p] = k;
        }
      }
    }

    std::fill(acc.begin(), acc.end(), 0.0);
    for (long p = 0; p < n; ++p) {
      double* a = &acc[static_cast<std::size_t>(labels[p]) * 6];
      const double* lab = img.at(p);
      a[0] += lab[0];
      a[1] += lab[1];
      a[2] += lab[2];
      a[3] += static_cast<double>(p % w);
      a[4] += static_cast<double>(p / w);
      a[5] += 1;
    }
    for (int k = 0; k < nc; ++k) {
      const double* a = &acc[static_cast<std::size_t>(k) * 6];
      if (a[5] == 0) continue;
      centers[k] = {a[0] / a[5], a[1] / a[5], a[2] / a[5], a[3] / a[5], a[4] / a[5]};
    }
  }

  const long min_size = std::max(1L, static_cast<long>(static_cast<double>(n) / nc / 4.0));
  SuperpixelMap out;
  out.width = w;
  out.height = h;
  out.labels = enforce_connectivity(img, labels, min_size, spatial_weight);
  rebalance_count(img, out.labels, cfg.target_count, spatial_weight);
  out.superpixels = superpixel_stats(img, out.labels);
  return out;
}

std::vector<Superpixel> superpixel_stats(const LabImage& img, const std::vector<int>& labels) {
  if (static_cast<long>(labels.size()) != img.pixel_count()) {
    throw ValidationError("label raster does not cover the image");
  }
  const int w = img.width();
  int max_id = -1;
  for (const int l : labels) {
    if (l < 0) throw ValidationError("negative superpixel label");
    max_id = std::max(max_id, l);
  }
  struct Acc {
    long count = 0;
    double l = 0, a = 0, b = 0, x = 0, y = 0;
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  };
  std::vector<Acc> accs(static_cast<std::size_t>(max_id + 1));
  for (long p = 0; p < static_cast<long>(labels.size()); ++p) {
    Acc& a = accs[labels[p]];
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    const double* lab = img.at(p);
    ++a.count;
    a.l += lab[0];
    a.a += lab[1];
    a.b += lab[2];
    a.x += x;
    a.y += y;
    a.x0 = std::min(a.x0, x);
    a.y0 = std::min(a.y0, y);
    a.x1 = std::max(a.x1, x);
    a.y1 = std::max(a.y1, y);
  }
  std::vector<Superpixel> out;
  for (int id = 0; id <= max_id; ++id) {
    const Acc& a = accs[id];
    if (a.count == 0) continue;
    const double c = static_cast<double>(a.count);
    Superpixel sp;
    sp.id = id;
    sp.pixel_count = a.count;
    sp.mean_lab = {a.l / c, a.a / c, a.b / c};
    sp.centroid_x = a.x / c;
    sp.centroid_y = a.y / c;
    sp.bbox = {a.x0, a.y0, a.x1 - a.x0 + 1, a.y1 - a.y0 + 1};
    out.push_back(sp);
  }
  return out;
}

}  // namespace yieldest
