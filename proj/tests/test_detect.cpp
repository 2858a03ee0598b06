#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "support/fixtures.hpp"
#include "yieldest/detect.hpp"
#include "yieldest/errors.hpp"
#include "yieldest/simulate.hpp"

using namespace yieldest;

namespace {

using Rgb = std::array<std::uint8_t, 3>;
const Rgb kRed{200, 30, 30};
const Rgb kGreen{40, 160, 40};
const Rgb kSky{120, 160, 220};

// 90x60 frame of three 30 px vertical stripes, aligned with the SLIC grid.
RgbImage stripes(Rgb a, Rgb b, Rgb c) {
  RgbImage img(90, 60);
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 90; ++x) img.set(x, y, x < 30 ? a : x < 60 ? b : c);
  }
  return img;
}

DetectConfig three_class_config() {
  DetectConfig cfg;
  cfg.slic.target_count = 54;
  cfg.components = 3;
  return cfg;
}

std::array<double, 3> lab_of(Rgb c) {
  const LabImage lab = rgb_to_lab(fixtures::flat_image(1, 1, c));
  return {lab.at(0L)[0], lab.at(0L)[1], lab.at(0L)[2]};
}

int nearest_component(const MixtureModel& m, Rgb c) {
  const auto lab = lab_of(c);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.size(); ++i) {
    double d = 0;
    for (int k = 0; k < 3; ++k) d += (m.component(i).mean()[k] - lab[k]) * (m.component(i).mean()[k] - lab[k]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

SupervisionSession stripe_session() {
  return SupervisionSession("stripes", {{"f0", rgb_to_lab(stripes(kRed, kGreen, kSky))}}, three_class_config());
}

BinaryMask stripe_mask(int index) {
  BinaryMask m(90, 60);
  for (int y = 0; y < 60; ++y) {
    for (int x = 30 * index; x < 30 * index + 30; ++x) m.set(x, y, true);
  }
  return m;
}

ColorModel red_model() {
  SupervisionSession s = stripe_session();
  const ClickResult r = click_to_cluster(s, "f0", 10, 30);
  label_cluster(s, r.component, ColorLabel::Apple);
  return finalize_model(s);
}

void add_blob40(BinaryMask& m, int cx, int cy) {
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      if (dx * dx + dy * dy <= 10) m.set(cx + dx, cy + dy, true);
    }
  }
  m.set(cx + 4, cy, true);
  m.set(cx - 4, cy, true);
  m.set(cx, cy + 4, true);
}

struct SimSession {
  SimulatedScene scene;
  std::vector<SessionFrame> frames;
  DetectConfig cfg;
};

SimSession sim_session() {
  SceneParams p;
  p.trees = 1;
  p.fruits_per_tree = 20;
  SimSession s{simulate_scene(5, p), {}, {}};
  s.cfg.slic.target_count = 600;
  s.cfg.components = 12;
  for (int i = 0; i < 2; ++i) s.frames.push_back({s.scene.frames[i].id, rgb_to_lab(s.scene.frames[i].image)});
  return s;
}

}  // namespace

TEST(ColorClusters, ConstantColourSingleComponent) {
  DetectConfig cfg;
  cfg.slic.target_count = 20;
  cfg.components = 1;
  const MixtureModel m = build_color_clusters({rgb_to_lab(fixtures::flat_image(40, 30, kSky))}, cfg);
  ASSERT_EQ(m.size(), 1);
  const auto lab = lab_of(kSky);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.component(0).mean()[c], lab[c], 1e-9);
}

TEST(ColorClusters, ThreeFlatColoursRecovered) {
  const std::vector<LabImage> frames{rgb_to_lab(stripes(kRed, kGreen, kSky)), rgb_to_lab(stripes(kSky, kRed, kGreen))};
  const MixtureModel m = build_color_clusters(frames, three_class_config());
  ASSERT_EQ(m.size(), 3);
  std::set<int> hit;
  for (const Rgb c : {kRed, kGreen, kSky}) {
    const int i = nearest_component(m, c);
    hit.insert(i);
    const auto lab = lab_of(c);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(m.component(i).mean()[k], lab[k], 1.0);
  }
  EXPECT_EQ(hit.size(), 3u);
  EXPECT_TRUE(build_color_clusters(frames, three_class_config()) == m);
}

TEST(ColorClusters, TooFewSuperpixels) {
  DetectConfig cfg;
  cfg.slic.target_count = 4;
  cfg.components = 25;
  EXPECT_THROW(build_color_clusters({rgb_to_lab(fixtures::flat_image(20, 20, kRed))}, cfg), InsufficientDataError);
  EXPECT_THROW(build_color_clusters({}, cfg), InsufficientDataError);
}

TEST(Click, FindsColourComponentDeterministically) {
  SupervisionSession s = stripe_session();
  const ClickResult a = click_to_cluster(s, "f0", 10, 30);
  const ClickResult b = click_to_cluster(s, "f0", 11, 31);
  EXPECT_EQ(a.component, nearest_component(s.mixture(), kRed));
  EXPECT_EQ(a.component, b.component);
  EXPECT_EQ(click_to_cluster(s, "f0", 75, 5).component, nearest_component(s.mixture(), kSky));
  ASSERT_EQ(a.highlights.size(), 1u);
  EXPECT_EQ(a.highlights[0], stripe_mask(0));
  EXPECT_EQ(s.clicks().size(), 3u);
}

TEST(Click, Errors) {
  SupervisionSession s = stripe_session();
  EXPECT_THROW(click_to_cluster(s, "f0", 90, 0), RangeError);
  EXPECT_THROW(click_to_cluster(s, "f0", -1, 0), RangeError);
  EXPECT_THROW(click_to_cluster(s, "nope", 1, 1), NotFoundError);
  EXPECT_THROW(label_cluster(s, 3, ColorLabel::Apple), NotFoundError);
  EXPECT_THROW(label_cluster(s, -1, ColorLabel::Apple), NotFoundError);
}

TEST(Click, HighlightMatchesArgmaxOracle) {
  SimSession sim = sim_session();
  SupervisionSession s("sim", sim.frames, sim.cfg);
  const MixtureModel& m = s.mixture();
  for (const auto& [x, y] : std::vector<std::pair<int, int>>{{5, 5}, {100, 100}, {200, 40}, {300, 250}}) {
    const ClickResult r = click_to_cluster(s, sim.frames[0].id, x, y);
    ASSERT_EQ(r.highlights.size(), 2u);
    for (int f = 0; f < 2; ++f) {
      const FrameSuperpixels& sp = s.superpixels(f);
      BinaryMask expect(sp.map.width, sp.map.height);
      std::vector<bool> member(sp.colors.rows());
      for (int i = 0; i < sp.colors.rows(); ++i) {
        int best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < m.size(); ++k) {
          const double v = std::log(m.weights()[k]) + m.component(k).log_pdf(sp.colors.row(i).transpose());
          if (v > best_v) {
            best_v = v;
            best = k;
          }
        }
        member[i] = best == r.component;
      }
      for (long p = 0; p < static_cast<long>(sp.map.labels.size()); ++p) expect.set(p, member[sp.map.labels[p]]);
      EXPECT_EQ(r.highlights[f], expect) << "frame " << f;
    }
  }
}

TEST(Label, LastLabelWins) {
  SupervisionSession s = stripe_session();
  label_cluster(s, 1, ColorLabel::Apple);
  label_cluster(s, 1, ColorLabel::Apple);
  EXPECT_EQ(s.labels().at(1), ColorLabel::Apple);
  label_cluster(s, 1, ColorLabel::Background);
  EXPECT_EQ(s.labels().at(1), ColorLabel::Background);
  EXPECT_THROW(finalize_model(s), EmptyModelError);
}

TEST(Finalize, PureAndSingleApple) {
  SupervisionSession s = stripe_session();
  label_cluster(s, 2, ColorLabel::Apple);
  const auto labels_before = s.labels();
  const ColorModel m = finalize_model(s);
  EXPECT_EQ(m.apple_components(), 1);
  EXPECT_EQ(m.provenance, Provenance::UserSupervised);
  EXPECT_EQ(m.labels.size(), 3u);
  EXPECT_EQ(s.labels(), labels_before);
  EXPECT_TRUE(finalize_model(s).mixture == m.mixture);
  EXPECT_EQ(finalize_model(s, Provenance::SemiSupervised).provenance, Provenance::SemiSupervised);
}

TEST(Classify, MaskCoversAppleRegionExactly) {
  const ColorModel m = red_model();
  EXPECT_EQ(classify_frame(rgb_to_lab(stripes(kRed, kGreen, kSky)), m), stripe_mask(0));
  EXPECT_EQ(classify_frame(rgb_to_lab(stripes(kGreen, kSky, kRed)), m), stripe_mask(2));
}

TEST(Classify, AllAppleSaturates) {
  SupervisionSession s = stripe_session();
  for (int k = 0; k < 3; ++k) label_cluster(s, k, ColorLabel::Apple);
  const BinaryMask mask = classify_frame(rgb_to_lab(stripes(kRed, kGreen, kSky)), finalize_model(s));
  EXPECT_EQ(mask.count(), 90L * 60);
}

TEST(Classify, ZeroThresholdGivesEmptyMask) {
  const ColorModel m = red_model();
  DetectConfig cfg = m.config;
  cfg.kl_threshold = 0;
  EXPECT_EQ(classify_frame(rgb_to_lab(stripes(kRed, kGreen, kSky)), m, cfg).count(), 0);
}

TEST(Classify, ShiftedAppleColourIsMissed) {
  const ColorModel m = red_model();
  const LabImage same = rgb_to_lab(stripes(kRed, kGreen, kSky));
  const LabImage shifted = rgb_to_lab(stripes(Rgb{230, 200, 40}, kGreen, kSky));
  EXPECT_EQ(classify_frame(same, m).count(), 30L * 60);
  EXPECT_EQ(classify_frame(shifted, m).count(), 0);
}

TEST(Classify, EmptyModelRejected) {
  ColorModel m = red_model();
  std::fill(m.labels.begin(), m.labels.end(), ColorLabel::Background);
  EXPECT_THROW(classify_frame(rgb_to_lab(stripes(kRed, kGreen, kSky)), m), EmptyModelError);
}

TEST(Classify, MaskIsUnionOfArgminKlApples) {
  SimSession sim = sim_session();
  SupervisionSession s("sim", sim.frames, sim.cfg);
  for (const auto& c : fixtures::supervise(s, {sim.scene.frames[0].apple_mask, sim.scene.frames[1].apple_mask})) {
    const ClickResult r = click_to_cluster(s, c.frame_id, c.x, c.y);
    label_cluster(s, r.component, c.label);
  }
  const ColorModel model = finalize_model(s);
  const LabImage frame = rgb_to_lab(sim.scene.frames[3].image);
  const FrameClassification fc = classify_frame_detailed(frame, model, model.config);
  std::vector<bool> apple(fc.frame_mixture.size());
  for (int i = 0; i < fc.frame_mixture.size(); ++i) {
    int best = -1;
    double best_kl = std::numeric_limits<double>::infinity();
    for (int j = 0; j < model.mixture.size(); ++j) {
      const double kl = kl_gaussian(fc.frame_mixture.component(i), model.mixture.component(j));
      if (kl < best_kl) {
        best_kl = kl;
        best = j;
      }
    }
    apple[i] = model.labels[best] == ColorLabel::Apple && best_kl < model.config.kl_threshold;
  }
  const Matrix r = responsibilities(fc.frame_mixture, fc.superpixels.colors);
  BinaryMask expect(frame.width(), frame.height());
  for (long p = 0; p < frame.pixel_count(); ++p) {
    Eigen::Index k;
    r.row(fc.superpixels.map.labels[p]).maxCoeff(&k);
    expect.set(p, apple[k]);
  }
  EXPECT_EQ(fc.mask, expect);
  EXPECT_GT(fc.mask.count(), 0);
}

TEST(Classify, AddingAppleLabelNeverShrinksMask) {
  SimSession sim = sim_session();
  SupervisionSession s("sim", sim.frames, sim.cfg);
  const LabImage frame = rgb_to_lab(sim.scene.frames[2].image);
  const ClickResult first = click_to_cluster(s, sim.frames[0].id, 0, 0);
  label_cluster(s, first.component, ColorLabel::Apple);
  BinaryMask prev = classify_frame(frame, finalize_model(s));
  for (int k = 0; k < s.mixture().size(); ++k) {
    label_cluster(s, k, ColorLabel::Apple);
    const BinaryMask next = classify_frame(frame, finalize_model(s));
    for (long p = 0; p < frame.pixel_count(); ++p) {
      if (prev.get(p)) ASSERT_TRUE(next.get(p)) << "component " << k;
    }
    prev = next;
  }
  EXPECT_EQ(prev.count(), frame.pixel_count());
}

TEST(Detections, Examples) {
  EXPECT_TRUE(detections_from_mask(BinaryMask(30, 30), 10).empty());
  BinaryMask m(40, 20);
  add_blob40(m, 8, 8);
  add_blob40(m, 28, 10);
  ASSERT_EQ(m.count(), 80);
  const auto d = detections_from_mask(m, 10, "f");
  ASSERT_EQ(d.size(), 2u);
  for (const auto& x : d) {
    EXPECT_EQ(x.area, 40);
    EXPECT_EQ(x.frame_id, "f");
  }
  EXPECT_EQ(detections_from_mask(m, 40).size(), 2u);
  EXPECT_TRUE(detections_from_mask(m, 50).empty());
}

TEST(Detections, DiagonalNeighboursJoin) {
  BinaryMask m(5, 5);
  m.set(1, 1, true);
  m.set(2, 2, true);
  m.set(3, 3, true);
  const auto d = detections_from_mask(m, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].bbox, (BoundingBox{1, 1, 3, 3}));
}

TEST(Detections, MaskInsideBoxAndDisjoint) {
  SimSession sim = sim_session();
  const BinaryMask& truth = sim.scene.frames[0].apple_mask;
  const auto dets = detections_from_mask(truth, 5);
  ASSERT_FALSE(dets.empty());
  BinaryMask seen(truth.width(), truth.height());
  long total = 0;
  for (const auto& d : dets) {
    EXPECT_EQ(d.mask.width(), d.bbox.w);
    EXPECT_EQ(d.mask.height(), d.bbox.h);
    EXPECT_EQ(d.mask.count(), d.area);
    for (int y = 0; y < d.bbox.h; ++y) {
      for (int x = 0; x < d.bbox.w; ++x) {
        if (!d.mask.get(x, y)) continue;
        ASSERT_TRUE(truth.get(d.bbox.x + x, d.bbox.y + y));
        ASSERT_FALSE(seen.get(d.bbox.x + x, d.bbox.y + y));
        seen.set(d.bbox.x + x, d.bbox.y + y, true);
      }
    }
    total += d.area;
  }
  EXPECT_LE(total, truth.count());
}

TEST(DetectConfig, Validation) {
  DetectConfig cfg;
  cfg.components = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfigError);
  cfg = DetectConfig{};
  cfg.kl_threshold = -1;
  EXPECT_THROW(cfg.validate(), InvalidConfigError);
  cfg = DetectConfig{};
  cfg.min_area = -1;
  EXPECT_THROW(cfg.validate(), InvalidConfigError);
}

TEST(DetectStrings, RoundTrip) {
  EXPECT_EQ(color_label_from_string(to_string(ColorLabel::Apple)), ColorLabel::Apple);
  EXPECT_EQ(provenance_from_string(to_string(Provenance::SemiSupervised)), Provenance::SemiSupervised);
  EXPECT_THROW(color_label_from_string("pear"), ValidationError);
}
