#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"

namespace yieldest {

struct Match {
  int detection = 0;
  int ground_truth = 0;
  double iou = 0;
};

struct MatchResult {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  std::vector<Match> matches;
};

/// Greedy one-to-one matching: all (det, gt) pairs sorted by descending IoU
/// (ties by det index, then gt index); a pair is taken if IoU >= threshold and
/// both sides are still free. Threshold must lie in (0,1).
MatchResult match_detections(const std::vector<BoundingBox>& dets, const std::vector<BoundingBox>& gts,
                             double iou_threshold);

struct MetricsPoint {
  double iou = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); every 0/0 is 0.
MetricsPoint metrics_point(const MatchResult& m, double iou = 0);

struct FrameBoxes {
  std::string frame_id;
  std::vector<BoundingBox> detections;
  std::vector<BoundingBox> ground_truth;
};

struct MetricsCurve {
  std::string dataset_id;
  std::string method;
  std::vector<MetricsPoint> points;  // IoU 0.01 .. 0.99
};

/// The 99 thresholds 0.01, 0.02, ..., 0.99.
std::vector<double> iou_grid();

/// Per-frame metrics averaged over frames at each grid threshold. Frames
/// without ground truth count towards precision and F1 but not recall.
MetricsCurve metrics_over_iou_grid(const std::vector<FrameBoxes>& frames, std::string dataset_id = "",
                                   std::string method = "");

/// Rows (iou,precision,recall,f1) with a header line.
std::string curve_csv(const MetricsCurve& curve);

struct CountConfusion {
  static constexpr int kClasses = 7;  // counts 0..6
  std::array<std::array<long, kClasses>, kClasses> matrix{};  // [true][predicted]

  long total() const;
  long correct() const;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const;
  /// Fraction of true-0 patches predicted 0, i.e. rejected false positives.
  std::optional<double> false_positive_rejection_rate() const;
};

CountConfusion counting_confusion(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Header "true\\pred,0,...,6" then one row per true count.
std::string confusion_csv(const CountConfusion& c);

enum class Metric { Precision, Recall, F1 };

const char* to_string(Metric m);

/// One panel per dataset (first-seen order), one line per method inside a
/// panel, IoU threshold on x and the metric on y.
std::string render_metric_panels(const std::vector<MetricsCurve>& curves, Metric metric);

}  // namespace yieldest
