#include "yieldest/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "yieldest/errors.hpp"

namespace yieldest {

MatchResult match_detections(const std::vector<BoundingBox>& dets, const std::vector<BoundingBox>& gts,
                             double iou_threshold) {
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw InvalidConfigError("IoU threshold must lie in (0,1)");
  std::vector<Match> pairs;
  for (int d = 0; d < static_cast<int>(dets.size()); ++d) {
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      const double iou = bbox_iou(dets[d], gts[g]);
      if (iou >= iou_threshold) pairs.push_back({d, g, iou});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Match& a, const Match& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.detection != b.detection) return a.detection < b.detection;
    return a.ground_truth < b.ground_truth;
  });
  std::vector<bool> det_used(dets.size()), gt_used(gts.size());
  MatchResult r;
  for (const auto& p : pairs) {
    if (det_used[p.detection] || gt_used[p.ground_truth]) continue;
    det_used[p.detection] = gt_used[p.ground_truth] = true;
    r.matches.push_back(p);
  }
  r.tp = static_cast<long>(r.matches.size());
  r.fp = static_cast<long>(dets.size()) - r.tp;
  r.fn = static_cast<long>(gts.size()) - r.tp;
  return r;
}

MetricsPoint metrics_point(const MatchResult& m, double iou) {
  auto ratio = [](long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  MetricsPoint p;
  p.iou = iou;
  p.precision = ratio(m.tp, m.tp + m.fp);
  p.recall = ratio(m.tp, m.tp + m.fn);
  const double s = p.precision + p.recall;
  p.f1 = s == 0 ? 0.0 : 2 * p.precision * p.recall / s;
  return p;
}

std::vector<double> iou_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  return grid;
}

MetricsCurve metrics_over_iou_grid(const std::vector<FrameBoxes>& frames, std::string dataset_id, std::string method) {
  if (frames.empty()) throw InsufficientDataError("metrics need at least one frame");
  MetricsCurve curve{std::move(dataset_id), std::move(method), {}};
  for (const double t : iou_grid()) {
    double p_sum = 0, r_sum = 0, f_sum = 0;
    long recall_frames = 0;
    for (const auto& f : frames) {
      const MetricsPoint m = metrics_point(match_detections(f.detections, f.ground_truth, t), t);
      p_sum += m.precision;
      f_sum += m.f1;
      if (!f.ground_truth.empty()) {
        r_sum += m.recall;
        ++recall_frames;
      }
    }
    const double n = static_cast<double>(frames.size());
    curve.points.push_back({t, p_sum / n, recall_frames ? r_sum / recall_frames : 0.0, f_sum / n});
  }
  return curve;
}

std::string curve_csv(const MetricsCurve& curve) {
  std::ostringstream out;
  out << "iou,precision,recall,f1\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f,%.6f\n", p.iou, p.precision, p.recall, p.f1);
    out << buf;
  }
  return out.str();
}

long CountConfusion::total() const {
  long t = 0;
  for (const auto& row : matrix) {
    for (const long v : row) t += v;
  }
  return t;
}

long CountConfusion::correct() const {
  long c = 0;
  for (int i = 0; i < kClasses; ++i) c += matrix[i][i];
  return c;
}

double CountConfusion::accuracy() const {
  const long t = total();
  return t == 0 ? 0.0 : static_cast<double>(correct()) / t;
}

std::optional<double> CountConfusion::false_positive_rejection_rate() const {
  long row = 0;
  for (const long v : matrix[0]) row += v;
  if (row == 0) return std::nullopt;
  return static_cast<double>(matrix[0][0]) / row;
}

CountConfusion counting_confusion(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("prediction/truth length mismatch: " + std::to_string(predicted.size()) + " vs " +
                          std::to_string(truth.size()));
  }
  CountConfusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= CountConfusion::kClasses || predicted[i] < 0 ||
        predicted[i] >= CountConfusion::kClasses) {
      throw ValidationError("count pair " + std::to_string(i) + " outside [0,6]");
    }
    ++c.matrix[truth[i]][predicted[i]];
  }
  return c;
}

std::string confusion_csv(const CountConfusion& c) {
  std::ostringstream out;
  out << "true\\pred";
  for (int j = 0; j < CountConfusion::kClasses; ++j) out << ',' << j;
  out << '\n';
  for (int i = 0; i < CountConfusion::kClasses; ++i) {
    out << i;
    for (int j = 0; j < CountConfusion::kClasses; ++j) out << ',' << c.matrix[i][j];
    out << '\n';
  }
  return out.str();
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::Precision: return "Precision";
    case Metric::Recall: return "Recall";
    case Metric::F1: return "F1-measure";
  }
  return "";
}

}  // namespace yieldest
