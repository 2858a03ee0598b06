#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "yieldest/eval.hpp"

namespace yieldest {

namespace {

constexpr int kPanelW = 300;
constexpr int kPanelH = 240;
constexpr int kMargin = 40;
constexpr int kColumns = 4;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double value(const MetricsPoint& p, Metric m) {
  switch (m) {
    case Metric::Precision: return p.precision;
    case Metric::Recall: return p.recall;
    case Metric::F1: return p.f1;
  }
  return 0;
}

}  // namespace

std::string render_metric_panels(const std::vector<MetricsCurve>& curves, Metric metric) {
  std::vector<std::string> datasets, methods;
  for (const auto& c : curves) {
    if (std::find(datasets.begin(), datasets.end(), c.dataset_id) == datasets.end()) datasets.push_back(c.dataset_id);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
  }
  const int panels = std::max<int>(1, static_cast<int>(datasets.size()));
  const int cols = std::min(kColumns, panels);
  const int rows = (panels + cols - 1) / cols;
  const int legend_h = 24;
  const int width = cols * kPanelW;
  const int height = rows * kPanelH + legend_h;

  std::ostringstream svg;
  char buf[256];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int d = 0; d < static_cast<int>(datasets.size()); ++d) {
    const int ox = (d % cols) * kPanelW;
    const int oy = (d / cols) * kPanelH;
    const int x0 = ox + kMargin, y0 = oy + 20;
    const int pw = kPanelW - kMargin - 12, ph = kPanelH - 20 - kMargin;
    svg << "<g>\n<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy + 14 << "\" text-anchor=\"middle\">"
        << escape(datasets[d]) << "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#444\"/>\n",
                  x0, y0, pw, ph);
    svg << buf;
    for (int t = 0; t <= 4; ++t) {
      const double f = t / 4.0;
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n"
                    "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%.2f</text>\n",
                    x0 - 4, y0 + ph - f * ph + 4, f, x0 + f * pw, y0 + ph + 14, f);
      svg << buf;
    }
    svg << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 + ph + 28 << "\" text-anchor=\"middle\">IoU</text>\n";
    std::snprintf(buf, sizeof buf, "<text transform=\"translate(%d,%d) rotate(-90)\" text-anchor=\"middle\">%s</text>\n",
                  ox + 10, y0 + ph / 2, to_string(metric));
    svg << buf;
    for (const auto& c : curves) {
      if (c.dataset_id != datasets[d] || c.points.empty()) continue;
      const auto mi = std::find(methods.begin(), methods.end(), c.method) - methods.begin();
      svg << "<polyline fill=\"none\" stroke=\"" << kPalette[mi % std::size(kPalette)]
          << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : c.points) {
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x0 + p.iou * pw, y0 + ph - std::clamp(value(p, metric), 0.0, 1.0) * ph);
        svg << buf;
      }
      svg << "\"/>\n";
    }
    svg << "</g>\n";
  }

  int lx = 10;
  const int ly = rows * kPanelH + 16;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"%s\" stroke-width=\"2\"/>\n", lx,
                  ly - 4, lx + 18, ly - 4, kPalette[m % std::size(kPalette)]);
    svg << buf << "<text x=\"" << lx + 22 << "\" y=\"" << ly << "\">"
        << escape(methods[m].empty() ? "detections" : methods[m]) << "</text>\n";
    lx += 40 + 7 * static_cast<int>(methods[m].size());
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace yieldest
