#include "yieldest/detect.hpp"

#include <algorithm>
#include <limits>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

std::vector<int> argmax_rows(const Matrix& resp) {
  std::vector<int> out(static_cast<std::size_t>(resp.rows()));
  for (long i = 0; i < resp.rows(); ++i) {
    Eigen::Index best = 0;
    resp.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

BinaryMask superpixel_union(const SuperpixelMap& map, const std::vector<int>& assignment, int component) {
  BinaryMask mask(map.width, map.height);
  for (long p = 0; p < static_cast<long>(map.labels.size()); ++p) {
    if (assignment[map.labels[p]] == component) mask.set(p, true);
  }
  return mask;
}

MixtureModel fit_pooled(const std::vector<const FrameSuperpixels*>& frames, const DetectConfig& cfg) {
  long total = 0;
  for (const auto* f : frames) total += f->colors.rows();
  if (total < cfg.components) {
    throw InsufficientDataError("only " + std::to_string(total) + " superpixels for " +
                                std::to_string(cfg.components) + " colour classes");
  }
  PointSet pooled(total, 3);
  long row = 0;
  for (const auto* f : frames) {
    pooled.middleRows(row, f->colors.rows()) = f->colors;
    row += f->colors.rows();
  }
  return fit_gmm(pooled, cfg.components, cfg.em).model;
}

}  // namespace

const char* to_string(ColorLabel label) { return label == ColorLabel::Apple ? "apple" : "background"; }

const char* to_string(Provenance provenance) {
  return provenance == Provenance::UserSupervised ? "user-supervised" : "semi-supervised";
}

ColorLabel color_label_from_string(const std::string& s) {
  if (s == "apple") return ColorLabel::Apple;
  if (s == "background") return ColorLabel::Background;
  throw ValidationError("unknown label '" + s + "' (expected apple|background)");
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "user-supervised") return Provenance::UserSupervised;
  if (s == "semi-supervised") return Provenance::SemiSupervised;
  throw ValidationError("unknown provenance '" + s + "'");
}

void DetectConfig::validate() const {
  slic.validate();
  em.validate();
  if (components < 1) throw InvalidConfigError("colour class count must be >= 1");
  if (!(kl_threshold >= 0)) throw InvalidConfigError("KL threshold must be >= 0");
  if (min_area < 0) throw InvalidConfigError("min_area must be >= 0");
}

int ColorModel::apple_components() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), ColorLabel::Apple));
}

FrameSuperpixels superpixel_colors(const LabImage& frame, const SlicConfig& cfg) {
  FrameSuperpixels out;
  SlicConfig local = cfg;
  local.target_count = static_cast<int>(std::min<long>(cfg.target_count, frame.pixel_count()));
  out.map = slic_segment(frame, local);
  out.colors.resize(static_cast<long>(out.map.superpixels.size()), 3);
  for (const auto& sp : out.map.superpixels) {
    out.colors.row(sp.id) << sp.mean_lab[0], sp.mean_lab[1], sp.mean_lab[2];
  }
  return out;
}

MixtureModel build_color_clusters(const std::vector<LabImage>& frames, const DetectConfig& cfg) {
  cfg.validate();
  if (frames.empty()) throw InsufficientDataError("colour clustering needs at least one frame");
  std::vector<FrameSuperpixels> analysed;
  analysed.reserve(frames.size());
  for (const auto& f : frames) analysed.push_back(superpixel_colors(f, cfg.slic));
  std::vector<const FrameSuperpixels*> ptrs;
  for (const auto& a : analysed) ptrs.push_back(&a);
  return fit_pooled(ptrs, cfg);
}

SupervisionSession::SupervisionSession(std::string dataset_id, std::vector<SessionFrame> frames, DetectConfig cfg)
    : dataset_id_(std::move(dataset_id)),
      frames_(std::move(frames)),
      config_(std::move(cfg)),
      superpixels_([this] {
        config_.validate();
        if (frames_.empty()) throw InsufficientDataError("a supervision session needs at least one frame");
        std::vector<FrameSuperpixels> out;
        for (const auto& f : frames_) out.push_back(superpixel_colors(f.image, config_.slic));
        return out;
      }()),
      mixture_([this] {
        std::vector<const FrameSuperpixels*> ptrs;
        for (const auto& s : superpixels_) ptrs.push_back(&s);
        return fit_pooled(ptrs, config_);
      }()) {
  for (const auto& s : superpixels_) assignment_.push_back(argmax_rows(responsibilities(mixture_, s.colors)));
}

std::vector<std::string> SupervisionSession::frame_ids() const {
  std::vector<std::string> ids;
  for (const auto& f : frames_) ids.push_back(f.id);
  return ids;
}

int SupervisionSession::frame_index(const std::string& frame_id) const {
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (frames_[i].id == frame_id) return static_cast<int>(i);
  }
  throw NotFoundError("frame '" + frame_id + "' is not part of the session");
}

ClickResult click_to_cluster(SupervisionSession& session, const std::string& frame_id, int x, int y) {
  const int fi = session.frame_index(frame_id);
  const LabImage& img = session.frames_[fi].image;
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) {
    throw RangeError("click (" + std::to_string(x) + "," + std::to_string(y) + ") outside frame " + frame_id);
  }
  const int sp = session.superpixels_[fi].map.label_at(x, y);
  ClickResult result;
  result.component = session.assignment_[fi][sp];
  result.clicked_frame = fi;
  for (std::size_t f = 0; f < session.frames_.size(); ++f) {
    result.highlights.push_back(superpixel_union(session.superpixels_[f].map, session.assignment_[f], result.component));
  }
  session.clicks_.push_back({frame_id, x, y, result.component, false});
  return result;
}

void label_cluster(SupervisionSession& session, int component, ColorLabel label) {
  if (component < 0 || component >= session.mixture_.size()) {
    throw NotFoundError("component " + std::to_string(component) + " does not exist");
  }
  session.labels_[component] = label;
  for (auto& c : session.clicks_) {
    if (c.component == component) c.accepted = true;
  }
}

ColorModel finalize_model(const SupervisionSession& session, Provenance provenance) {
  std::vector<ColorLabel> labels(static_cast<std::size_t>(session.mixture().size()), ColorLabel::Background);
  for (const auto& [component, label] : session.labels()) labels[component] = label;
  ColorModel model{session.mixture(), std::move(labels), provenance, "CIELAB-D65", session.config()};
  if (model.apple_components() == 0) throw EmptyModelError("no colour class is labelled apple");
  return model;
}

FrameClassification classify_frame_detailed(const LabImage& frame, const ColorModel& model, const DetectConfig& cfg) {
  if (model.apple_components() == 0) throw EmptyModelError("colour model has no apple classes");
  if (static_cast<int>(model.labels.size()) != model.mixture.size()) {
    throw ValidationError("colour model label count does not match its mixture");
  }
  FrameSuperpixels sp = superpixel_colors(frame, cfg.slic);
  const int k = std::min<int>(model.mixture.size(), static_cast<int>(sp.colors.rows()));
  MixtureModel frame_mixture = fit_gmm(sp.colors, k, cfg.em).model;

  FrameClassification out{std::move(sp), std::move(frame_mixture), {}, {}, {}, {}, BinaryMask(frame.width(), frame.height())};
  for (int i = 0; i < out.frame_mixture.size(); ++i) {
    int best = 0;
    double best_kl = std::numeric_limits<double>::infinity();
    for (int j = 0; j < model.mixture.size(); ++j) {
      const double kl = kl_gaussian(out.frame_mixture.component(i), model.mixture.component(j));
      if (kl < best_kl) {
        best_kl = kl;
        best = j;
      }
    }
    out.matched_model_component.push_back(best);
    out.match_kl.push_back(best_kl);
    out.component_is_apple.push_back(model.labels[best] == ColorLabel::Apple && best_kl < cfg.kl_threshold);
  }
  out.superpixel_component = argmax_rows(responsibilities(out.frame_mixture, out.superpixels.colors));
  const auto& labels = out.superpixels.map.labels;
  for (long p = 0; p < static_cast<long>(labels.size()); ++p) {
    if (out.component_is_apple[out.superpixel_component[labels[p]]]) out.mask.set(p, true);
  }
  return out;
}

BinaryMask classify_frame(const LabImage& frame, const ColorModel& model, const DetectConfig& cfg) {
  return classify_frame_detailed(frame, model, cfg).mask;
}

BinaryMask classify_frame(const LabImage& frame, const ColorModel& model) {
  return classify_frame(frame, model, model.config);
}

std::vector<Detection> detections_from_mask(const BinaryMask& mask, int min_area, const std::string& frame_id) {
  std::vector<Detection> out;
  if (mask.width() == 0) return out;
  const ComponentSet cs = connected_components(mask, Connectivity::Eight);
  for (const auto& c : cs.components) {
    if (c.pixel_count < min_area) continue;
    Detection d;
    d.frame_id = frame_id;
    d.bbox = c.bbox;
    d.area = c.pixel_count;
    d.mask = BinaryMask(c.bbox.w, c.bbox.h);
    for (int y = 0; y < c.bbox.h; ++y) {
      for (int x = 0; x < c.bbox.w; ++x) {
        const long p = static_cast<long>(c.bbox.y + y) * cs.width + (c.bbox.x + x);
        if (cs.labels[p] == c.id) d.mask.set(x, y, true);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace yieldest
