#pragma once

#include <map>
#include <string>
#include <vector>

#include "yieldest/imaging.hpp"
#include "yieldest/mixture.hpp"
#include "yieldest/slic.hpp"

namespace yieldest {

enum class ColorLabel { Background, Apple };
enum class Provenance { UserSupervised, SemiSupervised };

const char* to_string(ColorLabel label);
const char* to_string(Provenance provenance);
ColorLabel color_label_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

/// Parameters shared by colour clustering and per-frame classification.
struct DetectConfig {
  SlicConfig slic;
  EmConfig em = default_em();
  int components = 25;
  /// A frame component inherits its matched label only if KL < threshold.
  double kl_threshold = 5.0;
  int min_area = 20;

  static EmConfig default_em() {
    EmConfig em;
    em.covariance_floor = 1.0;  // LAB units^2
    return em;
  }
  void validate() const;
};

struct ColorModel {
  MixtureModel mixture;
  std::vector<ColorLabel> labels;  // one per mixture component
  Provenance provenance = Provenance::UserSupervised;
  std::string colorspace = "CIELAB-D65";
  DetectConfig config;

  int apple_components() const;
};

/// SLIC output of one frame plus each superpixel's mean colour as a row.
struct FrameSuperpixels {
  SuperpixelMap map;
  PointSet colors;  // n_superpixels x 3
};

FrameSuperpixels superpixel_colors(const LabImage& frame, const SlicConfig& cfg);

/// Pools mean-LAB superpixel colours across frames and fits cfg.components
/// colour classes.
MixtureModel build_color_clusters(const std::vector<LabImage>& frames, const DetectConfig& cfg);

struct Click {
  std::string frame_id;
  int x = 0;
  int y = 0;
  int component = -1;
  bool accepted = false;
};

struct ClickResult {
  int component = -1;
  /// Superpixels of every session frame assigned to `component`, in frame order.
  std::vector<BinaryMask> highlights;
  int clicked_frame = 0;
};

class SupervisionSession;
ClickResult click_to_cluster(SupervisionSession& session, const std::string& frame_id, int x, int y);
void label_cluster(SupervisionSession& session, int component, ColorLabel label);

struct SessionFrame {
  std::string id;
  LabImage image;
};

/// Interactive colour-model training over a handful of frames. Single writer.
class SupervisionSession {
 public:
  SupervisionSession(std::string dataset_id, std::vector<SessionFrame> frames, DetectConfig cfg);

  const std::string& dataset_id() const { return dataset_id_; }
  const DetectConfig& config() const { return config_; }
  const MixtureModel& mixture() const { return mixture_; }
  const std::vector<Click>& clicks() const { return clicks_; }
  const std::map<int, ColorLabel>& labels() const { return labels_; }
  std::vector<std::string> frame_ids() const;

  int frame_index(const std::string& frame_id) const;
  const SessionFrame& frame(int index) const { return frames_.at(index); }
  const FrameSuperpixels& superpixels(int index) const { return superpixels_.at(index); }
  /// Argmax-responsibility component for each superpixel of a frame.
  const std::vector<int>& assignment(int index) const { return assignment_.at(index); }

 private:
  friend ClickResult click_to_cluster(SupervisionSession&, const std::string&, int, int);
  friend void label_cluster(SupervisionSession&, int, ColorLabel);

  std::string dataset_id_;
  std::vector<SessionFrame> frames_;
  DetectConfig config_;
  std::vector<FrameSuperpixels> superpixels_;
  MixtureModel mixture_;
  std::vector<std::vector<int>> assignment_;
  std::vector<Click> clicks_;
  std::map<int, ColorLabel> labels_;
};

/// Throws EmptyModelError when no component is labelled apple.
ColorModel finalize_model(const SupervisionSession& session, Provenance provenance = Provenance::UserSupervised);

struct FrameClassification {
  FrameSuperpixels superpixels;
  MixtureModel frame_mixture;
  std::vector<int> superpixel_component;  // frame component per superpixel
  std::vector<int> matched_model_component;  // model component per frame component
  std::vector<double> match_kl;
  std::vector<bool> component_is_apple;
  BinaryMask mask;
};

FrameClassification classify_frame_detailed(const LabImage& frame, const ColorModel& model, const DetectConfig& cfg);
BinaryMask classify_frame(const LabImage& frame, const ColorModel& model, const DetectConfig& cfg);
BinaryMask classify_frame(const LabImage& frame, const ColorModel& model);

struct Detection {
  std::string frame_id;
  BoundingBox bbox;
  BinaryMask mask;  // bbox-sized, only this detection's pixels set
  long area = 0;
};

/// 8-connected components with at least `min_area` pixels.
std::vector<Detection> detections_from_mask(const BinaryMask& mask, int min_area, const std::string& frame_id = "");

}  // namespace yieldest
