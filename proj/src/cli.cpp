#include "yieldest/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "yieldest/count.hpp"
#include "yieldest/data_io.hpp"
#include "yieldest/errors.hpp"
#include "yieldest/eval.hpp"
#include "yieldest/pipeline.hpp"
#include "yieldest/png_io.hpp"
#include "yieldest/service.hpp"
#include "yieldest/simulate.hpp"

namespace yieldest {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20190901;

struct DetectOverrides {
  std::optional<int> slic_target, slic_iterations, components, min_area, em_max_iterations;
  std::optional<double> compactness, kl_threshold, em_tolerance, covariance_floor;

  void add(CLI::App* app) {
    app->add_option("--slic-target", slic_target, "Superpixels per frame");
    app->add_option("--slic-iterations", slic_iterations, "SLIC iterations");
    app->add_option("--compactness", compactness, "SLIC compactness m");
    app->add_option("--components", components, "Colour classes in the pooled mixture");
    app->add_option("--kl-threshold", kl_threshold, "KL acceptance threshold");
    app->add_option("--min-area", min_area, "Smallest detection in pixels");
    app->add_option("--em-max-iterations", em_max_iterations, "EM iteration cap");
    app->add_option("--em-tolerance", em_tolerance, "EM relative log-likelihood tolerance");
    app->add_option("--covariance-floor", covariance_floor, "Diagonal covariance floor (LAB units^2)");
  }

  void apply(DetectConfig& c, std::uint64_t seed) const {
    if (slic_target) c.slic.target_count = *slic_target;
    if (slic_iterations) c.slic.iterations = *slic_iterations;
    if (compactness) c.slic.compactness = *compactness;
    if (components) c.components = *components;
    if (kl_threshold) c.kl_threshold = *kl_threshold;
    if (min_area) c.min_area = *min_area;
    if (em_max_iterations) c.em.max_iterations = *em_max_iterations;
    if (em_tolerance) c.em.tolerance = *em_tolerance;
    if (covariance_floor) c.em.covariance_floor = *covariance_floor;
    c.em.rng_seed = seed;
    c.validate();
  }
};

struct CountOverrides {
  std::optional<int> restarts, min_count_area, max_count;
  std::optional<double> pixels_per_sample;

  void add(CLI::App* app) {
    app->add_option("--restarts", restarts, "EM restarts per candidate count");
    app->add_option("--min-count-area", min_count_area, "Patches smaller than this count 0");
    app->add_option("--max-count", max_count, "Largest candidate count (<= 6)");
    app->add_option("--pixels-per-sample", pixels_per_sample, "Pixels per effective BIC sample");
  }

  CountConfig config(std::uint64_t seed) const {
    CountConfig c;
    if (restarts) c.restarts = *restarts;
    if (min_count_area) c.min_count_area = *min_count_area;
    if (max_count) c.max_count = *max_count;
    if (pixels_per_sample) c.pixels_per_sample = *pixels_per_sample;
    c.em.rng_seed = seed;
    c.validate();
    return c;
  }
};

json count_config_json(const CountConfig& c) {
  return {{"restarts", c.restarts}, {"min_count_area", c.min_count_area}, {"max_count", c.max_count},
          {"pixels_per_sample", c.pixels_per_sample}, {"seed", c.em.rng_seed}};
}

void log_run(std::ostream& err, const std::string& command, json config) {
  config["command"] = command;
  err << "run: " << config.dump() << '\n';
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> select_frames(const DatasetManifest& m, const std::string& frames, int first, int count) {
  std::vector<std::string> ids;
  if (!frames.empty()) {
    ids = split_csv(frames);
    for (const auto& id : ids) m.frame(id);
    return ids;
  }
  if (first < 0 || first >= static_cast<int>(m.frames.size()) || count < 1) {
    throw InvalidConfigError("frame range is empty");
  }
  for (int i = first; i < std::min<int>(first + count, static_cast<int>(m.frames.size())); ++i) ids.push_back(m.frames[i].id);
  return ids;
}

// Lazily classified frame masks across one or more manifests.
class MaskCache {
 public:
  MaskCache(std::vector<DatasetManifest> manifests, const ColorModel* model) : manifests_(std::move(manifests)), model_(model) {}

  const BinaryMask& operator()(const std::string& frame_id) {
    const auto it = cache_.find(frame_id);
    if (it != cache_.end()) return it->second;
    if (!model_) throw InvalidConfigError("observation '" + frame_id + "' has an ROI but no --model was given");
    for (const auto& m : manifests_) {
      for (const auto& f : m.frames) {
        if (f.id == frame_id) return cache_.emplace(frame_id, detect_mask(read_png_rgb(f.path), *model_)).first->second;
      }
    }
    throw ReferenceError("frame '" + frame_id + "' is not in any --manifest");
  }

 private:
  std::vector<DatasetManifest> manifests_;
  const ColorModel* model_;
  std::map<std::string, BinaryMask> cache_;
};

// ---- subcommands

struct IngestArgs {
  std::string manifest, polygons, boxes, out, scene, external_counts;
};

int run_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  log_run(err, "ingest", {{"manifest", a.manifest}, {"polygons", a.polygons}, {"boxes", a.boxes}, {"scene", a.scene},
                          {"external_counts", a.external_counts}});
  json summary = json::object();
  if (!a.external_counts.empty()) {
    if (a.scene.empty() || a.out.empty()) throw InvalidConfigError("--external-counts needs --scene and --out");
    SceneFile scene = load_scene(a.scene);
    const auto counts = ingest_external_counts(fs::path(a.external_counts), cluster_keys(scene));
    apply_external_counts(scene, counts);
    write_side_model(scene, a.out);
    summary["counts_applied"] = counts.size();
  }
  if (!a.manifest.empty()) {
    const DatasetManifest m = load_manifest(a.manifest);
    summary["dataset_id"] = m.dataset_id;
    summary["side"] = to_string(m.side);
    summary["frames"] = m.frames.size();
    if (m.harvested_count) summary["harvested_count"] = *m.harvested_count;
    std::vector<BoxAnnotation> boxes;
    if (!a.polygons.empty()) {
      const PolygonLoad load = load_polygon_annotations(a.polygons);
      for (const auto& w : load.warnings) err << "warning: " << w << '\n';
      summary["warnings"] = load.warnings;
      for (const auto& ann : load.annotations) {
        const FrameEntry& f = m.frame(ann.frame_id);
        const RgbImage img = read_png_rgb(f.path);
        BoxAnnotation b{ann.frame_id, img.width(), img.height(), {}};
        for (const auto& poly : ann.polygons) b.boxes.push_back(polygon_bbox(poly).clamped(img.width(), img.height()));
        boxes.push_back(std::move(b));
      }
    } else if (!a.boxes.empty()) {
      boxes = load_bbox_annotations(a.boxes);
      for (const auto& b : boxes) m.frame(b.frame_id);
    }
    if (!a.polygons.empty() || !a.boxes.empty()) {
      summary["annotated_frames"] = boxes.size();
      long n = 0;
      for (const auto& b : boxes) n += static_cast<long>(b.boxes.size());
      summary["boxes"] = n;
      if (!a.out.empty()) save_bbox_annotations(boxes, a.out);
    }
  }
  if (summary.empty()) throw InvalidConfigError("ingest needs --manifest or --external-counts");
  out << summary.dump(2) << '\n';
  return 0;
}

struct TrainArgs {
  std::string manifest, clicks, frames, out, provenance = "user-supervised";
  int first = 0, count = 5;
  std::uint64_t seed = kDefaultSeed;
  DetectOverrides overrides;
};

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  DetectConfig cfg;
  a.overrides.apply(cfg, a.seed);
  const DatasetManifest m = load_manifest(a.manifest);
  const auto ids = select_frames(m, a.frames, a.first, a.count);
  log_run(err, "train-color-model", {{"manifest", a.manifest}, {"clicks", a.clicks}, {"frames", ids}, {"config", to_json(cfg)}});
  std::vector<SessionFrame> frames;
  for (const auto& id : ids) frames.push_back({id, rgb_to_lab(read_png_rgb(m.frame(id).path))});
  SupervisionSession session(m.dataset_id, std::move(frames), cfg);
  run_click_script(session, read_click_script(a.clicks));
  const ColorModel model = finalize_model(session, provenance_from_string(a.provenance));
  save_color_model(model, a.out);
  out << json{{"model", a.out}, {"components", model.mixture.size()}, {"apple_components", model.apple_components()}}.dump(2)
      << '\n';
  return 0;
}

struct DetectArgs {
  std::string manifest, model, out, masks_dir, frames;
};

int run_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  const DatasetManifest m = load_manifest(a.manifest);
  const ColorModel model = load_color_model(a.model);
  log_run(err, "detect", {{"manifest", a.manifest}, {"model", a.model}, {"config", to_json(model.config)}});
  const auto ids = a.frames.empty() ? std::vector<std::string>{} : split_csv(a.frames);
  std::vector<Detection> all;
  for (const auto& f : m.frames) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), f.id) == ids.end()) continue;
    const BinaryMask mask = detect_mask(read_png_rgb(f.path), model);
    if (!a.masks_dir.empty()) {
      fs::create_directories(a.masks_dir);
      write_png_mask(fs::path(a.masks_dir) / (f.id + ".png"), mask);
    }
    auto dets = detections_from_mask(mask, model.config.min_area, f.id);
    all.insert(all.end(), std::make_move_iterator(dets.begin()), std::make_move_iterator(dets.end()));
  }
  write_detections(a.out, all);
  out << json{{"detections", all.size()}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

struct CountArgs {
  std::string scene, model, external_counts, out, pairs;
  std::vector<std::string> manifests;
  std::uint64_t seed = kDefaultSeed;
  CountOverrides overrides;
};

int run_count(const CountArgs& a, std::ostream& out, std::ostream& err) {
  const CountConfig cfg = a.overrides.config(a.seed);
  log_run(err, "count", {{"scene", a.scene}, {"model", a.model}, {"manifests", a.manifests}, {"config", count_config_json(cfg)}});
  SceneFile scene = load_scene(a.scene);
  if (!a.external_counts.empty()) {
    apply_external_counts(scene, ingest_external_counts(fs::path(a.external_counts), cluster_keys(scene)));
  }
  std::optional<ColorModel> model;
  if (!a.model.empty()) model = load_color_model(a.model);
  std::vector<DatasetManifest> manifests;
  for (const auto& p : a.manifests) manifests.push_back(load_manifest(p));
  MaskCache masks(std::move(manifests), model ? &*model : nullptr);

  std::vector<std::pair<int, int>> pairs;  // (predicted, truth) per counted observation
  const ObservationCounter base = patch_counter(std::ref(masks), cfg);
  const ObservationCounter counter = [&](const TrackObservation& o) {
    const int c = base(o);
    if (o.roi && o.count) pairs.emplace_back(std::clamp(c, 0, kMaxClusterCount), std::clamp(*o.count, 0, kMaxClusterCount));
    return c;
  };
  long resolved = 0;
  for (SideModel* side : {&scene.front, &scene.back}) {
    for (auto& t : side->tracks) {
      if (t.count || t.on_ground || t.background) continue;
      t.count = aggregate_track_count(t, counter);
      ++resolved;
    }
  }
  write_side_model(scene, a.out);
  if (!a.pairs.empty()) {
    std::ostringstream csv;
    csv << "predicted,truth\n";
    for (const auto& [p, t] : pairs) csv << p << ',' << t << '\n';
    write_text_file(a.pairs, csv.str());
  }
  out << json{{"resolved_tracks", resolved}, {"counted_observations", pairs.size()}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

struct EvaluateArgs {
  std::vector<std::string> detections, annotations, dataset_ids, methods;
  std::string count_pairs, out_dir;
};

std::vector<std::pair<int, int>> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<int, int>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("predicted", 0) == 0) continue;
    int p = 0, t = 0;
    char comma = 0;
    std::istringstream ls(line);
    if (!(ls >> p >> comma >> t) || comma != ',') throw ParseError(path.string(), lineno, "expected 'predicted,truth'");
    out.emplace_back(p, t);
  }
  return out;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  log_run(err, "evaluate", {{"detections", a.detections}, {"annotations", a.annotations}, {"count_pairs", a.count_pairs}});
  if (a.detections.size() != a.annotations.size()) {
    throw InvalidConfigError("--detections and --annotations must be given the same number of times");
  }
  if (a.detections.empty() && a.count_pairs.empty()) throw InvalidConfigError("nothing to evaluate");
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  json summary = json::object();

  std::vector<MetricsCurve> curves;
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    const auto gts = load_bbox_annotations(a.annotations[i]);
    const auto dets = read_detections(fs::path(a.detections[i]));
    std::vector<FrameBoxes> frames;
    for (const auto& g : gts) {
      FrameBoxes fb{g.frame_id, {}, g.boxes};
      for (const auto& d : dets) {
        if (d.frame_id == g.frame_id) fb.detections.push_back(d.bbox);
      }
      frames.push_back(std::move(fb));
    }
    const std::string id = i < a.dataset_ids.size() ? a.dataset_ids[i] : fs::path(a.annotations[i]).stem().string();
    const std::string method = i < a.methods.size() ? a.methods[i] : "";
    curves.push_back(metrics_over_iou_grid(frames, id, method));
    const std::string stem = method.empty() ? id : id + "_" + method;
    write_text_file(dir / (stem + ".curve.csv"), curve_csv(curves.back()));
  }
  if (!curves.empty()) {
    json jc = json::array();
    for (const auto& c : curves) jc.push_back(to_json(c));
    write_text_file(dir / "metrics.json", json{{"format_version", kFormatVersion}, {"curves", jc}}.dump(2) + "\n");
    write_text_file(dir / "recall.svg", render_metric_panels(curves, Metric::Recall));
    write_text_file(dir / "precision.svg", render_metric_panels(curves, Metric::Precision));
    write_text_file(dir / "f1.svg", render_metric_panels(curves, Metric::F1));
    summary["curves"] = curves.size();
  }
  if (!a.count_pairs.empty()) {
    std::vector<int> pred, truth;
    for (const auto& [p, t] : read_pairs(a.count_pairs)) {
      pred.push_back(p);
      truth.push_back(t);
    }
    const CountConfusion c = counting_confusion(pred, truth);
    write_text_file(dir / "confusion.csv", confusion_csv(c));
    json jc = to_json(c);
    jc["format_version"] = kFormatVersion;
    write_text_file(dir / "confusion.json", jc.dump(2) + "\n");
    summary["count_accuracy"] = c.accuracy();
    const auto fpr = c.false_positive_rejection_rate();
    summary["false_positive_rejection_rate"] = fpr ? json(*fpr) : json(nullptr);
  }
  summary["out_dir"] = a.out_dir;
  out << summary.dump(2) << '\n';
  return 0;
}

struct YieldArgs {
  std::string scene, method = "GMM", out;
  std::optional<long> harvested;
};

int run_yield(const YieldArgs& a, std::ostream& out, std::ostream& err) {
  log_run(err, "yield", {{"scene", a.scene}, {"method", a.method}});
  const SceneFile scene = load_scene(a.scene);
  const auto harvested = a.harvested ? a.harvested : scene.harvested_count;
  const YieldReport r = estimate_yield(scene, embedded_count, a.method, harvested);
  if (!a.out.empty()) write_report({r}, a.out);
  out << render_yield_table({r});
  return 0;
}

struct SimulateArgs {
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  SceneParams params;
  bool no_render = false;
};

int run_simulate(SimulateArgs a, std::ostream& out, std::ostream& err) {
  a.params.render = !a.no_render;
  const json params = {{"trees", a.params.trees},
                       {"fruits_per_tree", a.params.fruits_per_tree},
                       {"both_side_fraction", a.params.both_side_fraction},
                       {"occlusion_rate", a.params.occlusion_rate},
                       {"spurious_tracks", a.params.spurious_tracks},
                       {"observations_per_track", a.params.observations_per_track},
                       {"render", a.params.render}};
  log_run(err, "simulate", {{"seed", a.seed}, {"params", params}});
  const SimulatedScene sim = simulate_scene(a.seed, a.params);
  const fs::path dir = a.out;
  fs::create_directories(dir);

  SceneFile scene{"sim", sim.truth, sim.front, sim.back, sim.overlaps};
  write_side_model(scene, dir / "scene.json");
  write_text_file(dir / "truth.json", json{{"format_version", kFormatVersion}, {"seed", a.seed}, {"truth", sim.truth},
                                           {"params", params}}.dump(2) + "\n");
  if (a.params.render) {
    std::map<Side, DatasetManifest> manifests;
    manifests[Side::Front] = {"sim-front", Side::Front, {}, dir / "sim-front.boxes.json", sim.truth};
    manifests[Side::Back] = {"sim-back", Side::Back, {}, dir / "sim-back.boxes.json", sim.truth};
    std::map<Side, std::vector<BoxAnnotation>> boxes;
    for (const auto& f : sim.frames) {
      const fs::path png = dir / "frames" / (f.id + ".png");
      fs::create_directories(png.parent_path());
      write_png_rgb(png, f.image);
      fs::create_directories(dir / "masks");
      write_png_mask(dir / "masks" / (f.id + ".png"), f.apple_mask);
      manifests[f.side].frames.push_back({f.id, png});
      boxes[f.side].push_back({f.id, f.image.width(), f.image.height(), f.fruit_boxes});
    }
    for (auto& [side, m] : manifests) {
      save_manifest(m, dir / (m.dataset_id + ".manifest.json"));
      save_bbox_annotations(boxes[side], *m.annotations);
    }
  }
  out << json{{"truth", sim.truth}, {"frames", sim.frames.size()}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

struct ServeArgs {
  std::string data_root, state_dir, host = "127.0.0.1", ui_dir;
  int port = 8080;
};

int run_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  ServiceOptions opt;
  opt.data_root = a.data_root;
  if (!a.state_dir.empty()) opt.state_dir = a.state_dir;
  if (!a.ui_dir.empty()) opt.ui_dir = a.ui_dir;
  if (opt.data_root.empty()) throw InvalidConfigError("--data-root or YIELDEST_DATA_ROOT is required");
  log_run(err, "serve", {{"data_root", a.data_root}, {"host", a.host}, {"port", a.port}});
  out << "listening on http://" << a.host << ':' << a.port << "/v1\n" << std::flush;
  serve(opt, a.host, a.port);
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Apple detection, counting and yield estimation"};
  app.name("yieldest");
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a dataset and normalise its annotations");
  c_ingest->add_option("--manifest", ingest.manifest, "Dataset manifest JSON")->check(CLI::ExistingFile);
  c_ingest->add_option("--polygons", ingest.polygons, "VGG Image Annotator polygon export")->check(CLI::ExistingFile);
  c_ingest->add_option("--boxes", ingest.boxes, "Bounding-box annotations JSON")->check(CLI::ExistingFile);
  c_ingest->add_option("--scene", ingest.scene, "Scene file to attach external counts to")->check(CLI::ExistingFile);
  c_ingest->add_option("--external-counts", ingest.external_counts, "JSON lines {cluster_id, count, side?}")
      ->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "Output: box annotations, or the scene with external counts");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train-color-model", "Fit the colour model from a click script");
  c_train->add_option("--manifest", train.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  c_train->add_option("--clicks", train.clicks, "Click file: JSON list of {frame, x, y, label}")->required()->check(CLI::ExistingFile);
  c_train->add_option("--frames", train.frames, "Comma-separated frame ids for the session");
  c_train->add_option("--first", train.first, "First frame index when --frames is not given");
  c_train->add_option("--count", train.count, "Number of frames when --frames is not given");
  c_train->add_option("--out", train.out, "Output model JSON")->required();
  c_train->add_option("--seed", train.seed, "RNG seed");
  c_train->add_option("--provenance", train.provenance, "user-supervised | semi-supervised")
      ->check(CLI::IsMember({"user-supervised", "semi-supervised"}));
  train.overrides.add(c_train);

  DetectArgs detect;
  auto* c_detect = app.add_subcommand("detect", "Segment apples and write detections");
  c_detect->add_option("--manifest", detect.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  c_detect->add_option("--model", detect.model, "Colour model JSON")->required()->check(CLI::ExistingFile);
  c_detect->add_option("--out", detect.out, "Detections JSON lines")->required();
  c_detect->add_option("--masks-dir", detect.masks_dir, "Also write per-frame apple masks as PNG");
  c_detect->add_option("--frames", detect.frames, "Comma-separated subset of frame ids");

  CountArgs count;
  auto* c_count = app.add_subcommand("count", "Resolve per-cluster fruit counts");
  c_count->add_option("--scene", count.scene, "Scene file")->required()->check(CLI::ExistingFile);
  c_count->add_option("--model", count.model, "Colour model used to segment ROIs")->check(CLI::ExistingFile);
  c_count->add_option("--manifest", count.manifests, "Manifest(s) holding the observed frames")->check(CLI::ExistingFile);
  c_count->add_option("--external-counts", count.external_counts, "Counts from an external counter")
      ->check(CLI::ExistingFile);
  c_count->add_option("--out", count.out, "Scene with resolved counts")->required();
  c_count->add_option("--pairs", count.pairs, "CSV of (predicted, truth) per counted observation");
  c_count->add_option("--seed", count.seed, "RNG seed");
  count.overrides.add(c_count);

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Detection curves, plots and counting confusion");
  c_eval->add_option("--detections", evaluate.detections, "Detections JSON lines (repeatable)")->check(CLI::ExistingFile);
  c_eval->add_option("--annotations", evaluate.annotations, "Box annotations JSON (repeatable)")->check(CLI::ExistingFile);
  c_eval->add_option("--dataset-id", evaluate.dataset_ids, "Panel name per detections file");
  c_eval->add_option("--method", evaluate.methods, "Method label per detections file");
  c_eval->add_option("--count-pairs", evaluate.count_pairs, "CSV predicted,truth")->check(CLI::ExistingFile);
  c_eval->add_option("--out-dir", evaluate.out_dir, "Output directory")->required();

  YieldArgs yield;
  auto* c_yield = app.add_subcommand("yield", "Merge both sides into a yield estimate");
  c_yield->add_option("--scene", yield.scene, "Scene file")->required()->check(CLI::ExistingFile);
  c_yield->add_option("--harvested", yield.harvested, "Harvested fruit count");
  c_yield->add_option("--method", yield.method, "Counting method label");
  c_yield->add_option("--out", yield.out, "Write <out>.json and <out>.txt");

  SimulateArgs simulate;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic orchard row");
  c_sim->add_option("--seed", simulate.seed, "RNG seed");
  c_sim->add_option("--out", simulate.out, "Output directory")->required();
  c_sim->add_option("--trees", simulate.params.trees, "Trees in the row");
  c_sim->add_option("--fruits-per-tree", simulate.params.fruits_per_tree, "Fruits per tree");
  c_sim->add_option("--both-side-fraction", simulate.params.both_side_fraction, "Share of clusters seen from both sides");
  c_sim->add_option("--occlusion-rate", simulate.params.occlusion_rate, "Per-fruit one-side occlusion probability");
  c_sim->add_option("--spurious", simulate.params.spurious_tracks, "Ground/background tracks");
  c_sim->add_option("--observations", simulate.params.observations_per_track, "Observations per track");
  c_sim->add_flag("--no-render", simulate.no_render, "Skip frame rendering");

  ServeArgs srv;
  if (const char* root = std::getenv("YIELDEST_DATA_ROOT")) srv.data_root = root;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP API");
  c_serve->add_option("--data-root", srv.data_root, "Dataset root (default $YIELDEST_DATA_ROOT)");
  c_serve->add_option("--state-dir", srv.state_dir, "Session/model store (default <data-root>/.yieldest)");
  c_serve->add_option("--host", srv.host, "Bind address");
  c_serve->add_option("--port", srv.port, "Port");
  c_serve->add_option("--ui-dir", srv.ui_dir, "Static UI bundle served at /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'yieldest --help' for usage\n";
    return 2;
  }

  try {
    if (c_ingest->parsed()) return run_ingest(ingest, out, err);
    if (c_train->parsed()) return run_train(train, out, err);
    if (c_detect->parsed()) return run_detect(detect, out, err);
    if (c_count->parsed()) return run_count(count, out, err);
    if (c_eval->parsed()) return run_evaluate(evaluate, out, err);
    if (c_yield->parsed()) return run_yield(yield, out, err);
    if (c_sim->parsed()) return run_simulate(simulate, out, err);
    if (c_serve->parsed()) return run_serve(srv, out, err);
  } catch (const Error& e) {
    err << "error [" << e.kind() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_run(args, std::cout, std::cerr);
}

}  // namespace yieldest
