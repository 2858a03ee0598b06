#include "yieldest/count.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

double effective_bic(int k, long n, double ll, double pixels_per_sample) {
  const double n_eff = static_cast<double>(n) / pixels_per_sample;
  return static_cast<double>(free_parameters(k, 2)) * std::log(n_eff) - 2.0 * ll / pixels_per_sample;
}

}  // namespace

ClusterPatch ClusterPatch::from_frame_mask(std::string frame_id, const BinaryMask& frame_mask, const BoundingBox& roi) {
  const BoundingBox box = roi.clamped(frame_mask.width(), frame_mask.height());
  return {std::move(frame_id), box, frame_mask.crop(box)};
}

PointSet ClusterPatch::coordinates() const {
  PointSet pts(foreground(), 2);
  long row = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) pts.row(row++) << bbox.x + x, bbox.y + y;
    }
  }
  return pts;
}

void CountConfig::validate() const {
  if (min_count_area < 0) throw InvalidConfigError("min_count_area must be >= 0");
  if (max_count < 1 || max_count > kMaxClusterCount) throw InvalidConfigError("max_count must be in [1,6]");
  if (restarts < 1) throw InvalidConfigError("restarts must be >= 1");
  if (!(pixels_per_sample >= 1)) throw InvalidConfigError("pixels_per_sample must be >= 1");
  em.validate();
}

CountResult count_cluster(const ClusterPatch& patch, const CountConfig& cfg) {
  cfg.validate();
  CountResult result;
  const long n = patch.foreground();
  if (n == 0 || n < cfg.min_count_area) return result;

  // Fit in coordinates relative to the foreground's integer min corner so the
  // result shifts exactly with the pixels.
  PointSet pts = patch.coordinates();
  const Eigen::RowVector2d origin = pts.colwise().minCoeff();
  pts.rowwise() -= origin;

  double best_bic = std::numeric_limits<double>::infinity();
  std::optional<MixtureModel> best_model;
  const int k_max = static_cast<int>(std::min<long>(cfg.max_count, n));
  for (int k = 1; k <= k_max; ++k) {
    std::optional<FitResult> best_fit;
    for (int r = 0; r < cfg.restarts; ++r) {
      EmConfig em = cfg.em;
      em.rng_seed = cfg.em.rng_seed + 1000003ULL * static_cast<unsigned>(k) + 7919ULL * static_cast<unsigned>(r);
      FitResult fit = fit_gmm(pts, k, em);
      if (!best_fit || fit.log_likelihood > best_fit->log_likelihood) best_fit = std::move(fit);
    }
    const double score = effective_bic(k, n, best_fit->log_likelihood, cfg.pixels_per_sample);
    result.bic_scores[k] = score;
    if (score < best_bic) {
      best_bic = score;
      best_model = best_fit->model;
    }
  }

  result.count = best_model->size();
  for (const auto& g : best_model->components()) {
    result.fruit_models.emplace_back(g.mean() + origin.transpose(), g.covariance());
  }
  return result;
}

std::map<ClusterKey, int> ingest_external_counts(std::istream& in, const std::set<ClusterKey>& known,
                                                 const std::string& source) {
  std::map<ClusterKey, int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (!j.is_object() || !j.contains("cluster_id") || !j.contains("count") || !j["count"].is_number_integer()) {
      throw ParseError(source, lineno, "expected {\"cluster_id\", \"count\"}");
    }
    const std::string id = j["cluster_id"].is_string() ? j["cluster_id"].get<std::string>() : j["cluster_id"].dump();
    const long count = j["count"].get<long>();
    if (count < 0 || count > kMaxClusterCount) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": count " + std::to_string(count) +
                            " outside [0," + std::to_string(kMaxClusterCount) + "]");
    }
    const std::string side = j.value("side", "");
    std::optional<ClusterKey> match;
    for (const auto& k : known) {
      if (k.cluster_id != id || (!side.empty() && k.side != side)) continue;
      if (match) throw ReferenceError(source + ":" + std::to_string(lineno) + ": cluster id '" + id + "' is ambiguous");
      match = k;
    }
    if (!match) throw ReferenceError(source + ":" + std::to_string(lineno) + ": unknown cluster id '" + id + "'");
    out[*match] = static_cast<int>(count);
  }
  return out;
}

std::map<ClusterKey, int> ingest_external_counts(const std::filesystem::path& file, const std::set<ClusterKey>& known) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  return ingest_external_counts(in, known, file.string());
}

nlohmann::json to_json(const CountResult& r) {
  nlohmann::json bics = nlohmann::json::object();
  for (const auto& [k, s] : r.bic_scores) bics[std::to_string(k)] = s;
  nlohmann::json fruits = nlohmann::json::array();
  for (const auto& g : r.fruit_models) fruits.push_back(to_json(g));
  return {{"count", r.count}, {"bic", bics}, {"fruits", fruits}};
}

}  // namespace yieldest
