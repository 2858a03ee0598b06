#include "yieldest/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

constexpr double kSymmetryTolerance = 1e-9;
// Relative eigenvalue threshold below which a covariance is treated as singular.
constexpr double kConditioningLimit = 1e-14;

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// n x k matrix of log(pi_j) + log N(x_i | mu_j, Sigma_j).
Matrix weighted_log_densities(const MixtureModel& model, const PointSet& points) {
  Matrix out(points.rows(), model.size());
  for (int j = 0; j < model.size(); ++j) {
    const double lw = model.weights()[j] > 0 ? std::log(model.weights()[j]) : -std::numeric_limits<double>::infinity();
    out.col(j) = model.component(j).log_pdf_rows(points).array() + lw;
  }
  return out;
}

Matrix sample_covariance(const PointSet& points, const Vector& mean) {
  const Matrix centered = points.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(points.rows());
}

Matrix floored(Matrix cov, double floor) {
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += floor;
  return cov;
}

std::vector<Vector> kmeans_pp_centers(const PointSet& points, int k, std::mt19937_64& rng) {
  const long n = points.rows();
  std::vector<Vector> centers;
  std::uniform_int_distribution<long> pick(0, n - 1);
  centers.push_back(points.row(pick(rng)).transpose());
  Vector d2 = (points.rowwise() - centers.back().transpose()).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    long chosen = 0;
    if (total > 0) {
      double r = unit(rng) * total;
      chosen = n - 1;
      for (long i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.push_back(points.row(chosen).transpose());
    d2 = d2.cwiseMin((points.rowwise() - centers.back().transpose()).rowwise().squaredNorm());
  }
  return centers;
}

MixtureModel kmeans_init(const PointSet& points, int k, const EmConfig& cfg) {
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<Vector> centers = kmeans_pp_centers(points, k, rng);
  const long n = points.rows();
  const int d = static_cast<int>(points.cols());
  std::vector<int> assign(n, 0);

  // A few Lloyd sweeps to settle the seeds.
  for (int iter = 0; iter < 10; ++iter) {
    bool moved = false;
    for (long i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double dist = (points.row(i).transpose() - centers[j]).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = j;
        }
      }
      moved = moved || assign[i] != best;
      assign[i] = best;
    }
    std::vector<Vector> sums(k, Vector::Zero(d));
    std::vector<long> counts(k, 0);
    for (long i = 0; i < n; ++i) {
      sums[assign[i]] += points.row(i).transpose();
      ++counts[assign[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) centers[j] = sums[j] / static_cast<double>(counts[j]);
    }
    if (!moved && iter > 0) break;
  }

  const Vector global_mean = points.colwise().mean().transpose();
  const Matrix global_cov = sample_covariance(points, global_mean);
  std::vector<Gaussian> comps;
  std::vector<double> weights;
  for (int j = 0; j < k; ++j) {
    std::vector<long> members;
    for (long i = 0; i < n; ++i) {
      if (assign[i] == j) members.push_back(i);
    }
    if (members.empty()) {
      comps.emplace_back(centers[j], floored(global_cov, cfg.covariance_floor));
      weights.push_back(1.0 / static_cast<double>(n));
      continue;
    }
    PointSet sub(static_cast<long>(members.size()), d);
    for (std::size_t m = 0; m < members.size(); ++m) sub.row(static_cast<long>(m)) = points.row(members[m]);
    const Vector mean = sub.colwise().mean().transpose();
    comps.emplace_back(mean, floored(sample_covariance(sub, mean), cfg.covariance_floor));
    weights.push_back(static_cast<double>(members.size()));
  }
  double total = 0;
  for (const double w : weights) total += w;
  for (double& w : weights) w /= total;
  return MixtureModel(std::move(comps), std::move(weights));
}

}  // namespace

Gaussian::Gaussian(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const long d = mean_.size();
  if (d < 1) throw ValidationError("gaussian dimension must be >= 1");
  if (covariance_.rows() != d || covariance_.cols() != d) {
    throw ValidationError("covariance shape does not match mean dimension");
  }
  if (!mean_.allFinite() || !covariance_.allFinite()) throw NumericalError("non-finite gaussian parameters");
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() >= kSymmetryTolerance) {
    throw ValidationError("covariance is not symmetric");
  }
  llt_.compute(covariance_);
  if (llt_.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double Gaussian::log_pdf(const Eigen::Ref<const Vector>& x) const {
  const Vector z = llt_.matrixL().solve(x - mean_);
  return -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det_ + z.squaredNorm());
}

Vector Gaussian::log_pdf_rows(const PointSet& points) const {
  const Matrix centered = (points.rowwise() - mean_.transpose()).transpose();
  const Matrix z = llt_.matrixL().solve(centered);
  const double c = static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det_;
  return (-0.5 * (z.colwise().squaredNorm().array() + c)).transpose();
}

MixtureModel::MixtureModel(std::vector<Gaussian> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw ValidationError("mixture needs at least one component");
  if (components_.size() != weights_.size()) throw ValidationError("mixture weight count mismatch");
  double total = 0;
  for (const double w : weights_) {
    if (!(w >= 0)) throw ValidationError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) throw ValidationError("mixture components differ in dimension");
  }
}

void EmConfig::validate() const {
  if (!(tolerance > 0)) throw InvalidConfigError("EM tolerance must be > 0");
  if (max_iterations < 1) throw InvalidConfigError("EM max_iterations must be >= 1");
  if (!(covariance_floor >= 0)) throw InvalidConfigError("EM covariance_floor must be >= 0");
  if (init == EmInit::Provided && !initial) throw InvalidConfigError("EM init=provided requires an initial model");
}

FitResult fit_gmm(const PointSet& points, int k, const EmConfig& cfg) {
  cfg.validate();
  if (k < 1) throw InvalidConfigError("component count must be >= 1");
  if (points.cols() < 1) throw InvalidConfigError("points must have dimension >= 1");
  if (points.rows() < k) {
    throw InsufficientDataError("need at least " + std::to_string(k) + " points, got " +
                                std::to_string(points.rows()));
  }
  if (!points.allFinite()) throw ValidationError("points contain non-finite values");

  const long n = points.rows();
  const int d = static_cast<int>(points.cols());

  MixtureModel model = [&] {
    if (cfg.init == EmInit::Provided) {
      if (cfg.initial->size() != k || cfg.initial->dim() != d) {
        throw InvalidConfigError("provided initial model does not match k or dimension");
      }
      return *cfg.initial;
    }
    return kmeans_init(points, k, cfg);
  }();

  FitResult result{model, 0.0, {}, 0, false};
  Matrix log_r = weighted_log_densities(model, points);
  Vector lse(n);
  for (long i = 0; i < n; ++i) lse[i] = log_sum_exp(log_r.row(i).transpose());
  double ll = lse.sum();
  result.history.push_back(ll);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    // M-step from the current responsibilities.
    const Matrix resp = (log_r.colwise() - lse).array().exp().matrix();
    std::vector<Gaussian> comps;
    std::vector<double> weights;
    comps.reserve(k);
    for (int j = 0; j < k; ++j) {
      const double nk = resp.col(j).sum();
      if (nk <= std::numeric_limits<double>::min() * static_cast<double>(n)) {
        comps.push_back(model.component(j));
        weights.push_back(0.0);
        continue;
      }
      const Vector mean = (points.transpose() * resp.col(j)) / nk;
      const Matrix centered = points.rowwise() - mean.transpose();
      const Matrix cov = (centered.transpose() * resp.col(j).asDiagonal() * centered) / nk;
      comps.emplace_back(mean, floored(cov, cfg.covariance_floor));
      weights.push_back(nk / static_cast<double>(n));
    }
    double total = 0;
    for (const double w : weights) total += w;
    for (double& w : weights) w /= total;
    model = MixtureModel(std::move(comps), std::move(weights));

    // E-step.
    log_r = weighted_log_densities(model, points);
    for (long i = 0; i < n; ++i) lse[i] = log_sum_exp(log_r.row(i).transpose());
    const double next = lse.sum();
    result.history.push_back(next);
    result.iterations = iter + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < cfg.tolerance * std::max(std::abs(ll), 1e-300)) {
      result.converged = true;
      break;
    }
  }

  result.model = std::move(model);
  result.log_likelihood = ll;
  return result;
}

Matrix responsibilities(const MixtureModel& model, const PointSet& points) {
  if (points.rows() > 0 && points.cols() != model.dim()) throw ValidationError("point dimension mismatch");
  Matrix log_r = weighted_log_densities(model, points);
  for (long i = 0; i < log_r.rows(); ++i) {
    const double m = log_sum_exp(log_r.row(i).transpose());
    log_r.row(i) = (log_r.row(i).array() - m).exp();
    log_r.row(i) /= log_r.row(i).sum();
  }
  return log_r;
}

Vector log_densities(const MixtureModel& model, const PointSet& points) {
  if (points.rows() == 0) return Vector(0);
  if (points.cols() != model.dim()) throw ValidationError("point dimension mismatch");
  const Matrix log_r = weighted_log_densities(model, points);
  Vector out(points.rows());
  for (long i = 0; i < points.rows(); ++i) out[i] = log_sum_exp(log_r.row(i).transpose());
  return out;
}

double log_likelihood(const MixtureModel& model, const PointSet& points) {
  return points.rows() == 0 ? 0.0 : log_densities(model, points).sum();
}

double kl_gaussian(const Gaussian& p, const Gaussian& q) {
  if (p.dim() != q.dim()) throw NumericalError("KL between gaussians of different dimension");
  if (p == q) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(q.covariance(), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > kConditioningLimit * std::max(hi, 1.0))) {
    throw NumericalError("KL: covariance of q is numerically singular");
  }
  const int d = p.dim();
  const Vector diff = q.mean() - p.mean();
  const double trace = q.solve(p.covariance()).trace();
  const Vector solved = q.solve(diff);
  const double maha = diff.dot(solved);
  const double kl = 0.5 * (trace + maha - d + q.log_det() - p.log_det());
  return std::max(0.0, kl);
}

long free_parameters(int k, int d) {
  return static_cast<long>(k) * (d + static_cast<long>(d) * (d + 1) / 2) + (k - 1);
}

double bic(int k, int d, long n, double ll) {
  if (n < 1) throw InsufficientDataError("BIC needs at least one point");
  return static_cast<double>(free_parameters(k, d)) * std::log(static_cast<double>(n)) - 2.0 * ll;
}

double bic(const MixtureModel& model, const PointSet& points, double ll) {
  return bic(model.size(), model.dim(), static_cast<long>(points.rows()), ll);
}

nlohmann::json to_json(const Gaussian& g) {
  nlohmann::json cov = nlohmann::json::array();
  for (int r = 0; r < g.dim(); ++r) {
    std::vector<double> row;
    for (int c = 0; c < g.dim(); ++c) row.push_back(g.covariance()(r, c));
    cov.push_back(row);
  }
  return {{"dim", g.dim()},
          {"mean", std::vector<double>(g.mean().data(), g.mean().data() + g.dim())},
          {"covariance", cov}};
}

Gaussian gaussian_from_json(const nlohmann::json& j) {
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const int d = static_cast<int>(mean.size());
    if (j.contains("dim") && j.at("dim").get<int>() != d) throw ValidationError("gaussian dim mismatch");
    Matrix cov(d, d);
    const auto& rows = j.at("covariance");
    if (static_cast<int>(rows.size()) != d) throw ValidationError("covariance row count mismatch");
    for (int r = 0; r < d; ++r) {
      const auto row = rows.at(r).get<std::vector<double>>();
      if (static_cast<int>(row.size()) != d) throw ValidationError("covariance column count mismatch");
      for (int c = 0; c < d; ++c) cov(r, c) = row[c];
    }
    return Gaussian(Eigen::Map<const Vector>(mean.data(), d), cov);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed gaussian: ") + e.what());
  }
}

nlohmann::json to_json(const MixtureModel& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components()) comps.push_back(to_json(c));
  return {{"weights", m.weights()}, {"components", comps}};
}

MixtureModel mixture_from_json(const nlohmann::json& j) {
  try {
    std::vector<Gaussian> comps;
    for (const auto& c : j.at("components")) comps.push_back(gaussian_from_json(c));
    return MixtureModel(std::move(comps), j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed mixture: ") + e.what());
  }
}

PointSet to_point_set(const std::vector<Vector>& points, int dim) {
  PointSet out(static_cast<long>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<long>(i)) = points[i].transpose();
  return out;
}

}  // namespace yieldest
