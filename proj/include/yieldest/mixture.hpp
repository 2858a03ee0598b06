#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace yieldest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Rows of a `PointSet` are samples, columns are dimensions.
using PointSet = Eigen::MatrixXd;

/// Multivariate normal with a cached Cholesky factor. The covariance must be
/// symmetric (to 1e-9) and positive definite.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  double log_det() const { return log_det_; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// log N(x_i | mean, cov) for every row of `points`.
  Vector log_pdf_rows(const PointSet& points) const;
  /// Solves cov * X = rhs.
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

  friend bool operator==(const Gaussian& a, const Gaussian& b) {
    return a.mean_ == b.mean_ && a.covariance_ == b.covariance_;
  }

 private:
  Vector mean_;
  Matrix covariance_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0;
};

class MixtureModel {
 public:
  MixtureModel(std::vector<Gaussian> components, std::vector<double> weights);

  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.front().dim(); }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(int i) const { return components_.at(i); }
  const std::vector<double>& weights() const { return weights_; }

  friend bool operator==(const MixtureModel&, const MixtureModel&) = default;

 private:
  std::vector<Gaussian> components_;
  std::vector<double> weights_;
};

enum class EmInit { KMeansPlusPlus, Provided };

struct EmConfig {
  int max_iterations = 100;
  double tolerance = 1e-4;  // relative log-likelihood improvement
  std::uint64_t rng_seed = 20190901;
  double covariance_floor = 1e-6;
  EmInit init = EmInit::KMeansPlusPlus;
  std::optional<MixtureModel> initial;  // required when init == Provided

  void validate() const;
};

struct FitResult {
  MixtureModel model;
  double log_likelihood = 0;
  /// Log-likelihood of every parameter set visited, initial one first.
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
};

/// Expectation-maximisation for a full-covariance mixture of `k` components.
/// Throws InsufficientDataError when there are fewer points than components.
FitResult fit_gmm(const PointSet& points, int k, const EmConfig& cfg);

/// E-step: n x k matrix whose rows are posterior component probabilities.
Matrix responsibilities(const MixtureModel& model, const PointSet& points);

/// Per-point log mixture density (log-sum-exp over components).
Vector log_densities(const MixtureModel& model, const PointSet& points);
double log_likelihood(const MixtureModel& model, const PointSet& points);

/// KL(p || q) in closed form. Throws NumericalError if q's covariance is
/// numerically singular or the dimensions differ.
double kl_gaussian(const Gaussian& p, const Gaussian& q);

/// Free parameters of a k-component full-covariance mixture in d dimensions.
long free_parameters(int k, int d);
double bic(int k, int d, long n, double log_likelihood);
double bic(const MixtureModel& model, const PointSet& points, double log_likelihood);

nlohmann::json to_json(const Gaussian& g);
Gaussian gaussian_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MixtureModel& m);
MixtureModel mixture_from_json(const nlohmann::json& j);

/// Stack a list of vectors into a PointSet.
PointSet to_point_set(const std::vector<Vector>& points, int dim);

}  // namespace yieldest
