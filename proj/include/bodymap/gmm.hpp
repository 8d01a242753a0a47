#pragma once

// Gaussian mixture model over homunculus activations, trained with EM.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bodymap/random.hpp"

namespace bodymap {

enum class CovarianceType { full, diagonal };

struct EmConfig {
  double tol = 1e-6;              // stop when the relative log-likelihood gain drops below this
  std::size_t max_iters = 300;
  double reg_scale = 1e-2;        // eps = reg_scale * trace(global covariance) / D, the variance floor
  std::size_t n_init = 5;         // restarts, best log-likelihood kept
  CovarianceType covariance = CovarianceType::diagonal;
};

struct FitInfo {
  std::uint64_t seed = 0;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  double regularization = 0.0;
  std::size_t restart = 0;             // which restart won
  std::vector<double> log_likelihoods;  // per iteration, winning restart
};

class GmmModel {
 public:
  GmmModel() = default;

  /// Validates (simplex weights, symmetric covariances, matching sizes) and
  /// factorizes every covariance. Throws std::invalid_argument on malformed
  /// input and NumericalError if a covariance is not positive definite.
  GmmModel(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
           std::vector<Eigen::MatrixXd> covariances, CovarianceType type);

  std::size_t components() const { return weights_.size(); }
  std::size_t dim() const { return means_.empty() ? 0 : static_cast<std::size_t>(means_.front().size()); }
  CovarianceType covariance_type() const { return type_; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

  /// log r_j + log l(x | theta_j) for every component.
  Eigen::VectorXd weighted_log_densities(const Eigen::VectorXd& x) const;

  /// Column n holds weighted_log_densities(points[n]).
  Eigen::MatrixXd weighted_log_densities(std::span<const Eigen::VectorXd> points) const;

  /// Same, for points stored as the columns of a D x N matrix.
  Eigen::MatrixXd weighted_log_densities_columns(const Eigen::MatrixXd& points) const;

  FitInfo info;

 private:
  struct Factor {
    Eigen::MatrixXd chol;      // lower Cholesky factor (full)
    Eigen::VectorXd inv_sd;    // 1 / sqrt(diag) (diagonal)
    double log_norm = 0.0;     // -0.5 * (D log 2pi + log |S|)
  };

  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Factor> factors_;
  CovarianceType type_ = CovarianceType::full;
};

/// Stable log(sum(exp(v))); -inf for an empty or all -inf input.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// log of the D-dimensional normal density at x, via a Cholesky factor of the
/// covariance. Throws NumericalError if the covariance is not positive definite.
double gaussian_logdensity(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance);

/// Responsibilities y_j proportional to r_j l(x | theta_j). Throws
/// NumericalError when every component density underflows.
Eigen::VectorXd posteriors(const GmmModel& model, const Eigen::VectorXd& x);

/// Total log-likelihood of the (optionally weighted) data.
double log_likelihood(const GmmModel& model, std::span<const Eigen::VectorXd> points,
                      std::span<const double> weights = {});

/// Exact duplicates collapsed into one weighted point, in order of first
/// appearance. source[n] is the distinct index of input n.
struct DistinctPoints {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> counts;
  std::vector<std::size_t> source;
};

DistinctPoints deduplicate(std::span<const Eigen::VectorXd> data);

/// EM on weighted points. k-means++ seeding of the means, covariances start
/// at the global covariance + eps I, weights uniform. Each M-step is the
/// likelihood optimum subject to covariance eigenvalues >= eps (sample
/// eigenvalues clipped at eps), so the log-likelihood never decreases. Throws
/// std::invalid_argument if J == 0 or the total weight is below J, FitError
/// if every restart fails numerically.
GmmModel fit_em_weighted(std::span<const Eigen::VectorXd> points, std::span<const double> weights,
                         std::size_t components, const EmConfig& config, Rng& rng);

/// EM on raw data (duplicates are merged first; the fit is identical to EM on
/// the expanded data). Throws std::invalid_argument if data.size() < J.
GmmModel fit_em(std::span<const Eigen::VectorXd> data, std::size_t components, const EmConfig& config,
                Rng& rng);

/// Most probable component per point; exact ties go to the lower index.
std::vector<std::size_t> assign_hard(const GmmModel& model, std::span<const Eigen::VectorXd> data);

void write_model(std::ostream& out, const GmmModel& model);
GmmModel read_model(std::istream& in);

}  // namespace bodymap
