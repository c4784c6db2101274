#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace fld::curriculum {

using Points = Eigen::MatrixXd;  // n x dims, one point per row

/// Full-covariance Gaussian mixture.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                  std::vector<Eigen::MatrixXd> covariances);

  std::size_t components() const noexcept { return weights_.size(); }
  std::size_t dims() const noexcept { return means_.empty() ? 0 : static_cast<std::size_t>(means_[0].size()); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const noexcept { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const noexcept { return covariances_; }

  /// log N(x | mean_k, cov_k) for every component.
  Eigen::VectorXd component_log_densities(const Eigen::VectorXd& x) const;
  double log_density(const Eigen::VectorXd& x) const;
  double log_likelihood(const Points& points) const;
  Eigen::VectorXd responsibilities(const Eigen::VectorXd& x) const;

  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  /// Draw from component k restricted to the leading `dims` coordinates
  /// (its marginal there).
  Eigen::VectorXd sample_component(std::size_t k, std::mt19937_64& rng, std::size_t dims = 0) const;

 private:
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> chol_;  // lower Cholesky factors
  std::vector<double> log_norm_;
};

struct EmOptions {
  std::size_t max_iter = 200;
  double tol = 1e-6;
  /// Added to every covariance diagonal.
  double reg = 1e-6;
};

struct EmFit {
  GaussianMixture mixture;
  /// Log-likelihood before each M-step, then of the final parameters.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  double final_log_likelihood() const { return log_likelihood.back(); }
};

/// EM from a k-means++ start. Throws ConfigError when k exceeds the number
/// of points.
EmFit gmm_fit_em(const Points& points, std::size_t k, std::mt19937_64& rng, const EmOptions& options = {});

/// k D + k D (D + 1) / 2 + (k - 1)
double gmm_parameter_count(std::size_t k, std::size_t dims);
/// -2 log L + params ln n
double gmm_bic(const EmFit& fit, std::size_t n);

struct BicSelection {
  EmFit fit;
  std::size_t k = 0;
  std::vector<std::size_t> tried;
  std::vector<double> bic;
};

/// Index of the lowest BIC; the first one wins a tie.
std::size_t lowest_bic_index(const std::vector<double>& bic);

/// Fits k_min..k_max (capped at n) and keeps the lowest BIC; ties go to the
/// smaller k.
BicSelection gmm_bic_select(const Points& points, std::size_t k_min, std::size_t k_max, std::mt19937_64& rng,
                            const EmOptions& options = {});

}  // namespace fld::curriculum
