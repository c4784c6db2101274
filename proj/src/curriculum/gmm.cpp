#include "fld/curriculum/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fld/common/error.hpp"

namespace fld::curriculum {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  const std::size_t k = weights_.size();
  if (k == 0 || means_.size() != k || covariances_.size() != k) throw ShapeError("GaussianMixture: component count mismatch");
  const Eigen::Index D = means_[0].size();
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw NumericError("GaussianMixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw NumericError("GaussianMixture: weights sum to " + std::to_string(total));
  for (std::size_t c = 0; c < k; ++c) {
    if (means_[c].size() != D || covariances_[c].rows() != D || covariances_[c].cols() != D) {
      throw ShapeError("GaussianMixture: dimension mismatch in component " + std::to_string(c));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(covariances_[c]);
    if (llt.info() != Eigen::Success) {
      throw NumericError("GaussianMixture: covariance " + std::to_string(c) + " is not positive definite");
    }
    Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) logdet += 2.0 * std::log(L(i, i));
    chol_.push_back(std::move(L));
    log_norm_.push_back(-0.5 * (static_cast<double>(D) * std::log(2.0 * std::numbers::pi) + logdet));
  }
}

Eigen::VectorXd GaussianMixture::component_log_densities(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(components()));
  for (std::size_t c = 0; c < components(); ++c) {
    const Eigen::VectorXd z = chol_[c].triangularView<Eigen::Lower>().solve(x - means_[c]);
    out(static_cast<Eigen::Index>(c)) = log_norm_[c] - 0.5 * z.squaredNorm();
  }
  return out;
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v = component_log_densities(x);
  for (std::size_t c = 0; c < components(); ++c) v(static_cast<Eigen::Index>(c)) += std::log(weights_[c]);
  return log_sum_exp(v);
}

double GaussianMixture::log_likelihood(const Points& points) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) s += log_density(points.row(i).transpose());
  return s;
}

Eigen::VectorXd GaussianMixture::responsibilities(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v = component_log_densities(x);
  for (std::size_t c = 0; c < components(); ++c) v(static_cast<Eigen::Index>(c)) += std::log(weights_[c]);
  return (v.array() - log_sum_exp(v)).exp();
}

Eigen::VectorXd GaussianMixture::sample(std::mt19937_64& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  return sample_component(pick(rng), rng);
}

Eigen::VectorXd GaussianMixture::sample_component(std::size_t k, std::mt19937_64& rng, std::size_t dims) const {
  if (k >= components()) throw ConfigError("GaussianMixture: no component " + std::to_string(k));
  const auto D = static_cast<Eigen::Index>(dims == 0 ? this->dims() : dims);
  if (D > means_[k].size()) throw ShapeError("GaussianMixture: marginal larger than the mixture");
  std::normal_distribution<double> n;
  Eigen::VectorXd z(D);
  for (Eigen::Index i = 0; i < D; ++i) z(i) = n(rng);
  // The leading block of a lower Cholesky factor is the factor of the
  // leading covariance block.
  return means_[k].head(D) + chol_[k].topLeftCorner(D, D) * z;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Eigen::Index> kmeanspp(const Points& X, std::size_t k, std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> centers;
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.push_back(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    const auto last = X.row(centers.back());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (X.row(i) - last).squaredNorm());
      total += d2[static_cast<std::size_t>(i)];
    }
    if (total <= 0.0) {
      centers.push_back(first(rng));
      continue;
    }
    std::discrete_distribution<Eigen::Index> pick(d2.begin(), d2.end());
    centers.push_back(pick(rng));
  }
  return centers;
}

GaussianMixture m_step(const Points& X, const Eigen::MatrixXd& resp, double reg) {
  const Eigen::Index n = X.rows(), D = X.cols(), k = resp.cols();
  std::vector<double> w;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> cov;
  for (Eigen::Index c = 0; c < k; ++c) {
    double nk = resp.col(c).sum();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(D);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(D, D);
    if (nk > 1e-12) {
      m = (X.transpose() * resp.col(c)) / nk;
      const Eigen::MatrixXd Y = X.rowwise() - m.transpose();
      S = (Y.transpose() * resp.col(c).asDiagonal() * Y) / nk;
    } else {
      nk = 1e-12;
      m = X.colwise().mean().transpose();
    }
    S = 0.5 * (S + S.transpose());
    S.diagonal().array() += reg;
    w.push_back(nk / static_cast<double>(n));
    mu.push_back(std::move(m));
    cov.push_back(std::move(S));
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return {std::move(w), std::move(mu), std::move(cov)};
}

// E-step: responsibilities and the log-likelihood of the current parameters.
double e_step(const GaussianMixture& g, const Points& X, Eigen::MatrixXd& resp) {
  const Eigen::Index k = static_cast<Eigen::Index>(g.components());
  resp.resize(X.rows(), k);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd v = g.component_log_densities(X.row(i).transpose());
    for (Eigen::Index c = 0; c < k; ++c) v(c) += std::log(std::max(g.weights()[static_cast<std::size_t>(c)], 1e-300));
    const double lse = log_sum_exp(v);
    ll += lse;
    resp.row(i) = (v.array() - lse).exp().transpose();
  }
  return ll;
}

}  // namespace

EmFit gmm_fit_em(const Points& points, std::size_t k, std::mt19937_64& rng, const EmOptions& options) {
  const Eigen::Index n = points.rows();
  if (k == 0) throw ConfigError("gmm_fit_em: k must be positive");
  if (static_cast<Eigen::Index>(k) > n) {
    throw ConfigError("gmm_fit_em: " + std::to_string(k) + " components need at least as many points, got " +
                      std::to_string(n));
  }
  if (!(options.reg > 0.0)) throw ConfigError("gmm_fit_em: reg must be positive");
  EmFit fit;
  const Eigen::VectorXd spread = (points.rowwise() - points.colwise().mean()).colwise().squaredNorm();
  if (k > 1 && spread.maxCoeff() <= 0.0) {
    fit.warnings.push_back("all points identical; components coincide and covariances are the regularizer only");
  }

  // hard assignment to the nearest k-means++ seed
  const auto seeds = kmeanspp(points, k, rng);
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = (points.row(i) - points.row(seeds[c])).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<Eigen::Index>(c);
      }
    }
    resp(i, best) = 1.0;
  }
  fit.mixture = m_step(points, resp, options.reg);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const double ll = e_step(fit.mixture, points, resp);
    fit.log_likelihood.push_back(ll);
    fit.iterations = it + 1;
    if (it > 0) {
      const double prev = fit.log_likelihood[it - 1];
      if (std::abs(ll - prev) <= options.tol * std::max(1.0, std::abs(prev))) {
        fit.converged = true;
        break;
      }
    }
    fit.mixture = m_step(points, resp, options.reg);
  }
  if (!fit.converged) {
    fit.log_likelihood.push_back(fit.mixture.log_likelihood(points));
  }
  return fit;
}

double gmm_parameter_count(std::size_t k, std::size_t dims) {
  const double K = static_cast<double>(k), D = static_cast<double>(dims);
  return K * D + K * D * (D + 1.0) / 2.0 + (K - 1.0);
}

double gmm_bic(const EmFit& fit, std::size_t n) {
  return -2.0 * fit.final_log_likelihood() +
         gmm_parameter_count(fit.mixture.components(), fit.mixture.dims()) * std::log(static_cast<double>(n));
}

std::size_t lowest_bic_index(const std::vector<double>& bic) {
  if (bic.empty()) throw ConfigError("lowest_bic_index: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < bic.size(); ++i)
    if (bic[i] < bic[best]) best = i;
  return best;
}

BicSelection gmm_bic_select(const Points& points, std::size_t k_min, std::size_t k_max, std::mt19937_64& rng,
                            const EmOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k_min == 0 || k_max < k_min) throw ConfigError("gmm_bic_select: invalid component range");
  if (n < k_min) {
    throw ConfigError("gmm_bic_select: " + std::to_string(n) + " points cannot support " + std::to_string(k_min) +
                      " components");
  }
  BicSelection sel;
  std::vector<EmFit> fits;
  for (std::size_t k = k_min; k <= std::min(k_max, n); ++k) {
    fits.push_back(gmm_fit_em(points, k, rng, options));
    sel.tried.push_back(k);
    sel.bic.push_back(gmm_bic(fits.back(), n));
  }
  const std::size_t i = lowest_bic_index(sel.bic);
  sel.k = sel.tried[i];
  sel.fit = std::move(fits[i]);
  return sel;
}

}  // namespace fld::curriculum
