#include "fld/curriculum/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fld/common/error.hpp"
#include "fld/numerics/optim.hpp"

namespace fld::curriculum {

using numerics::DenseArray;

namespace {

// row-wise log-softmax, in place
void log_softmax(DenseArray& z) {
  const std::size_t B = z.dim(0), K = z.dim(1);
  for (std::size_t i = 0; i < B; ++i) {
    double m = z.at(i, 0);
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, z.at(i, k));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z.at(i, k) - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < K; ++k) z.at(i, k) -= lse;
  }
}

}  // namespace

std::vector<double> OracleClassifier::train(const Points& X, const std::vector<int>& labels, std::size_t classes,
                                            const OracleClassifierConfig& cfg) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || labels.size() != n) throw ShapeError("classifier: need one label per point");
  if (classes < 2) throw ConfigError("classifier: need at least two classes");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw ConfigError("classifier: label out of range");
  if (cfg.batch == 0 || cfg.epochs == 0) throw ConfigError("classifier: batch and epochs must be positive");

  mean_ = X.colwise().mean();
  const Points c = X.rowwise() - mean_;
  scale_ = (c.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (auto& s : scale_) s = s > 1e-12 ? 1.0 / s : 1.0;
  classes_ = classes;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> sizes{static_cast<std::size_t>(X.cols())};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(classes);
  net_ = model::Mlp("oracle", sizes, numerics::Activation::elu, numerics::Activation::none, rng);
  auto params = net_.parameters();
  numerics::Adam adam({cfg.lr});

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  const std::size_t D = static_cast<std::size_t>(X.cols());
  for (std::size_t ep = 0; ep < cfg.epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t s = 0; s < n; s += cfg.batch) {
      const std::size_t B = std::min(cfg.batch, n - s);
      DenseArray x({B, D});
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < D; ++j)
          x.at(i, j) = (X(static_cast<Eigen::Index>(order[s + i]), static_cast<Eigen::Index>(j)) - mean_(static_cast<Eigen::Index>(j))) *
                       scale_(static_cast<Eigen::Index>(j));
      model::Mlp::Cache cache;
      DenseArray z = net_.forward(x, cache);
      log_softmax(z);
      // d(mean NLL)/dz = softmax - onehot, over B
      DenseArray g({B, classes});
      for (std::size_t i = 0; i < B; ++i) {
        const auto y = static_cast<std::size_t>(labels[order[s + i]]);
        total -= z.at(i, y);
        for (std::size_t k = 0; k < classes; ++k)
          g.at(i, k) = (std::exp(z.at(i, k)) - (k == y ? 1.0 : 0.0)) / static_cast<double>(B);
      }
      numerics::zero_grads(params);
      net_.backward(cache, g);
      adam.step(params);
    }
    history.push_back(total / static_cast<double>(n));
  }
  return history;
}

DenseArray OracleClassifier::logits(const Points& X) const {
  if (!trained()) throw ConfigError("classifier: not trained");
  if (X.cols() != mean_.size()) throw ShapeError("classifier: theta dimension mismatch");
  const auto n = static_cast<std::size_t>(X.rows()), D = static_cast<std::size_t>(X.cols());
  DenseArray x({n, D});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const auto r = static_cast<Eigen::Index>(i), cj = static_cast<Eigen::Index>(j);
      x.at(i, j) = (X(r, cj) - mean_(cj)) * scale_(cj);
    }
  return net_.forward(x);
}

Eigen::MatrixXd OracleClassifier::probabilities(const Points& X) const {
  DenseArray z = logits(X);
  log_softmax(z);
  Eigen::MatrixXd p(X.rows(), static_cast<Eigen::Index>(classes_));
  for (std::size_t i = 0; i < z.dim(0); ++i)
    for (std::size_t k = 0; k < classes_; ++k) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::exp(z.at(i, k));
  return p;
}

std::vector<int> OracleClassifier::predict(const Points& X) const {
  const DenseArray z = logits(X);
  std::vector<int> out;
  for (std::size_t i = 0; i < z.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes_; ++k)
      if (z.at(i, k) > z.at(i, best)) best = k;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

double OracleClassifier::accuracy(const Points& X, const std::vector<int>& labels) const {
  if (labels.size() != static_cast<std::size_t>(X.rows())) throw ShapeError("classifier: need one label per point");
  if (labels.empty()) return 0.0;
  const auto p = predict(X);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

}  // namespace fld::curriculum
