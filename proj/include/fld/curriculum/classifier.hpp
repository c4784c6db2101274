#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fld/curriculum/gmm.hpp"
#include "fld/model/baselines.hpp"

namespace fld::curriculum {

struct OracleClassifierConfig {
  std::vector<std::size_t> hidden{1024, 512};
  std::size_t epochs = 20;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Region-label predictor over theta: standardized inputs, ELU MLP, softmax
/// cross-entropy. Only used to colour curriculum exports.
class OracleClassifier {
 public:
  OracleClassifier() = default;

  /// Labels must lie in [0, classes). Returns the mean loss of each epoch.
  std::vector<double> train(const Points& thetas, const std::vector<int>& labels, std::size_t classes,
                            const OracleClassifierConfig& config = {});

  bool trained() const { return classes_ > 0; }
  std::size_t classes() const { return classes_; }
  /// Softmax probabilities, one row per point.
  Eigen::MatrixXd probabilities(const Points& thetas) const;
  std::vector<int> predict(const Points& thetas) const;
  double accuracy(const Points& thetas, const std::vector<int>& labels) const;

 private:
  numerics::DenseArray logits(const Points& thetas) const;

  model::Mlp net_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  std::size_t classes_ = 0;
};

}  // namespace fld::curriculum
