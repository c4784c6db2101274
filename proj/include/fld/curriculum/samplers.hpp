#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fld/curriculum/gmm.hpp"

namespace fld::curriculum {

using Theta = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// buffers
// ---------------------------------------------------------------------------

struct SkillPerformanceRecord {
  Theta theta;
  double performance = 0.0;  // in [0, 1]
  std::size_t timestamp = 0;
  /// Learning progress measured when the record was inserted.
  double alp = 0.0;
};

/// FIFO of (theta, performance) records; the oldest goes first when full.
class SkillPerformanceBuffer {
 public:
  explicit SkillPerformanceBuffer(std::size_t capacity = 5000);

  void push(SkillPerformanceRecord record);
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return records_.empty(); }
  const SkillPerformanceRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Index of the record nearest to `theta` (Euclidean, exact scan; first
  /// one wins on ties), or nullopt when empty.
  std::optional<std::size_t> nearest(const Theta& theta) const;

 private:
  std::size_t capacity_;
  std::deque<SkillPerformanceRecord> records_;
};

/// |r_new - r_old| against the nearest stored theta; r_new itself when the
/// buffer is empty.
double alp_compute(const Theta& theta, double r_new, const SkillPerformanceBuffer& buffer);

/// Encoded corpus points for the offline sampler, FIFO at capacity.
class ThetaBuffer {
 public:
  explicit ThetaBuffer(std::size_t capacity = 20000);

  void push(Theta theta);
  void push_all(const Points& points);
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Theta& operator[](std::size_t i) const { return points_[i]; }
  Points to_points() const;

 private:
  std::size_t capacity_;
  std::deque<Theta> points_;
};

// ---------------------------------------------------------------------------
// confidence region
// ---------------------------------------------------------------------------

/// Per-dimension [mean - k sigma, mean + k sigma] box of the encoded corpus.
struct ConfidenceBox {
  Theta mean;
  Theta sigma;
  double k = 2.0;

  static ConfidenceBox from_points(const Points& corpus, double k = 2.0);

  std::size_t dims() const { return static_cast<std::size_t>(mean.size()); }
  bool calibrated() const { return mean.size() > 0; }
  Theta lower() const { return mean - k * sigma; }
  Theta upper() const { return mean + k * sigma; }
  double mean_width() const;
  Theta clip(const Theta& theta) const;
  bool contains(const Theta& theta) const;
};

// ---------------------------------------------------------------------------
// samplers
// ---------------------------------------------------------------------------

enum class SamplerKind { offline, gmm, random, alpgmm };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view name);

Theta offline_sample(const ThetaBuffer& buffer, std::mt19937_64& rng);
/// Uniform in the box; a zero-width dimension stays at its mean.
Theta random_sample(const ConfidenceBox& box, std::mt19937_64& rng);

/// Chooses an arm from non-negative utilities.
using ArmSelector = std::function<std::size_t(std::span<const double> utilities, std::mt19937_64& rng)>;
/// Probability proportional to utility.
std::size_t proportional_arm(std::span<const double> utilities, std::mt19937_64& rng);

struct AlpGmmOptions {
  double random_sample_rate = 0.2;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t update_interval = 50;
  /// Most recent buffer records each refit sees.
  std::size_t fit_window = 250;
  double utility_floor = 1e-6;
  EmOptions em{100, 1e-4, 1e-6};
  ArmSelector select_arm = proportional_arm;
};

/// One (theta, alp) observation.
struct AlpPoint {
  Theta theta;
  double alp = 0.0;
};

struct AlpGmmState {
  AlpGmmOptions options;
  ConfidenceBox box;
  /// Over (theta, scaled alp); empty until the first successful fit.
  std::optional<GaussianMixture> mixture;
  /// Mean alp per component in alp units, floored.
  std::vector<double> utilities;
  /// alp -> [0, box.mean_width()] via (alp - alp_min) * alp_scale.
  double alp_min = 0.0;
  double alp_scale = 1.0;
  std::size_t fits = 0;

  AlpGmmState() = default;
  AlpGmmState(ConfidenceBox region, AlpGmmOptions opts = {});
};

Theta alpgmm_sample(const AlpGmmState& state, std::mt19937_64& rng);
/// Refits on `points`. Returns false (mixture kept) with fewer points than
/// k_min.
bool alpgmm_update(AlpGmmState& state, std::span<const AlpPoint> points, std::mt19937_64& rng);

/// Common interface used by the curriculum loop.
class SkillSampler {
 public:
  virtual ~SkillSampler() = default;
  virtual SamplerKind kind() const = 0;
  virtual Theta sample(std::mt19937_64& rng) = 0;
  /// Called every update interval with the performance buffer; returns true
  /// when the sampler changed.
  virtual bool update(const SkillPerformanceBuffer&, std::mt19937_64&) {
    return false;
  }
  virtual std::size_t update_interval() const { return 0; }
};

class OfflineSampler final : public SkillSampler {
 public:
  explicit OfflineSampler(ThetaBuffer buffer);
  SamplerKind kind() const override { return SamplerKind::offline; }
  Theta sample(std::mt19937_64& rng) override { return offline_sample(buffer_, rng); }

 private:
  ThetaBuffer buffer_;
};

class GmmSampler final : public SkillSampler {
 public:
  /// Fits `components` (capped at the corpus size) by EM.
  GmmSampler(const Points& corpus, std::size_t components, std::mt19937_64& rng, const EmOptions& em = {});
  SamplerKind kind() const override { return SamplerKind::gmm; }
  Theta sample(std::mt19937_64& rng) override { return mixture_.sample(rng); }
  const GaussianMixture& mixture() const { return mixture_; }

 private:
  GaussianMixture mixture_;
};

class RandomSampler final : public SkillSampler {
 public:
  explicit RandomSampler(ConfidenceBox box);
  SamplerKind kind() const override { return SamplerKind::random; }
  Theta sample(std::mt19937_64& rng) override { return random_sample(box_, rng); }

 private:
  ConfidenceBox box_;
};

class AlpGmmSampler final : public SkillSampler {
 public:
  AlpGmmSampler(ConfidenceBox box, AlpGmmOptions options = {});
  SamplerKind kind() const override { return SamplerKind::alpgmm; }
  Theta sample(std::mt19937_64& rng) override { return alpgmm_sample(state_, rng); }
  /// Refits on the newest fit_window records.
  bool update(const SkillPerformanceBuffer& buffer, std::mt19937_64& rng) override;
  std::size_t update_interval() const override { return state_.options.update_interval; }
  const AlpGmmState& state() const { return state_; }

 private:
  AlpGmmState state_;
};

// ---------------------------------------------------------------------------
// exploration factor
// ---------------------------------------------------------------------------

/// Mean over channels of std(running) / std(baseline). Channels whose
/// baseline std is zero are skipped and reported through `skipped`.
double exploration_factor(const Points& running, const Points& baseline,
                          std::vector<std::size_t>* skipped = nullptr);

}  // namespace fld::curriculum
