#include "fld/curriculum/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fld/common/error.hpp"

namespace fld::curriculum {

SkillPerformanceBuffer::SkillPerformanceBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("SkillPerformanceBuffer: capacity must be positive");
}

void SkillPerformanceBuffer::push(SkillPerformanceRecord record) {
  if (!(record.performance >= 0.0 && record.performance <= 1.0)) {
    throw NumericError("SkillPerformanceBuffer: performance " + std::to_string(record.performance) + " outside [0, 1]");
  }
  if (!records_.empty() && record.theta.size() != records_.front().theta.size()) {
    throw ShapeError("SkillPerformanceBuffer: theta dimension changed");
  }
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

std::optional<std::size_t> SkillPerformanceBuffer::nearest(const Theta& theta) const {
  if (records_.empty()) return std::nullopt;
  if (theta.size() != records_.front().theta.size()) throw ShapeError("nearest: theta dimension mismatch");
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const double d = (records_[i].theta - theta).squaredNorm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

double alp_compute(const Theta& theta, double r_new, const SkillPerformanceBuffer& buffer) {
  const auto nn = buffer.nearest(theta);
  if (!nn) return r_new;
  return std::abs(r_new - buffer[*nn].performance);
}

ThetaBuffer::ThetaBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("ThetaBuffer: capacity must be positive");
}

void ThetaBuffer::push(Theta theta) {
  if (!points_.empty() && theta.size() != points_.front().size()) throw ShapeError("ThetaBuffer: dimension changed");
  if (points_.size() == capacity_) points_.pop_front();
  points_.push_back(std::move(theta));
}

void ThetaBuffer::push_all(const Points& points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) push(points.row(i).transpose());
}

Points ThetaBuffer::to_points() const {
  if (points_.empty()) return {};
  Points out(static_cast<Eigen::Index>(points_.size()), points_.front().size());
  for (std::size_t i = 0; i < points_.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points_[i].transpose();
  return out;
}

// ---------------------------------------------------------------------------

ConfidenceBox ConfidenceBox::from_points(const Points& corpus, double k) {
  if (corpus.rows() == 0) throw ConfigError("ConfidenceBox: empty corpus");
  if (!(k > 0.0)) throw ConfigError("ConfidenceBox: width factor must be positive");
  ConfidenceBox b;
  b.k = k;
  b.mean = corpus.colwise().mean().transpose();
  const Points centered = corpus.rowwise() - b.mean.transpose();
  b.sigma = (centered.colwise().squaredNorm() / static_cast<double>(corpus.rows())).cwiseSqrt().transpose();
  return b;
}

double ConfidenceBox::mean_width() const { return 2.0 * k * sigma.mean(); }

Theta ConfidenceBox::clip(const Theta& theta) const {
  if (theta.size() != mean.size()) throw ShapeError("ConfidenceBox: dimension mismatch");
  return theta.cwiseMax(lower()).cwiseMin(upper());
}

bool ConfidenceBox::contains(const Theta& theta) const {
  if (theta.size() != mean.size()) throw ShapeError("ConfidenceBox: dimension mismatch");
  return (theta.array() >= lower().array()).all() && (theta.array() <= upper().array()).all();
}

// ---------------------------------------------------------------------------

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::offline: return "offline";
    case SamplerKind::gmm: return "gmm";
    case SamplerKind::random: return "random";
    case SamplerKind::alpgmm: return "alpgmm";
  }
  return "?";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "offline") return SamplerKind::offline;
  if (name == "gmm") return SamplerKind::gmm;
  if (name == "random") return SamplerKind::random;
  if (name == "alpgmm") return SamplerKind::alpgmm;
  throw ConfigError("unknown sampler '" + std::string(name) + "' (offline, gmm, random, alpgmm)");
}

Theta offline_sample(const ThetaBuffer& buffer, std::mt19937_64& rng) {
  if (buffer.size() == 0) throw ConfigError("offline sampler: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  return buffer[pick(rng)];
}

Theta random_sample(const ConfidenceBox& box, std::mt19937_64& rng) {
  if (!box.calibrated()) throw ConfigError("random sampler: confidence region not calibrated");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Theta lo = box.lower(), hi = box.upper();
  Theta out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const double w = hi(i) - lo(i);
    out(i) = w > 0.0 ? lo(i) + w * u(rng) : box.mean(i);
  }
  return out;
}

std::size_t proportional_arm(std::span<const double> utilities, std::mt19937_64& rng) {
  if (utilities.empty()) throw ConfigError("proportional_arm: no arms");
  std::discrete_distribution<std::size_t> pick(utilities.begin(), utilities.end());
  return pick(rng);
}

AlpGmmState::AlpGmmState(ConfidenceBox region, AlpGmmOptions opts) : options(std::move(opts)), box(std::move(region)) {
  if (!box.calibrated()) throw ConfigError("ALP-GMM: confidence region not calibrated");
  if (options.k_min < 1 || options.k_max < options.k_min) throw ConfigError("ALP-GMM: invalid component range");
  if (!(options.random_sample_rate >= 0.0 && options.random_sample_rate <= 1.0)) {
    throw ConfigError("ALP-GMM: random sample rate must lie in [0, 1]");
  }
  if (options.update_interval == 0 || options.fit_window == 0) throw ConfigError("ALP-GMM: intervals must be positive");
  if (!options.select_arm) options.select_arm = proportional_arm;
}

Theta alpgmm_sample(const AlpGmmState& state, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // the exploration draw is taken even before the first fit so the random
  // stream does not depend on whether a mixture exists
  const bool explore = u(rng) < state.options.random_sample_rate;
  if (explore || !state.mixture) return random_sample(state.box, rng);
  const std::size_t arm = state.options.select_arm(state.utilities, rng);
  return state.box.clip(state.mixture->sample_component(arm, rng, state.box.dims()));
}

bool alpgmm_update(AlpGmmState& state, std::span<const AlpPoint> points, std::mt19937_64& rng) {
  if (points.size() < state.options.k_min) return false;
  const auto D = static_cast<Eigen::Index>(state.box.dims());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : points) {
    if (p.theta.size() != D) throw ShapeError("ALP-GMM: theta dimension mismatch");
    lo = std::min(lo, p.alp);
    hi = std::max(hi, p.alp);
  }
  // alp is min-max scaled onto the mean box width so the extra coordinate
  // lives on the same scale as theta
  const double width = state.box.mean_width();
  const double scale = hi > lo ? width / (hi - lo) : 0.0;
  Points X(static_cast<Eigen::Index>(points.size()), D + 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    X.row(r).head(D) = points[i].theta.transpose();
    X(r, D) = (points[i].alp - lo) * scale;
  }
  BicSelection sel = gmm_bic_select(X, state.options.k_min, state.options.k_max, rng, state.options.em);
  state.utilities.clear();
  for (const auto& m : sel.fit.mixture.means()) {
    const double alp = scale > 0.0 ? lo + m(D) / scale : lo;
    state.utilities.push_back(std::max(alp, state.options.utility_floor));
  }
  state.mixture = std::move(sel.fit.mixture);
  state.alp_min = lo;
  state.alp_scale = scale;
  ++state.fits;
  return true;
}

OfflineSampler::OfflineSampler(ThetaBuffer buffer) : buffer_(std::move(buffer)) {
  if (buffer_.size() == 0) throw ConfigError("offline sampler: empty buffer");
}

GmmSampler::GmmSampler(const Points& corpus, std::size_t components, std::mt19937_64& rng, const EmOptions& em) {
  if (corpus.rows() == 0) throw ConfigError("gmm sampler: empty corpus");
  const auto k = std::min(components, static_cast<std::size_t>(corpus.rows()));
  mixture_ = gmm_fit_em(corpus, k, rng, em).mixture;
}

RandomSampler::RandomSampler(ConfidenceBox box) : box_(std::move(box)) {
  if (!box_.calibrated()) throw ConfigError("random sampler: confidence region not calibrated");
}

AlpGmmSampler::AlpGmmSampler(ConfidenceBox box, AlpGmmOptions options) : state_(std::move(box), std::move(options)) {}

bool AlpGmmSampler::update(const SkillPerformanceBuffer& buffer, std::mt19937_64& rng) {
  const std::size_t n = std::min(buffer.size(), state_.options.fit_window);
  std::vector<AlpPoint> pts;
  pts.reserve(n);
  for (std::size_t i = buffer.size() - n; i < buffer.size(); ++i) pts.push_back({buffer[i].theta, buffer[i].alp});
  return alpgmm_update(state_, pts, rng);
}

// ---------------------------------------------------------------------------

double exploration_factor(const Points& running, const Points& baseline, std::vector<std::size_t>* skipped) {
  if (running.rows() < 2 || baseline.rows() < 2) {
    throw ConfigError("exploration_factor: both sets need at least two points");
  }
  if (running.cols() != baseline.cols()) throw ShapeError("exploration_factor: dimension mismatch");
  auto stds = [](const Points& p) {
    const Points c = p.rowwise() - p.colwise().mean();
    return Eigen::VectorXd((c.colwise().squaredNorm() / static_cast<double>(p.rows())).cwiseSqrt().transpose());
  };
  const Eigen::VectorXd sr = stds(running), sb = stds(baseline);
  if (skipped) skipped->clear();
  double sum = 0.0;
  std::size_t used = 0;
  for (Eigen::Index j = 0; j < sb.size(); ++j) {
    if (sb(j) <= 0.0) {
      if (skipped) skipped->push_back(static_cast<std::size_t>(j));
      continue;
    }
    sum += sr(j) / sb(j);
    ++used;
  }
  if (used == 0) throw NumericError("exploration_factor: every baseline channel has zero spread");
  return sum / static_cast<double>(used);
}

}  // namespace fld::curriculum
