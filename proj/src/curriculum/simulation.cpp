#include "fld/curriculum/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <memory>
#include <ostream>
#include <thread>

#include "fld/common/error.hpp"

namespace fld::curriculum {

double SimResult::unlearnable_fraction_after(std::size_t iteration) const {
  std::size_t n = 0, bad = 0;
  for (const auto& e : episodes) {
    if (e.iteration <= iteration) continue;
    ++n;
    if (e.unlearnable) ++bad;
  }
  return n ? static_cast<double>(bad) / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::optional<std::size_t> SimResult::iteration_of_update(std::size_t n) const {
  for (const auto& s : iterations)
    if (s.updates >= n) return s.iteration;
  return std::nullopt;
}

double SimResult::final_running_performance() const {
  return iterations.empty() ? std::numeric_limits<double>::quiet_NaN() : iterations.back().running_performance;
}

namespace {

std::unique_ptr<SkillSampler> make_sampler(const SimConfig& cfg, const Points& corpus, const ConfidenceBox& box,
                                           std::mt19937_64& rng) {
  switch (cfg.sampler) {
    case SamplerKind::offline: {
      ThetaBuffer b(cfg.offline_capacity);
      b.push_all(corpus);
      return std::make_unique<OfflineSampler>(std::move(b));
    }
    case SamplerKind::gmm: return std::make_unique<GmmSampler>(corpus, cfg.gmm_components, rng);
    case SamplerKind::random: return std::make_unique<RandomSampler>(box);
    case SamplerKind::alpgmm: return std::make_unique<AlpGmmSampler>(box, cfg.alpgmm);
  }
  throw ConfigError("unknown sampler kind");
}

Points to_points(const std::deque<Theta>& q) {
  Points p(static_cast<Eigen::Index>(q.size()), q.front().size());
  for (std::size_t i = 0; i < q.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = q[i].transpose();
  return p;
}

}  // namespace

SimResult run_curriculum_sim(const SurrogateLandscape& landscape_in, const SimConfig& cfg) {
  if (cfg.episodes_per_iteration == 0) throw ConfigError("curriculum: episodes per iteration must be positive");
  if (cfg.running_window < 2) throw ConfigError("curriculum: running window must hold at least two targets");
  SurrogateLandscape land = landscape_in;
  land.reset();
  land.validate();

  SimResult res;
  res.sampler = cfg.sampler;
  res.seed = cfg.seed;
  res.preset = land.name;
  if (cfg.iterations == 0) return res;

  std::mt19937_64 rng(cfg.seed);
  const Points corpus = offline_corpus(land, cfg.corpus_per_region, rng);
  const ConfidenceBox box = ConfidenceBox::from_points(corpus);
  auto sampler = make_sampler(cfg, corpus, box, rng);
  SkillPerformanceBuffer buffer(cfg.buffer_capacity);
  std::uniform_real_distribution<double> phi_dist(-0.5, 0.5);
  const std::size_t channels = std::max<std::size_t>(1, land.dims() / 3);

  std::deque<Theta> running;
  std::deque<double> running_r;
  std::size_t episode = 0, updates = 0;
  res.episodes.reserve(cfg.iterations * cfg.episodes_per_iteration);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::size_t first = res.episodes.size();
    std::size_t bad = 0;
    for (std::size_t e = 0; e < cfg.episodes_per_iteration; ++e, ++episode) {
      EpisodeRecord rec;
      rec.iteration = it;
      rec.theta = sampler->sample(rng);
      rec.phi0.resize(channels);
      for (double& p : rec.phi0) p = phi_dist(rng);
      const auto region = land.region_of(rec.theta);
      rec.region = region ? static_cast<int>(*region) : -1;
      rec.unlearnable = region && !land.regions[*region].learnable;
      if (rec.unlearnable) ++bad;
      rec.performance = surrogate_step(land, rec.theta, rng);
      rec.alp = alp_compute(rec.theta, rec.performance, buffer);
      buffer.push({rec.theta, rec.performance, episode, rec.alp});
      running.push_back(rec.theta);
      running_r.push_back(rec.performance);
      if (running.size() > cfg.running_window) {
        running.pop_front();
        running_r.pop_front();
      }
      res.episodes.push_back(std::move(rec));
      const std::size_t interval = sampler->update_interval();
      if (interval > 0 && (episode + 1) % interval == 0 && sampler->update(buffer, rng)) ++updates;
    }
    IterationSummary s;
    s.iteration = it;
    double sum = 0.0;
    for (double r : running_r) sum += r;
    s.running_performance = sum / static_cast<double>(running_r.size());
    s.gamma = running.size() >= 2 ? exploration_factor(to_points(running), corpus)
                                  : std::numeric_limits<double>::quiet_NaN();
    s.unlearnable_fraction = static_cast<double>(bad) / static_cast<double>(cfg.episodes_per_iteration);
    s.updates = updates;
    for (std::size_t i = first; i < res.episodes.size(); ++i) res.episodes[i].gamma = s.gamma;
    res.iterations.push_back(s);
  }
  return res;
}

std::vector<SimResult> run_curriculum_seeds(const SurrogateLandscape& landscape, const SimConfig& config,
                                            std::span<const std::uint64_t> seeds, std::size_t threads) {
  std::vector<SimResult> out(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto run = [&](std::size_t i) {
    try {
      SimConfig c = config;
      c.seed = seeds[i];
      out[i] = run_curriculum_sim(landscape, c);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, seeds.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run(i);
  } else {
    // static round-robin partition keeps every run on its own seed
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < seeds.size(); i += threads) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_trace_csv(std::ostream& os, const SimResult& result, const std::vector<int>* oracle_labels) {
  os << "# alp is raw |r_new - r_old|; ALP-GMM fits min-max scale it onto the mean confidence-box width\n";
  os << "iteration,sampler,seed";
  const std::size_t D = result.episodes.empty() ? 0 : static_cast<std::size_t>(result.episodes[0].theta.size());
  for (std::size_t j = 0; j < D; ++j) os << ",theta" << j;
  os << ",r,alp,gamma,region_id";
  if (oracle_labels) os << ",oracle_label";
  os << '\n';
  os.precision(10);
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    const auto& e = result.episodes[i];
    os << e.iteration << ',' << to_string(result.sampler) << ',' << result.seed;
    for (double v : e.theta) os << ',' << v;
    os << ',' << e.performance << ',' << e.alp << ',' << e.gamma << ',' << e.region;
    if (oracle_labels) os << ',' << oracle_labels->at(i);
    os << '\n';
  }
}

void write_summary_csv(std::ostream& os, std::span<const SimResult> results) {
  os << "iteration,sampler,seed,preset,running_performance,gamma,unlearnable_fraction,updates\n";
  os.precision(10);
  for (const auto& r : results) {
    for (const auto& s : r.iterations) {
      os << s.iteration << ',' << to_string(r.sampler) << ',' << r.seed << ',' << r.preset << ','
         << s.running_performance << ',' << s.gamma << ',' << s.unlearnable_fraction << ',' << s.updates << '\n';
    }
  }
}

double kendall_tau(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ConfigError("kendall_tau: need at least two values");
  // x is the index, so there are no ties in x
  double concordant = 0.0, discordant = 0.0, ties_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = values[j] - values[i];
      if (d > 0) concordant += 1;
      else if (d < 0) discordant += 1;
      else ties_y += 1;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom = std::sqrt(pairs * (pairs - ties_y));
  if (denom == 0.0) return 0.0;
  return (concordant - discordant) / denom;
}

}  // namespace fld::curriculum
