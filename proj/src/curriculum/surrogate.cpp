#include "fld/curriculum/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fld/common/error.hpp"

namespace fld::curriculum {

std::optional<std::size_t> SurrogateLandscape::region_of(const Theta& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dims()) throw ShapeError("surrogate: theta dimension mismatch");
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const double d = (regions[k].center - theta).norm();
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  if (regions.empty() || bd > regions[best].radius) return std::nullopt;
  return best;
}

bool SurrogateLandscape::unlocked(std::size_t region) const {
  const auto& p = regions.at(region).prerequisite;
  if (!p) return true;
  return competence.at(*p) >= regions[region].unlock * regions[*p].max_performance;
}

double SurrogateLandscape::unlearnable_fraction() const {
  std::size_t refs = 0, bad = 0;
  for (const auto& r : regions) {
    if (!r.reference) continue;
    ++refs;
    if (!r.learnable) ++bad;
  }
  return refs ? static_cast<double>(bad) / static_cast<double>(refs) : 0.0;
}

void SurrogateLandscape::validate() const {
  if (regions.empty()) throw ConfigError("surrogate: no regions");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("surrogate: learning rate must lie in (0, 1]");
  if (!(floor >= 0.0 && floor <= 1.0) || unlearnable_level < 0.0 || unlearnable_level > floor) {
    throw ConfigError("surrogate: need 0 <= unlearnable_level <= floor <= 1");
  }
  if (noise < 0.0 || corpus_spread < 0.0) throw ConfigError("surrogate: noise and spread must be non-negative");
  if (competence.size() != regions.size()) throw ConfigError("surrogate: competence/region count mismatch");
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const auto& r = regions[k];
    if (static_cast<std::size_t>(r.center.size()) != dims()) throw ConfigError("surrogate: region centers differ in dimension");
    if (!(r.radius > 0.0)) throw ConfigError("surrogate: region radius must be positive");
    if (!(r.max_performance >= 0.0 && r.max_performance <= 1.0)) throw ConfigError("surrogate: max performance outside [0, 1]");
    if (r.prerequisite && (*r.prerequisite >= regions.size() || *r.prerequisite == k)) {
      throw ConfigError("surrogate: region " + r.label + " has an invalid prerequisite");
    }
  }
}

nlohmann::json SurrogateLandscape::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : regions) {
    rs.push_back({{"label", r.label},
                  {"center", std::vector<double>(r.center.data(), r.center.data() + r.center.size())},
                  {"radius", r.radius},
                  {"max_performance", r.max_performance},
                  {"learnable", r.learnable},
                  {"reference", r.reference},
                  {"prerequisite", r.prerequisite ? nlohmann::json(*r.prerequisite) : nlohmann::json(nullptr)},
                  {"unlock", r.unlock}});
  }
  return {{"name", name},
          {"dims", dims()},
          {"learning_rate", learning_rate},
          {"floor", floor},
          {"unlearnable_level", unlearnable_level},
          {"noise", noise},
          {"corpus_spread", corpus_spread},
          {"seed", seed},
          {"regions", rs}};
}

SurrogateLandscape SurrogateLandscape::from_json(const nlohmann::json& j) {
  SurrogateLandscape l;
  try {
    l.name = j.value("name", std::string{});
    l.learning_rate = j.at("learning_rate").get<double>();
    l.floor = j.at("floor").get<double>();
    l.unlearnable_level = j.at("unlearnable_level").get<double>();
    l.noise = j.at("noise").get<double>();
    l.corpus_spread = j.value("corpus_spread", 0.3);
    l.seed = j.value("seed", std::uint64_t{0});
    for (const auto& r : j.at("regions")) {
      SurrogateRegion s;
      s.label = r.value("label", std::string{});
      const auto c = r.at("center").get<std::vector<double>>();
      s.center = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
      s.radius = r.at("radius").get<double>();
      s.max_performance = r.value("max_performance", 1.0);
      s.learnable = r.at("learnable").get<bool>();
      s.reference = r.value("reference", true);
      if (r.contains("prerequisite") && !r["prerequisite"].is_null()) s.prerequisite = r["prerequisite"].get<std::size_t>();
      s.unlock = r.value("unlock", 0.0);
      l.regions.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("landscape json: ") + e.what());
  }
  l.reset();
  l.validate();
  return l;
}

double surrogate_step(SurrogateLandscape& landscape, const Theta& theta, std::mt19937_64& rng) {
  const auto k = landscape.region_of(theta);
  if (!k) return 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  const double eps = landscape.noise > 0.0 ? landscape.noise * n(rng) : 0.0;
  const SurrogateRegion& reg = landscape.regions[*k];
  if (!reg.learnable) return std::clamp(landscape.unlearnable_level + eps, 0.0, landscape.floor);
  double& c = landscape.competence[*k];
  if (landscape.unlocked(*k)) c += landscape.learning_rate * (reg.max_performance - c);
  return std::clamp(c + eps, 0.0, 1.0);
}

SurrogateLandscape make_preset(int unlearnable_percent, const PresetOptions& o) {
  if (unlearnable_percent != 0 && unlearnable_percent != 10 && unlearnable_percent != 60) {
    throw ConfigError("surrogate preset must be 0, 10 or 60, got " + std::to_string(unlearnable_percent));
  }
  if (o.dims == 0) throw ConfigError("surrogate preset: dims must be positive");
  if (!(o.coverage > 0.0 && o.coverage <= 1.0)) throw ConfigError("surrogate preset: coverage must lie in (0, 1]");
  const std::size_t dims = o.dims;
  constexpr std::size_t kReferences = 10;
  const std::size_t bad = static_cast<std::size_t>(unlearnable_percent) / 10;
  SurrogateLandscape l;
  l.name = std::to_string(unlearnable_percent);
  l.seed = o.seed;
  l.noise = o.noise;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t k = 0; k < kReferences; ++k) {
    SurrogateRegion r;
    r.center = Theta(static_cast<Eigen::Index>(dims));
    for (auto& v : r.center) v = n(rng);
    r.learnable = k >= bad;
    r.label = (r.learnable ? "ref" : "unlearnable") + std::to_string(k);
    l.regions.push_back(std::move(r));
  }
  // frontier chains reach outward from the corpus mean, each link learnable
  // only once the previous one is mostly mastered
  Theta mean = Theta::Zero(static_cast<Eigen::Index>(dims));
  for (std::size_t k = 0; k < kReferences; ++k) mean += l.regions[k].center / static_cast<double>(kReferences);
  for (std::size_t k = bad; k < kReferences; ++k) {
    std::size_t parent = k;
    for (std::size_t g = 1; g <= o.frontier_depth; ++g) {
      SurrogateRegion r;
      r.center = mean + (1.0 + o.frontier_step * static_cast<double>(g)) * (l.regions[k].center - mean);
      r.reference = false;
      r.prerequisite = parent;
      r.unlock = o.unlock;
      r.label = "frontier" + std::to_string(k) + "." + std::to_string(g);
      parent = l.regions.size();
      l.regions.push_back(std::move(r));
    }
  }
  l.reset();

  // One shared radius: the `coverage` quantile of nearest-center distance
  // over uniform draws from the corpus confidence box.
  for (auto& r : l.regions) r.radius = std::numeric_limits<double>::infinity();
  const Points corpus = offline_corpus(l, 100, rng);
  const ConfidenceBox box = ConfidenceBox::from_points(corpus);
  std::vector<double> dist;
  for (int i = 0; i < 2000; ++i) {
    const Theta t = random_sample(box, rng);
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& r : l.regions) bd = std::min(bd, (r.center - t).norm());
    dist.push_back(bd);
  }
  std::sort(dist.begin(), dist.end());
  const auto q = std::min(dist.size() - 1, static_cast<std::size_t>(o.coverage * static_cast<double>(dist.size())));
  const double radius = dist[q];
  for (auto& r : l.regions) r.radius = radius;
  l.validate();
  return l;
}

Points offline_corpus(const SurrogateLandscape& landscape, std::size_t per_region, std::mt19937_64& rng,
                      std::vector<int>* labels) {
  std::vector<std::size_t> refs;
  for (std::size_t k = 0; k < landscape.regions.size(); ++k)
    if (landscape.regions[k].reference) refs.push_back(k);
  if (refs.empty() || per_region == 0) throw ConfigError("offline_corpus: nothing to sample");
  const auto D = static_cast<Eigen::Index>(landscape.dims());
  Points out(static_cast<Eigen::Index>(refs.size() * per_region), D);
  if (labels) labels->clear();
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::size_t k : refs) {
    for (std::size_t i = 0; i < per_region; ++i, ++row) {
      for (Eigen::Index j = 0; j < D; ++j) out(row, j) = landscape.regions[k].center(j) + landscape.corpus_spread * n(rng);
      if (labels) labels->push_back(static_cast<int>(k));
    }
  }
  return out;
}

}  // namespace fld::curriculum
