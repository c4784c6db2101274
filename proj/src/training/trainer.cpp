#include "fld/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "fld/common/error.hpp"
#include "fld/numerics/optim.hpp"

namespace fld::training {

using numerics::NormMode;

void TrainConfig::validate() const {
  if (max_iterations == 0) throw ConfigError("TrainConfig: max_iterations must be positive");
  if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
  if (epochs == 0 || mini_batches == 0) throw ConfigError("TrainConfig: epochs and mini_batches must be positive");
  if (batch_size < 2) throw ConfigError("TrainConfig: batch_size must be >= 2 (batch statistics)");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ConfigError("TrainConfig: validation_fraction must be in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_iterations", max_iterations}, {"lr", lr},
          {"weight_decay", weight_decay},     {"epochs", epochs},
          {"mini_batches", mini_batches},     {"batch_size", batch_size},
          {"seed", seed},                     {"validation_fraction", validation_fraction},
          {"validate_every", validate_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.mini_batches = j.value("mini_batches", c.mini_batches);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.validate();
  return c;
}

std::vector<ItemIndex> enumerate_items(std::span<const signal::Trajectory> corpus, std::size_t window,
                                       std::size_t lookahead) {
  std::vector<ItemIndex> items;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const std::size_t len = corpus[k].length();
    for (std::size_t s = 0; s + window + lookahead <= len; ++s) items.push_back({k, s});
  }
  return items;
}

model::HorizonBatch gather_batch(std::span<const signal::Trajectory> corpus, std::span<const ItemIndex> items,
                                 std::size_t window, std::size_t lookahead) {
  if (items.empty()) throw ConfigError("gather_batch: no items");
  const std::size_t d = corpus[items[0].trajectory].state_dim();
  const std::size_t per = d * window;
  model::HorizonBatch hb;
  hb.current = DenseArray({items.size(), d, window});
  hb.futures.assign(lookahead, DenseArray({items.size(), d, window}));
  for (std::size_t b = 0; b < items.size(); ++b) {
    const signal::Trajectory& t = corpus[items[b].trajectory];
    signal::extract_segment_into(t, items[b].start, window, {hb.current.ptr() + b * per, per});
    for (std::size_t i = 1; i <= lookahead; ++i) {
      signal::extract_segment_into(t, items[b].start + i, window, {hb.futures[i - 1].ptr() + b * per, per});
    }
  }
  return hb;
}

namespace {

struct StepLoss {
  double total = 0.0;
  std::vector<double> per_horizon;
};

StepLoss step_loss(TrainedModel& m, const model::HorizonBatch& hb, std::mt19937_64& rng, bool training) {
  switch (m.kind()) {
    case ModelKind::fld:
    case ModelKind::pae: {
      const auto& c = m.settings().fld;
      const std::size_t N = m.kind() == ModelKind::pae ? 0 : c.horizon;
      const model::LossOptions opt{training ? NormMode::train : NormMode::eval, training, training};
      const model::LossResult r = m.fld().loss(hb, N, c.alpha, opt);
      return {r.total, r.per_horizon};
    }
    case ModelKind::vae: {
      if (training) {
        const model::VaeLoss l = m.vae().loss(hb.current, rng, true);
        return {l.total, {l.mse}};
      }
      const double mse = numerics::mean_squared_difference(m.vae().forward(hb.current).reconstruction, hb.current);
      return {mse, {mse}};
    }
    case ModelKind::ff: {
      const double l = m.ff().loss(hb.current, hb.futures.at(0), training);
      return {l, {l}};
    }
    case ModelKind::original: break;
  }
  throw ConfigError("train: unsupported model kind");
}

std::vector<signal::Trajectory> normalized(std::span<const signal::Trajectory> ts, const signal::NormalizationStats& s) {
  std::vector<signal::Trajectory> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(s.apply(t));
  return out;
}

}  // namespace

TrainResult train(ModelKind kind, std::span<const signal::Trajectory> corpus, const TrainConfig& config,
                  const ModelSettings& settings, const ProgressFn& progress) {
  config.validate();
  if (corpus.empty()) throw ConfigError("train: empty corpus");
  TrainResult result{TrainedModel(kind, settings, config.seed), {}};
  TrainedModel& m = result.model;
  const std::size_t H = m.window();
  const std::size_t lookahead = m.lookahead();
  for (const auto& t : corpus) {
    if (t.state_dim() != m.state_dim()) {
      throw ShapeError("train: trajectory '" + t.label + "' has " + std::to_string(t.state_dim()) + " dims, model expects " +
                       std::to_string(m.state_dim()));
    }
  }

  signal::CorpusSplit split;
  if (config.validation_fraction > 0.0 && corpus.size() >= 2) {
    split = signal::split_by_trajectory(corpus, config.validation_fraction, config.seed);
  } else {
    split.train.assign(corpus.begin(), corpus.end());
  }
  m.normalization = signal::fit_normalization(split.train);
  if (kind == ModelKind::fld || kind == ModelKind::pae) m.fld().normalization = m.normalization;
  const auto train_set = normalized(split.train, m.normalization);
  const auto val_set = normalized(split.validation, m.normalization);

  const auto items = enumerate_items(train_set, H, lookahead);
  if (items.empty()) {
    throw ConfigError("train: no training trajectory has the " + std::to_string(H + lookahead) +
                      " frames needed for a window plus lookahead");
  }
  std::vector<ItemIndex> val_items;
  {
    const auto all = enumerate_items(val_set, H, lookahead);
    const std::size_t cap = 256;
    const std::size_t stride = std::max<std::size_t>(1, all.size() / cap);
    for (std::size_t k = 0; k < all.size() && val_items.size() < cap; k += stride) val_items.push_back(all[k]);
  }

  std::mt19937_64 rng(config.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  numerics::Adam adam({.lr = config.lr, .weight_decay = config.weight_decay});
  const auto params = m.parameters();
  const std::size_t bs = config.batch_size;
  std::vector<ItemIndex> pool(config.mini_batches * bs);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    for (ItemIndex& p : pool) p = items[pick(rng)];
    LossRecord rec;
    rec.iteration = it;
    rec.validation = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps = 0;
    try {
      for (std::size_t e = 0; e < config.epochs; ++e) {
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t mb = 0; mb < config.mini_batches; ++mb) {
          const auto hb = gather_batch(train_set, std::span(pool).subspan(mb * bs, bs), H, lookahead);
          numerics::zero_grads(params);
          const StepLoss l = step_loss(m, hb, rng, true);
          adam.step(params);
          rec.total += l.total;
          if (rec.per_horizon.empty()) rec.per_horizon.assign(l.per_horizon.size(), 0.0);
          for (std::size_t i = 0; i < l.per_horizon.size(); ++i) rec.per_horizon[i] += l.per_horizon[i];
          ++steps;
        }
      }
      for (const Parameter* p : params) p->value.check_finite(p->name);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    rec.total /= static_cast<double>(steps);
    for (double& v : rec.per_horizon) v /= static_cast<double>(steps);
    if (config.validate_every != 0 && it % config.validate_every == 0 && !val_items.empty()) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < val_items.size(); k += bs) {
        const std::size_t len = std::min(bs, val_items.size() - k);
        if (len < 2) break;
        const auto hb = gather_batch(val_set, std::span(val_items).subspan(k, len), H, lookahead);
        sum += step_loss(m, hb, rng, false).total * static_cast<double>(len);
        n += len;
      }
      if (n > 0) rec.validation = sum / static_cast<double>(n);
    }
    m.iterations = it;
    result.history.push_back(rec);
    if (progress) progress(rec);
  }
  return result;
}

void write_loss_history(std::ostream& out, const std::vector<LossRecord>& history) {
  const std::size_t n = history.empty() ? 0 : history.front().per_horizon.size();
  out << "# loss per iteration, mean over the iteration's optimizer steps; L_i is the horizon-i MSE in normalized units; "
         "total = sum_i alpha^i L_i\n";
  out << "iteration,total";
  for (std::size_t i = 0; i < n; ++i) out << ",L_" << i;
  out << ",validation\n";
  out << std::setprecision(17);
  for (const LossRecord& r : history) {
    out << r.iteration << ',' << r.total;
    for (double v : r.per_horizon) out << ',' << v;
    out << ',';
    if (!std::isnan(r.validation)) out << r.validation;
    out << '\n';
  }
}

void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_loss_history(out, history);
}

}  // namespace fld::training
