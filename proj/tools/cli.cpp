#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "fld/common/error.hpp"
#include "fld/curriculum/classifier.hpp"
#include "fld/curriculum/simulation.hpp"
#include "fld/dynamics/gate.hpp"
#include "fld/dynamics/synthesis.hpp"
#include "fld/signal/io.hpp"
#include "fld/signal/synthetic.hpp"
#include "fld/training/checkpoint.hpp"
#include "fld/training/evaluation.hpp"
#include "fld/training/trainer.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fld::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

json config_section(const std::string& config_path, const char* key) {
  if (config_path.empty()) return json::object();
  const json j = read_json_file(config_path);
  if (!j.is_object()) throw FormatError(config_path + ": config must be a JSON object");
  return j.value(key, json::object());
}

// Output sink: a file, or `fallback` for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path == "-") {
      os_ = &fallback;
      return;
    }
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_.open(path, std::ios::binary);
    if (!file_) throw FormatError("cannot write " + path);
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }
  void close() {
    if (file_.is_open()) file_.close();
    else os_->flush();
  }
  bool is_file() const { return path_ != "-"; }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

// Manifest next to a file output, or the explicit --manifest path.
fs::path manifest_path(const std::string& flag, const std::string& out, const char* fallback) {
  if (!flag.empty()) return flag;
  if (out != "-") return out + ".manifest.json";
  return fallback;
}

signal::Trajectory load_trajectory(const fs::path& p, std::size_t state_dim, std::optional<double> dt, double model_dt,
                                   bool header, std::ostream& err) {
  if (p.extension() == ".json") {
    return signal::generate_synthetic(signal::synthetic_spec_from_json(read_json_file(p)));
  }
  signal::CsvOptions o;
  o.state_dim = state_dim;
  o.header = header;
  o.label = p.stem().string();
  fs::path sidecar = p;
  sidecar += ".json";
  o.dt = dt ? *dt : (fs::exists(sidecar) ? 0.0 : model_dt);
  auto r = signal::load_csv(p, o);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  return std::move(r.trajectory);
}

model::LatentParameterization theta_from_json(const json& j) {
  return {j.at("f").get<std::vector<double>>(), j.at("a").get<std::vector<double>>(),
          j.at("b").get<std::vector<double>>()};
}

// A roll state from a latent JSON ({phi, f, a, b}), a synthetic spec or a
// trajectory CSV (encoded at the window starting at `start`).
dynamics::LatentRollState state_from(const fs::path& p, const training::TrainedModel& m, std::size_t start,
                                     std::ostream& err) {
  if (p.extension() == ".json") {
    const json j = read_json_file(p);
    if (j.contains("f")) {
      try {
        dynamics::LatentRollState s;
        s.theta = theta_from_json(j);
        s.phi.phi = j.value("phi", std::vector<double>(s.theta.f.size(), 0.0));
        const std::size_t c = m.fld().config().channels;
        if (s.phi.phi.size() != c || s.theta.f.size() != c || s.theta.a.size() != c || s.theta.b.size() != c)
          throw ShapeError(p.string() + ": latent needs " + std::to_string(c) + " channels");
        return s;
      } catch (const json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
      }
    }
  }
  const signal::Trajectory t = load_trajectory(p, m.state_dim(), std::nullopt, m.settings().fld.dt, false, err);
  if (start + m.window() > t.length())
    throw ConfigError(p.string() + ": window at frame " + std::to_string(start) + " runs past the end (" +
                      std::to_string(t.length()) + " frames)");
  return dynamics::encode_state(m, signal::extract_segment(t, start, m.window()));
}

void print_warnings(const std::vector<std::string>& w, std::ostream& err) {
  for (const auto& s : w) err << "warning: " << s << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model = "fld";
  std::string corpus;
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations, batch_size, mini_batches, epochs;
  std::optional<double> lr, weight_decay, validation_fraction;
  std::optional<std::size_t> channels, window, horizon, hidden, kernel;
  std::optional<double> alpha;
  std::size_t log_every = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--model", a.model, "fld | pae | vae | ff (pae is fld with horizon 0)")
      ->check(CLI::IsMember({"fld", "pae", "vae", "ff"}));
  app.add_option("--corpus", a.corpus, "corpus manifest (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--config", a.config, "JSON config with \"train\" and \"model\" sections")->check(CLI::ExistingFile);
  app.add_option("--out", a.out, "output directory")->capture_default_str();
  app.add_option("--seed", a.seed);
  app.add_option("--iterations", a.iterations);
  app.add_option("--lr", a.lr);
  app.add_option("--weight-decay", a.weight_decay);
  app.add_option("--batch-size", a.batch_size);
  app.add_option("--mini-batches", a.mini_batches);
  app.add_option("--epochs", a.epochs);
  app.add_option("--validation-fraction", a.validation_fraction);
  app.add_option("--channels", a.channels, "latent channels c");
  app.add_option("--window", a.window, "window length H");
  app.add_option("--horizon", a.horizon, "propagation horizon N");
  app.add_option("--alpha", a.alpha, "horizon decay");
  app.add_option("--hidden", a.hidden, "conv hidden channels");
  app.add_option("--kernel", a.kernel, "conv kernel (0: window length)");
  app.add_option("--log-every", a.log_every, "progress line every n iterations (0: tenth of the run)");
}

template <class T>
void overlay(const std::optional<T>& flag, T& dst) {
  if (flag) dst = *flag;
}

int cmd_train(const TrainArgs& a, RunManifest& m, std::ostream& err) {
  std::vector<std::string> warnings;
  const json train_cfg = config_section(a.config, "train");
  const json model_cfg = config_section(a.config, "model");

  training::TrainConfig tc = training::TrainConfig::from_json(train_cfg);
  overlay(a.seed, tc.seed);
  overlay(a.iterations, tc.max_iterations);
  overlay(a.lr, tc.lr);
  overlay(a.weight_decay, tc.weight_decay);
  overlay(a.batch_size, tc.batch_size);
  overlay(a.mini_batches, tc.mini_batches);
  overlay(a.epochs, tc.epochs);
  overlay(a.validation_fraction, tc.validation_fraction);
  tc.validate();

  training::ModelSettings ms;
  ms.fld = model::FLDConfig::from_json(model_cfg.value("fld", json::object()));
  ms.vae_beta = model_cfg.value("vae_beta", ms.vae_beta);
  ms.ff_hidden = model_cfg.value("ff_hidden", ms.ff_hidden);
  overlay(a.channels, ms.fld.channels);
  overlay(a.window, ms.fld.window);
  overlay(a.horizon, ms.fld.horizon);
  overlay(a.alpha, ms.fld.alpha);
  overlay(a.hidden, ms.fld.hidden_channels);
  overlay(a.kernel, ms.fld.kernel_size);

  const signal::Corpus corpus = signal::load_corpus(a.corpus, ms.fld.window, &warnings);
  print_warnings(warnings, err);
  ms.fld.state_dim = corpus.state_dim;
  ms.fld.dt = corpus.dt;
  const model::ModelKind kind = model::parse_model_kind(a.model);
  if (kind == model::ModelKind::pae) ms.fld.horizon = 0;
  ms.fld.validate();

  m.seed = tc.seed;
  m.config = {{"model_kind", a.model}, {"train", tc.to_json()}, {"model", ms.to_json()}};
  m.add_input(a.corpus);
  if (!a.config.empty()) m.add_input(a.config);

  const std::size_t every = a.log_every ? a.log_every : std::max<std::size_t>(1, tc.max_iterations / 10);
  auto progress = [&](const training::LossRecord& r) {
    if (r.iteration % every == 0 || r.iteration == tc.max_iterations)
      err << "iteration " << r.iteration << "/" << tc.max_iterations << "  loss " << r.total << '\n';
  };
  training::TrainResult res = training::train(kind, corpus.trajectories, tc, ms, progress);

  fs::create_directories(a.out);
  const fs::path ckpt = fs::path(a.out) / "model.ckpt", loss = fs::path(a.out) / "loss.csv";
  training::save_checkpoint(ckpt, res.model);
  training::write_loss_history(loss, res.history);
  m.add_output(ckpt);
  m.add_output(loss);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::vector<std::string> names;
  std::string trajectory;
  std::size_t horizons = 50;
  std::size_t stride = 5;
  std::optional<double> dt;
  bool header = false;
  bool as_json = false;
  std::string out = "-";
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--checkpoints", a.checkpoints, "one or more checkpoints")->required()->check(CLI::ExistingFile);
  app.add_option("--names", a.names, "curve names (default: file stems)");
  app.add_option("--trajectory", a.trajectory, "trajectory CSV or synthetic spec JSON")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--horizons", a.horizons, "largest prediction horizon")->capture_default_str();
  app.add_option("--stride", a.stride, "frames between anchors")->capture_default_str();
  app.add_option("--dt", a.dt, "frame period of a CSV without sidecar (default: the model's)");
  app.add_flag("--header", a.header, "CSV has a header row");
  app.add_flag("--json", a.as_json, "write JSON instead of CSV");
  app.add_option("--out", a.out, "output file, - for stdout")->capture_default_str();
}

int cmd_eval(const EvalArgs& a, RunManifest& m, std::ostream& out, std::ostream& err) {
  std::vector<training::TrainedModel> models;
  for (const auto& p : a.checkpoints) {
    models.push_back(training::load_checkpoint(p));
    m.add_input(p);
  }
  std::vector<std::string> names = a.names;
  if (names.empty())
    for (const auto& p : a.checkpoints) names.push_back(fs::path(p).stem().string());
  if (names.size() != models.size()) throw UsageError("--names needs one name per checkpoint");

  const signal::Trajectory t =
      load_trajectory(a.trajectory, models[0].state_dim(), a.dt, models[0].settings().fld.dt, a.header, err);
  m.add_input(a.trajectory);
  std::vector<const training::TrainedModel*> ptrs;
  for (const auto& x : models) ptrs.push_back(&x);
  const training::EvaluationReport rep = training::evaluate_prediction(ptrs, names, t, a.horizons, a.stride);

  m.config = {{"names", names}, {"horizons", a.horizons}, {"stride", a.stride}, {"dt", t.dt}};
  Sink sink(a.out, out);
  if (a.as_json) *sink << training::evaluation_to_json(rep).dump(2) << '\n';
  else training::write_evaluation_csv(*sink, rep);
  sink.close();
  if (sink.is_file()) m.add_output(a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// manifold
// ---------------------------------------------------------------------------

struct ManifoldArgs {
  std::string checkpoint;
  std::string corpus;
  bool per_trajectory = false;
  std::string out = "-";
};

void add_manifold(CLI::App& app, ManifoldArgs& a) {
  app.add_option("--checkpoint", a.checkpoint)->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", a.corpus, "corpus manifest (JSON)")->required()->check(CLI::ExistingFile);
  app.add_flag("--per-trajectory", a.per_trajectory, "one PCA per trajectory instead of a shared one");
  app.add_option("--out", a.out, "output file, - for stdout")->capture_default_str();
}

int cmd_manifold(const ManifoldArgs& a, RunManifest& m, std::ostream& out, std::ostream& err) {
  const training::TrainedModel model = training::load_checkpoint(a.checkpoint);
  std::vector<std::string> warnings;
  const signal::Corpus corpus = signal::load_corpus(a.corpus, model.window(), &warnings);
  print_warnings(warnings, err);
  m.add_input(a.checkpoint);
  m.add_input(a.corpus);
  m.config = {{"per_trajectory", a.per_trajectory}};
  const auto pts = training::export_latent_manifold(model, corpus.trajectories, a.per_trajectory);
  Sink sink(a.out, out);
  training::write_manifold_csv(*sink, pts);
  sink.close();
  if (sink.is_file()) m.add_output(a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string checkpoint;
  std::string theta_from;
  std::string interp_to;
  std::size_t start = 0;
  std::size_t steps = 0;
  std::string out = "-";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--checkpoint", a.checkpoint)->required()->check(CLI::ExistingFile);
  app.add_option("--theta-from", a.theta_from,
                 "trajectory CSV / synthetic spec JSON (encoded at --start) or latent JSON {phi, f, a, b}")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--interp-to", a.interp_to, "blend theta linearly towards this source over --steps")
      ->check(CLI::ExistingFile);
  app.add_option("--start", a.start, "first frame of the encoded window")->capture_default_str();
  app.add_option("--steps", a.steps, "frames to synthesize")->required();
  app.add_option("--out", a.out, "output CSV, - for stdout")->capture_default_str();
}

int cmd_synth(const SynthArgs& a, RunManifest& m, std::ostream& out, std::ostream& err) {
  const training::TrainedModel model = training::load_checkpoint(a.checkpoint);
  m.add_input(a.checkpoint);
  const dynamics::LatentRollState src = state_from(a.theta_from, model, a.start, err);
  m.add_input(a.theta_from);
  signal::Trajectory t;
  if (a.interp_to.empty()) {
    t = dynamics::synthesize(model, src, a.steps);
  } else {
    const dynamics::LatentRollState dst = state_from(a.interp_to, model, a.start, err);
    m.add_input(a.interp_to);
    t = dynamics::synthesize_schedule(model, src.phi, dynamics::interpolate_theta(src.theta, dst.theta, a.steps));
  }
  m.config = {{"start", a.start}, {"steps", a.steps}, {"interpolate", !a.interp_to.empty()},
              {"phi0", src.phi.phi}, {"theta", {{"f", src.theta.f}, {"a", src.theta.a}, {"b", src.theta.b}}}};
  Sink sink(a.out, out);
  signal::write_csv(*sink, t, true);
  sink.close();
  if (sink.is_file()) m.add_output(a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gate
// ---------------------------------------------------------------------------

struct GateArgs {
  std::string checkpoint;
  std::optional<double> epsilon;
  std::string calibrate;
  double quantile = 0.99;
  std::size_t stride = 1;
  std::optional<std::size_t> horizon;
  std::optional<double> alpha;
  std::string input = "-";
  bool header = false;
  std::string out = "-";
};

void add_gate(CLI::App& app, GateArgs& a) {
  app.add_option("--checkpoint", a.checkpoint)->required()->check(CLI::ExistingFile);
  auto* eps = app.add_option("--epsilon", a.epsilon, "loss threshold");
  auto* cal = app.add_option("--calibrate", a.calibrate, "corpus manifest to calibrate epsilon on")
                  ->check(CLI::ExistingFile);
  eps->excludes(cal);
  app.add_option("--quantile", a.quantile, "calibration quantile")->capture_default_str();
  app.add_option("--stride", a.stride, "calibration anchor stride")->capture_default_str();
  app.add_option("--horizon", a.horizon, "loss horizon (default: the model's N)");
  app.add_option("--alpha", a.alpha, "loss decay (default: the model's)");
  app.add_option("--input", a.input, "frames CSV, - for stdin; an empty line is a missing frame")
      ->capture_default_str();
  app.add_flag("--header", a.header, "input starts with a header row");
  app.add_option("--out", a.out, "JSONL decisions, - for stdout")->capture_default_str();
}

int cmd_gate(const GateArgs& a, RunManifest& m, std::istream& in, std::ostream& out, std::ostream& err) {
  if (!a.epsilon && a.calibrate.empty()) throw UsageError("gate: need --epsilon or --calibrate");
  const training::TrainedModel model = training::load_checkpoint(a.checkpoint);
  m.add_input(a.checkpoint);
  dynamics::GateConfig g;
  if (a.epsilon) {
    g = dynamics::manual_gate(model, *a.epsilon);
    overlay(a.horizon, g.horizon);
    overlay(a.alpha, g.alpha);
  } else {
    std::vector<std::string> warnings;
    const signal::Corpus corpus = signal::load_corpus(a.calibrate, model.window(), &warnings);
    print_warnings(warnings, err);
    m.add_input(a.calibrate);
    g = dynamics::calibrate_threshold(model, corpus.trajectories, a.quantile, a.stride, a.horizon, a.alpha);
    err << "epsilon " << g.epsilon << " (quantile " << g.quantile << " of " << g.anchors << " anchors)\n";
  }
  g.validate();
  m.config = {{"gate", g.to_json()}};

  std::ifstream file;
  std::istream* src = &in;
  if (a.input != "-") {
    file.open(a.input);
    if (!file) throw UsageError("cannot read " + a.input);
    src = &file;
    m.add_input(a.input);
  }
  Sink sink(a.out, out);
  dynamics::GateStream stream(model, g, dynamics::neutral_state(model.fld().config().channels));
  std::string line;
  std::size_t line_no = 0, step = 0, accepted = 0, rejected = 0;
  while (std::getline(*src, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (a.header && line_no == 1) continue;
    std::optional<std::vector<double>> frame;
    if (!line.empty()) frame = signal::parse_csv_row(line, model.state_dim(), step, line_no);
    const dynamics::GateDecision d =
        frame ? stream.push(std::span<const double>(*frame)) : stream.push(std::nullopt);
    if (d.verdict == dynamics::Verdict::accepted) ++accepted;
    if (d.verdict == dynamics::Verdict::rejected) ++rejected;
    *sink << dynamics::decision_to_json(step++, d).dump() << '\n';
  }
  sink.close();
  err << step << " frames: " << accepted << " accepted, " << rejected << " rejected\n";
  if (sink.is_file()) m.add_output(a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curriculum
// ---------------------------------------------------------------------------

struct CurriculumArgs {
  std::string config;
  std::optional<std::string> sampler;
  std::optional<int> preset;
  std::string landscape;
  std::optional<std::size_t> iters, episodes, seeds, dims;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  std::size_t oracle_epochs = 20;
  std::string out = "curriculum";
};

void add_curriculum(CLI::App& app, CurriculumArgs& a) {
  app.add_option("--config", a.config, "JSON config with a \"curriculum\" section")->check(CLI::ExistingFile);
  app.add_option("--sampler", a.sampler, "offline | gmm | random | alpgmm")
      ->check(CLI::IsMember({"offline", "gmm", "random", "alpgmm"}));
  app.add_option("--preset", a.preset, "unlearnable percentage: 0, 10 or 60")->check(CLI::IsMember({0, 10, 60}));
  app.add_option("--landscape", a.landscape, "landscape JSON instead of a preset")->check(CLI::ExistingFile);
  app.add_option("--iters", a.iters, "iterations per run");
  app.add_option("--episodes", a.episodes, "episodes per iteration");
  app.add_option("--seeds", a.seeds, "independent runs (seeds seed, seed + 1, ...)");
  app.add_option("--seed", a.seed, "first seed");
  app.add_option("--dims", a.dims, "theta features of the preset landscape");
  app.add_flag("--oracle", a.oracle, "add a region label predicted by a classifier trained on the corpus");
  app.add_option("--oracle-epochs", a.oracle_epochs)->capture_default_str();
  app.add_option("--out", a.out, "output directory")->capture_default_str();
}

json sim_to_json(const curriculum::SimConfig& c, std::size_t seeds) {
  const auto& g = c.alpgmm;
  return {{"sampler", curriculum::to_string(c.sampler)},
          {"iterations", c.iterations},
          {"episodes_per_iteration", c.episodes_per_iteration},
          {"running_window", c.running_window},
          {"corpus_per_region", c.corpus_per_region},
          {"gmm_components", c.gmm_components},
          {"buffer_capacity", c.buffer_capacity},
          {"offline_capacity", c.offline_capacity},
          {"seed", c.seed},
          {"seeds", seeds},
          {"alpgmm",
           {{"random_sample_rate", g.random_sample_rate},
            {"k_min", g.k_min},
            {"k_max", g.k_max},
            {"update_interval", g.update_interval},
            {"fit_window", g.fit_window},
            {"utility_floor", g.utility_floor},
            {"em", {{"max_iter", g.em.max_iter}, {"tol", g.em.tol}, {"reg", g.em.reg}}}}}};
}

curriculum::SimConfig sim_from_json(const json& j) {
  curriculum::SimConfig c;
  if (j.contains("sampler")) c.sampler = curriculum::parse_sampler_kind(j.at("sampler").get<std::string>());
  c.iterations = j.value("iterations", c.iterations);
  c.episodes_per_iteration = j.value("episodes_per_iteration", c.episodes_per_iteration);
  c.running_window = j.value("running_window", c.running_window);
  c.corpus_per_region = j.value("corpus_per_region", c.corpus_per_region);
  c.gmm_components = j.value("gmm_components", c.gmm_components);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.offline_capacity = j.value("offline_capacity", c.offline_capacity);
  c.seed = j.value("seed", c.seed);
  const json g = j.value("alpgmm", json::object());
  auto& o = c.alpgmm;
  o.random_sample_rate = g.value("random_sample_rate", o.random_sample_rate);
  o.k_min = g.value("k_min", o.k_min);
  o.k_max = g.value("k_max", o.k_max);
  o.update_interval = g.value("update_interval", o.update_interval);
  o.fit_window = g.value("fit_window", o.fit_window);
  o.utility_floor = g.value("utility_floor", o.utility_floor);
  const json em = g.value("em", json::object());
  o.em.max_iter = em.value("max_iter", o.em.max_iter);
  o.em.tol = em.value("tol", o.em.tol);
  o.em.reg = em.value("reg", o.em.reg);
  return c;
}

int cmd_curriculum(const CurriculumArgs& a, RunManifest& m, std::ostream& err) {
  const json sec = config_section(a.config, "curriculum");
  curriculum::SimConfig cfg = sim_from_json(sec);
  if (a.sampler) cfg.sampler = curriculum::parse_sampler_kind(*a.sampler);
  overlay(a.iters, cfg.iterations);
  overlay(a.episodes, cfg.episodes_per_iteration);
  overlay(a.seed, cfg.seed);
  std::size_t n_seeds = sec.value("seeds", std::size_t{1});
  overlay(a.seeds, n_seeds);
  if (n_seeds == 0) throw UsageError("--seeds must be positive");

  curriculum::SurrogateLandscape land;
  json land_cfg;
  if (!a.landscape.empty()) {
    if (a.preset || a.dims) throw UsageError("--landscape excludes --preset and --dims");
    land = curriculum::SurrogateLandscape::from_json(read_json_file(a.landscape));
    land.reset();
    land.validate();
    m.add_input(a.landscape);
    land_cfg = {{"file", a.landscape}};
  } else {
    int preset = sec.value("preset", 60);
    overlay(a.preset, preset);
    curriculum::PresetOptions po;
    po.dims = sec.value("dims", po.dims);
    overlay(a.dims, po.dims);
    land = curriculum::make_preset(preset, po);
    land_cfg = {{"preset", preset}, {"dims", po.dims}, {"seed", po.seed}};
  }
  if (!a.config.empty()) m.add_input(a.config);

  std::vector<std::uint64_t> seeds(n_seeds);
  std::iota(seeds.begin(), seeds.end(), cfg.seed);
  const std::size_t threads = worker_threads(seeds.size());
  m.seed = cfg.seed;
  m.config = {{"curriculum", sim_to_json(cfg, n_seeds)}, {"landscape", land_cfg}, {"threads", threads},
              {"oracle", a.oracle}};
  err << "curriculum: " << curriculum::to_string(cfg.sampler) << " on " << land.name << ", " << n_seeds
      << " seed(s), " << threads << " thread(s)\n";
  const std::vector<curriculum::SimResult> runs = curriculum::run_curriculum_seeds(land, cfg, seeds, threads);

  std::optional<curriculum::OracleClassifier> oracle;
  if (a.oracle) {
    std::mt19937_64 rng(cfg.seed);
    std::vector<int> labels;
    const curriculum::Points X = curriculum::offline_corpus(land, cfg.corpus_per_region, rng, &labels);
    curriculum::OracleClassifierConfig oc;
    oc.epochs = a.oracle_epochs;
    oc.seed = cfg.seed;
    oracle.emplace();
    oracle->train(X, labels, land.regions.size(), oc);
    err << "oracle accuracy on its corpus: " << oracle->accuracy(X, labels) << '\n';
  }

  fs::create_directories(a.out);
  const std::string stem = curriculum::to_string(cfg.sampler) + "_" + (land.name.empty() ? "custom" : "p" + land.name);
  for (const auto& r : runs) {
    const fs::path p = fs::path(a.out) / ("trace_" + stem + "_s" + std::to_string(r.seed) + ".csv");
    std::ofstream os(p);
    if (!os) throw FormatError("cannot write " + p.string());
    if (oracle && !r.episodes.empty()) {
      curriculum::Points X(static_cast<Eigen::Index>(r.episodes.size()), r.episodes[0].theta.size());
      for (std::size_t i = 0; i < r.episodes.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = r.episodes[i].theta.transpose();
      const std::vector<int> labels = oracle->predict(X);
      curriculum::write_trace_csv(os, r, &labels);
    } else {
      curriculum::write_trace_csv(os, r);
    }
    os.close();
    m.add_output(p);
    if (!r.iterations.empty()) {
      err << "seed " << r.seed << ": running performance " << r.final_running_performance() << ", gamma "
          << r.iterations.back().gamma << ", refits " << r.iterations.back().updates << '\n';
    }
  }
  const fs::path summary = fs::path(a.out) / ("summary_" + stem + ".csv");
  {
    std::ofstream os(summary);
    if (!os) throw FormatError("cannot write " + summary.string());
    curriculum::write_summary_csv(os, runs);
  }
  m.add_output(summary);
  const fs::path land_out = fs::path(a.out) / "landscape.json";
  {
    std::ofstream os(land_out);
    os << land.to_json().dump(2) << '\n';
  }
  m.add_output(land_out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

struct ReplayArgs {
  std::string manifest;
  bool verify = false;
};

int cmd_replay(const ReplayArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  const RunManifest m = read_manifest(a.manifest);
  for (const auto& h : m.inputs) {
    if (h.path == "-") throw UsageError("replay: the run read stdin, which cannot be replayed");
    if (!fs::exists(h.path)) throw UsageError("replay: input " + h.path + " is missing");
    if (file_crc32(h.path) != h.crc32) throw ConfigError("replay: input " + h.path + " changed since the run");
  }
  if (m.argv.empty() || m.argv[0] == "replay") throw FormatError("replay: manifest has no command to run");
  const int code = run(m.argv, in, out, err);
  if (code != kExitOk || !a.verify) return code;
  std::size_t bad = 0;
  for (const auto& h : m.outputs) {
    if (h.path == "-") continue;
    const std::string now = fs::exists(h.path) ? file_crc32(h.path) : "missing";
    if (now != h.crc32) {
      err << "replay: " << h.path << " differs (" << h.crc32 << " then, " << now << " now)\n";
      ++bad;
    }
  }
  err << "replay: " << m.outputs.size() - bad << "/" << m.outputs.size() << " outputs identical\n";
  return bad ? kExitFailure : kExitOk;
}

}  // namespace

std::size_t worker_threads(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FLD_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw UsageError(std::string("FLD_THREADS must be a positive integer, got '") + env + "'");
    n = std::min(n, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fourier Latent Dynamics: training, evaluation, synthesis, gating and curriculum experiments", "fld"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FLD_VERSION);

  TrainArgs ta;
  EvalArgs ea;
  ManifoldArgs ma;
  SynthArgs sa;
  GateArgs ga;
  CurriculumArgs ca;
  ReplayArgs ra;
  std::string manifest_flag;

  auto* train = app.add_subcommand("train", "train a model; writes model.ckpt, loss.csv, manifest.json");
  add_train(*train, ta);
  auto* eval = app.add_subcommand("eval", "prediction error against horizon (CSV)");
  add_eval(*eval, ea);
  auto* manifold = app.add_subcommand("manifold", "2-D PCA of phase features (CSV)");
  add_manifold(*manifold, ma);
  auto* synth = app.add_subcommand("synth", "autoregressive synthesis from a latent state (CSV)");
  add_synth(*synth, sa);
  auto* gate = app.add_subcommand("gate", "fallback gate over frames on stdin (JSONL)");
  add_gate(*gate, ga);
  auto* cur = app.add_subcommand("curriculum", "skill-sampler study on the surrogate learner (CSV)");
  add_curriculum(*cur, ca);
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", ra.manifest)->required()->check(CLI::ExistingFile);
  replay->add_flag("--verify", ra.verify, "fail unless every output is byte-identical to the recorded one");
  for (auto* s : {eval, manifold, synth, gate})
    s->add_option("--manifest", manifest_flag, "manifest path (default: next to --out)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunManifest m;
  m.argv = args;
  ManifestClock clock(m);
  try {
    int code = kExitOk;
    fs::path mpath;
    if (train->parsed()) {
      m.command = "train";
      code = cmd_train(ta, m, err);
      mpath = fs::path(ta.out) / "manifest.json";
    } else if (eval->parsed()) {
      m.command = "eval";
      code = cmd_eval(ea, m, out, err);
      mpath = manifest_path(manifest_flag, ea.out, "eval.manifest.json");
    } else if (manifold->parsed()) {
      m.command = "manifold";
      code = cmd_manifold(ma, m, out, err);
      mpath = manifest_path(manifest_flag, ma.out, "manifold.manifest.json");
    } else if (synth->parsed()) {
      m.command = "synth";
      code = cmd_synth(sa, m, out, err);
      mpath = manifest_path(manifest_flag, sa.out, "synth.manifest.json");
    } else if (gate->parsed()) {
      m.command = "gate";
      if (ga.input == "-") m.inputs.push_back({"-", "", 0});
      code = cmd_gate(ga, m, in, out, err);
      mpath = manifest_path(manifest_flag, ga.out, "gate.manifest.json");
    } else if (cur->parsed()) {
      m.command = "curriculum";
      code = cmd_curriculum(ca, m, err);
      mpath = fs::path(ca.out) / "manifest.json";
    } else if (replay->parsed()) {
      return cmd_replay(ra, in, out, err);
    }
    clock.finish();
    if (!mpath.empty()) write_manifest(mpath, m);
    return code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help() << '\n';
    return kExitUsage;
  } catch (const fld::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace fld::cli
