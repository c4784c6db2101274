#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fld/common/error.hpp"
#include "fld/dynamics/gate.hpp"
#include "fld/dynamics/synthesis.hpp"
#include "fld/signal/synthetic.hpp"
#include "fld/training/trainer.hpp"

using namespace fld::dynamics;
using fld::numerics::DenseArray;
namespace sig = fld::signal;
namespace tr = fld::training;

namespace {

constexpr double kDt = 0.02;

constexpr std::size_t kH = 20;

// 5 Hz with a second harmonic: two cycles per window.
sig::Trajectory family() {
  sig::SyntheticMotionSpec sp;
  sp.base_frequency = 5.0;
  sp.frames = 400;
  sp.amplitude = {1.0, 0.5, 0.8, 0.3};
  sp.phase_offset = {0.0, 0.2, 0.4, 0.7};
  sp.mean = {0.5, 0.0, -1.0, 0.2};
  sp.harmonics = {1.0, 0.25};
  return sig::generate_synthetic(sp);
}

// One small FLD model trained on a single family, shared by the tests.
const tr::TrainResult& trained() {
  static const tr::TrainResult r = [] {
    tr::ModelSettings s;
    s.fld.state_dim = 4;
    s.fld.channels = 2;
    s.fld.window = kH;
    s.fld.horizon = 3;
    s.fld.alpha = 0.8;
    s.fld.hidden_channels = 8;
    s.fld.kernel_size = 5;
    tr::TrainConfig t;
    t.max_iterations = 600;
    t.lr = 3e-3;
    t.epochs = 1;
    t.mini_batches = 1;
    t.batch_size = 16;
    t.seed = 4;
    t.validation_fraction = 0.0;
    return tr::train(fld::model::ModelKind::fld, std::vector<sig::Trajectory>{family()}, t, s);
  }();
  return r;
}

const TrainedModel& model() { return trained().model; }

LatentRollState state_with(std::vector<double> phi, std::vector<double> f, double a = 0.5) {
  const std::size_t c = phi.size();
  return {{phi}, {f, std::vector<double>(c, a), std::vector<double>(c, 0.1)}, 0};
}

InputBuffer buffer_from(const sig::Trajectory& t, std::size_t start, std::size_t horizon) {
  InputBuffer b(horizon + 1);
  for (std::size_t i = 0; i <= horizon; ++i) b.push(sig::extract_segment(t, start + i, kH));
  return b;
}

sig::Trajectory uniform_noise(std::size_t frames, std::size_t d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  DenseArray f({frames, d});
  for (double& v : f.storage()) v = u(rng);
  return {std::move(f), kDt, "noise"};
}

}  // namespace

TEST_CASE("propagate advances phase by f dt and keeps theta") {
  const LatentRollState s = state_with({0.1, -0.3}, {0.0, 2.0});
  const LatentRollState n = propagate(s, kDt);
  CHECK(n.phi.phi[0] == 0.1);
  CHECK(n.phi.phi[1] == doctest::Approx(-0.26).epsilon(1e-14));
  CHECK(n.theta.f == s.theta.f);
  CHECK(n.theta.a == s.theta.a);
  CHECK(n.step == 1);

  // Nyquist: half a cycle per step, flipping sign through the wrap.
  LatentRollState q = state_with({0.1}, {1.0 / (2.0 * kDt)});
  q = propagate(q, kDt);
  CHECK(q.phi.phi[0] == doctest::Approx(-0.4).epsilon(1e-12));
  q = propagate(q, kDt);
  CHECK(q.phi.phi[0] == doctest::Approx(0.1).epsilon(1e-12));

  LatentRollState k = state_with({0.2, 0.45}, {1.37, 3.9});
  for (int i = 0; i < 37; ++i) k = propagate(k, kDt);
  const auto once = fld::model::advance(state_with({0.2, 0.45}, {1.37, 3.9}).phi, k.theta, 37.0, kDt);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double diff = fld::numerics::wrap_phase(k.phi.phi[ch] - once.phi[ch]);
    CHECK(std::abs(diff) < 1e-12);
  }
}

TEST_CASE("theta interpolation endpoints and midpoint") {
  const LatentParameterization src{{1.0, 0.5}, {0.2, 0.3}, {0.0, 1.0}};
  const LatentParameterization dst{{3.0, 0.5}, {0.4, 0.1}, {1.0, -1.0}};
  const auto sched = interpolate_theta(src, dst, 4);
  REQUIRE(sched.size() == 5);
  CHECK(sched.front().f == src.f);
  CHECK(sched.front().b == src.b);
  CHECK(sched.back().a == dst.a);
  CHECK(sched[2].f[0] == 2.0);
  CHECK(sched[2].b[1] == 0.0);
  CHECK(interpolate_theta(src, dst, 0).size() == 1);
  const LatentParameterization bad{{1.0}, {1.0}, {1.0}};
  CHECK_THROWS_AS(interpolate_theta(src, bad, 3), fld::ShapeError);
}

TEST_CASE("synthesis is deterministic and zero amplitude is constant") {
  const LatentRollState s = encode_state(model(), sig::extract_segment(family(), 100, kH));
  const sig::Trajectory a = synthesize(model(), s, 40);
  const sig::Trajectory b = synthesize(model(), s, 40);
  CHECK(a.length() == 40);
  CHECK(a.frames.storage() == b.frames.storage());
  CHECK_THROWS_AS(synthesize(model(), s, 0), fld::ConfigError);

  LatentRollState flat = s;
  for (double& v : flat.theta.a) v = 0.0;
  const sig::Trajectory c = synthesize(model(), flat, 10);
  const std::vector<double> first = target_frame(model(), flat);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t j = 0; j < 4; ++j) CHECK(c.frames.at(t, j) == doctest::Approx(first[j]).epsilon(1e-12));

  const auto fixed = std::vector<LatentParameterization>(40, s.theta);
  CHECK(synthesize_schedule(model(), s.phi, fixed).frames.storage() == a.frames.storage());
}

TEST_CASE("dominant frequency of a sampled sine") {
  DenseArray f({500, 2});
  for (std::size_t t = 0; t < 500; ++t) {
    f.at(t, 0) = std::sin(2.0 * std::numbers::pi * 1.37 * t * kDt);
    f.at(t, 1) = 0.2 * std::cos(2.0 * std::numbers::pi * 1.37 * t * kDt + 0.3) + 4.0;
  }
  const sig::Trajectory t{f, kDt, "sine"};
  CHECK(dominant_frequency(t, 0, 500) == doctest::Approx(1.37).epsilon(0.01));
  CHECK(dominant_frequency(t, 100, 400, {1}) == doctest::Approx(1.37).epsilon(0.02));
  CHECK_THROWS_AS(dominant_frequency(t, 0, 5), fld::ConfigError);
}

TEST_CASE("midpoint quantile convention") {
  CHECK(quantile_midpoint({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
  CHECK(quantile_midpoint({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  CHECK(quantile_midpoint({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(quantile_midpoint({1.0, 2.0}, 0.0), fld::ConfigError);
  CHECK_THROWS_AS(quantile_midpoint({1.0, 2.0}, 1.5), fld::ConfigError);
  CHECK_THROWS_AS(quantile_midpoint({}, 0.5), fld::ConfigError);
}

TEST_CASE("calibration takes the quantile of per-anchor losses") {
  const std::vector<sig::Trajectory> corpus{family()};
  const auto losses = anchor_losses(model(), corpus, 3, 0.8, 7);
  CHECK(losses.size() == (400 - kH - 3) / 7 + 1);
  const GateConfig g = calibrate_threshold(model(), corpus, 1.0, 7);
  CHECK(g.epsilon == *std::max_element(losses.begin(), losses.end()));
  CHECK(g.horizon == 3);
  CHECK(g.alpha == 0.8);
  CHECK(g.anchors == losses.size());
  CHECK(g.corpus_crc32.size() == 8);
  CHECK(GateConfig::from_json(g.to_json()).epsilon == g.epsilon);
  CHECK_THROWS_AS(calibrate_threshold(model(), std::vector<sig::Trajectory>{}, 0.99), fld::ConfigError);
  CHECK_THROWS_AS(calibrate_threshold(model(), corpus, 0.0), fld::ConfigError);
  CHECK_THROWS_AS(manual_gate(model(), 0.0), fld::ConfigError);
}

TEST_CASE("gate loss shares the training objective") {
  const sig::Trajectory t = family();
  const InputBuffer buf = buffer_from(t, 50, 3);
  fld::model::HorizonBatch hb;
  for (std::size_t i = 0; i <= 3; ++i) {
    DenseArray seg = sig::extract_segment(t, 50 + i, kH).reshaped({1, 4, kH});
    model().normalization.apply_segment(seg);
    if (i == 0) {
      hb.current = seg;
    } else {
      hb.futures.push_back(seg);
    }
  }
  const double direct = model().fld().eval_loss(hb, 3, 0.8).total;
  CHECK(std::abs(gate_loss(model(), buf, 3, 0.8) - direct) < 1e-12);
  CHECK_THROWS_AS(gate_loss(model(), buffer_from(t, 0, 2), 3, 0.8), fld::ConfigError);
}

TEST_CASE("gate verdicts") {
  const sig::Trajectory t = family();
  const GateConfig g = calibrate_threshold(model(), std::vector<sig::Trajectory>{t}, 0.99, 3);
  const LatentRollState s = encode_state(model(), sig::extract_segment(t, 0, kH));

  SUBCASE("empty buffer propagates exactly") {
    const GateDecision d = gate_step(InputBuffer(4), s, g, model());
    CHECK(d.verdict == Verdict::no_input);
    CHECK_FALSE(d.loss.has_value());
    CHECK(d.state.phi.phi == propagate(s, kDt).phi.phi);
    CHECK(d.target == target_frame(model(), d.state));
  }
  SUBCASE("partial buffer is an error") {
    InputBuffer part(4);
    part.push(sig::extract_segment(t, 0, kH));
    CHECK_THROWS_AS(gate_step(part, s, g, model()), fld::ConfigError);
  }
  SUBCASE("in-distribution input is accepted and re-encoded") {
    const InputBuffer buf = buffer_from(t, 120, 3);
    const GateDecision d = gate_step(buf, s, g, model());
    CHECK(d.verdict == Verdict::accepted);
    CHECK(*d.loss <= g.epsilon);
    const LatentRollState newest = encode_state(model(), buf[3]);
    CHECK(d.state.phi.phi == newest.phi.phi);
    CHECK(d.state.theta.f == newest.theta.f);
  }
  SUBCASE("noise is rejected and falls back to propagation") {
    const InputBuffer buf = buffer_from(uniform_noise(40, 4, 9), 0, 3);
    const GateDecision d = gate_step(buf, s, g, model());
    CHECK(d.verdict == Verdict::rejected);
    CHECK(*d.loss > 10.0 * g.epsilon);
    CHECK(d.state.phi.phi == propagate(s, kDt).phi.phi);
  }
  SUBCASE("raising epsilon never turns an acceptance into a rejection") {
    for (std::size_t start : {0u, 40u, 200u}) {
      const InputBuffer buf = buffer_from(t, start, 3);
      GateConfig lo = g, hi = g;
      hi.epsilon *= 3.0;
      if (gate_step(buf, s, lo, model()).verdict == Verdict::accepted) {
        CHECK(gate_step(buf, s, hi, model()).verdict == Verdict::accepted);
      }
    }
  }
}

TEST_CASE("the model's own synthesized stream scores far below noise") {
  const sig::Trajectory t = family();
  const LatentRollState s = encode_state(model(), sig::extract_segment(t, 60, kH));
  const sig::Trajectory own = synthesize(model(), s, 80);
  const auto own_losses = anchor_losses(model(), std::vector<sig::Trajectory>{own}, 3, 0.8, 4);
  const auto noise_losses = anchor_losses(model(), std::vector<sig::Trajectory>{uniform_noise(80, 4, 5)}, 3, 0.8, 4);
  CHECK(*std::max_element(own_losses.begin(), own_losses.end()) <
        0.1 * *std::min_element(noise_losses.begin(), noise_losses.end()));
}

TEST_CASE("fallback output equals pure synthesis") {
  const GateConfig g = manual_gate(model(), 1e-9);  // rejects anything
  const LatentRollState s = encode_state(model(), sig::extract_segment(family(), 30, kH));
  GateStream stream(model(), g, s);
  const sig::Trajectory noise = uniform_noise(60, 4, 3);
  const sig::Trajectory pure = synthesize(model(), propagate(s, kDt), 60);
  for (std::size_t k = 0; k < 60; ++k) {
    const GateDecision d = stream.push(noise.frame(k));
    CHECK(d.verdict == (k + 1 < kH + 3 ? Verdict::no_input : Verdict::rejected));
    for (std::size_t j = 0; j < 4; ++j) CHECK(d.target[j] == pure.frames.at(k, j));
  }
}

TEST_CASE("stream warm-up, reset and periodic shift invariance") {
  const sig::Trajectory t = family();
  const GateConfig g = calibrate_threshold(model(), std::vector<sig::Trajectory>{t}, 0.99, 3);
  GateStream stream(model(), g, neutral_state(2));
  std::vector<GateDecision> out;
  for (std::size_t k = 0; k < 60; ++k) out.push_back(stream.push(t.frame(k)));
  for (std::size_t k = 0; k + 1 < kH + 3; ++k) CHECK(out[k].verdict == Verdict::no_input);
  CHECK(out[kH + 2].loss.has_value());
  CHECK(stream.push(std::nullopt).verdict == Verdict::no_input);
  CHECK(stream.push(t.frame(60)).verdict == Verdict::no_input);
  CHECK_THROWS_AS(stream.push(std::vector<double>{1.0, 2.0}), fld::ShapeError);

  // Strictly periodic input: 1 Hz at 50 Hz sampling repeats every 50 frames.
  DenseArray f({200, 4});
  for (std::size_t k = 0; k < 200; ++k)
    for (std::size_t j = 0; j < 4; ++j) f.at(k, j) = std::sin(2.0 * std::numbers::pi * (1.0 * k * kDt + 0.1 * j)) + 0.2 * j;
  const sig::Trajectory periodic{f, kDt, "periodic"};
  GateConfig wide = g;
  wide.epsilon = 1e6;
  GateStream ps(model(), wide, neutral_state(2));
  std::vector<GateDecision> pd;
  for (std::size_t k = 0; k < 200; ++k) pd.push_back(ps.push(periodic.frame(k)));
  for (std::size_t k = 30; k + 50 < 200; ++k) {
    CHECK(pd[k].verdict == pd[k + 50].verdict);
    CHECK(*pd[k].loss == doctest::Approx(*pd[k + 50].loss).epsilon(1e-9));
  }
}

TEST_CASE("decision records carry the full state") {
  const GateDecision d = gate_step(InputBuffer(4), neutral_state(2), manual_gate(model(), 1.0), model());
  const auto j = decision_to_json(7, d);
  CHECK(j["step"] == 7);
  CHECK(j["verdict"] == "no_input");
  CHECK(j["loss"].is_null());
  CHECK(j["phi"].size() == 2);
  CHECK(j["theta"]["f"].size() == 2);
  CHECK(j["target_frame"].size() == 4);
}

TEST_CASE("latent dynamics refuse non-latent models") {
  tr::ModelSettings s;
  s.fld.state_dim = 4;
  s.fld.window = 16;
  s.fld.channels = 2;
  const TrainedModel vae(fld::model::ModelKind::vae, s, 1);
  CHECK_THROWS_AS(target_frame(vae, neutral_state(2)), fld::ConfigError);
}
