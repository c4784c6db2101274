#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fld/common/error.hpp"
#include "fld/model/baselines.hpp"
#include "fld/model/fld_model.hpp"
#include "fld/model/latent.hpp"
#include "fld/numerics/optim.hpp"

using namespace fld::model;
using fld::numerics::DenseArray;
using fld::numerics::NormMode;
using fld::numerics::Shape;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DenseArray random_array(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  DenseArray a(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : a.storage()) v = n(rng);
  return a;
}

FLDConfig tiny_config() {
  FLDConfig c;
  c.state_dim = 4;
  c.channels = 2;
  c.window = 16;
  c.horizon = 3;
  c.alpha = 0.8;
  c.hidden_channels = 6;
  c.kernel_size = 5;
  return c;
}

// Smooth multi-channel segments so the latent curves carry some power.
HorizonBatch sinusoid_batch(const FLDConfig& cfg, std::size_t batch, std::size_t horizon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t d = cfg.state_dim, H = cfg.window;
  const std::size_t len = H + horizon;
  HorizonBatch hb;
  hb.current = DenseArray({batch, d, H});
  hb.futures.assign(horizon, DenseArray({batch, d, H}));
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<double> traj(len * d);
    const double f = 1.0 + 3.0 * u(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const double off = u(rng), amp = 0.5 + u(rng);
      for (std::size_t t = 0; t < len; ++t) traj[t * d + j] = amp * std::sin(kTwoPi * (f * t * cfg.dt + off)) + 0.1 * j;
    }
    for (std::size_t i = 0; i <= horizon; ++i) {
      DenseArray& dst = i == 0 ? hb.current : hb.futures[i - 1];
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < H; ++k) dst.at(b, j, k) = traj[(i + k) * d + j];
    }
  }
  return hb;
}

std::vector<double> curve(std::size_t H, const std::function<double(double)>& fn) {
  std::vector<double> z(H);
  for (std::size_t t = 0; t < H; ++t) z[t] = fn(static_cast<double>(t));
  return z;
}

}  // namespace

// ---------------------------------------------------------------------------
// parameterization
// ---------------------------------------------------------------------------

TEST_CASE("parameterize: bin-aligned sinusoid") {
  const std::size_t H = 50;
  RealDft dft(H);
  auto z = curve(H, [&](double t) { return 2.0 * std::sin(kTwoPi * 3.0 * t / H) + 0.5; });
  auto p = parameterize_curve(dft, z, 0.02);
  CHECK(std::abs(p.f - 3.0) < 1e-9);
  CHECK(std::abs(p.a - 2.0) < 1e-9);
  CHECK(std::abs(p.b - 0.5) < 1e-9);
}

TEST_CASE("parameterize: constant curve") {
  RealDft dft(50);
  std::vector<double> z(50, 0.7);
  auto p = parameterize_curve(dft, z, 0.02);
  CHECK(p.zero_power);
  CHECK(p.f == 0.0);
  CHECK(p.a == 0.0);
  CHECK(std::abs(p.b - 0.7) < 1e-12);
}

TEST_CASE("parameterize: equal power in two bins") {
  const std::size_t H = 40;
  RealDft dft(H);
  auto z = curve(H, [&](double t) { return std::sin(kTwoPi * 2.0 * t / H) + std::sin(kTwoPi * 4.0 * t / H + 0.3); });
  auto p = parameterize_curve(dft, z, 0.02);
  CHECK(std::abs(p.f - 3.0 / (H * 0.02)) < 1e-9);
}

TEST_CASE("reconstruct: zero amplitude and whole-cycle shifts") {
  const auto T = time_grid(51, 0.02);
  CHECK(T.front() == doctest::Approx(-1.0));
  CHECK(T.back() == 0.0);
  std::vector<double> out(51), shifted(51);
  reconstruct_curve(0.2, 1.3, 0.0, -0.4, T, out);
  for (double v : out) CHECK(v == -0.4);
  reconstruct_curve(0.2, 1.3, 0.9, 0.1, T, out);
  reconstruct_curve(1.2, 1.3, 0.9, 0.1, T, shifted);
  for (std::size_t t = 0; t < 51; ++t) CHECK(std::abs(out[t] - shifted[t]) < 1e-12);
}

TEST_CASE("reconstruct then parameterize recovers theta and phase") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t H : {16u, 50u, 51u}) {
    const double dt = 0.02;
    RealDft dft(H);
    const auto T = time_grid(H, dt);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * static_cast<double>((H - 1) / 2));
      const double f = static_cast<double>(k) / (static_cast<double>(H) * dt);
      const double a = 0.1 + 2.0 * u(rng);
      const double b = 2.0 * u(rng) - 1.0;
      const double phi = u(rng) - 0.5;
      std::vector<double> z(H);
      reconstruct_curve(phi, f, a, b, T, z);
      const auto p = parameterize_curve(dft, z, dt);
      CHECK(std::abs(p.f - f) < 1e-9);
      CHECK(std::abs(p.a - a) < 1e-9);
      CHECK(std::abs(p.b - b) < 1e-9);
      const double dphi = fld::numerics::wrap_phase(analytic_phase(dft, z) - phi);
      CHECK(std::abs(dphi) < 1e-6);
    }
  }
}

TEST_CASE("advancing phase by f dt equals shifting the time grid by dt") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double dt = 0.02;
  auto T = time_grid(51, dt);
  auto T_next = T;
  for (double& t : T_next) t += dt;
  for (int trial = 0; trial < 20; ++trial) {
    const double f = 10.0 * u(rng), a = u(rng) + 0.1, b = u(rng), phi = u(rng) - 0.5;
    std::vector<double> x(51), y(51);
    reconstruct_curve(phi + f * dt, f, a, b, T, x);
    reconstruct_curve(phi, f, a, b, T_next, y);
    for (std::size_t t = 0; t < 51; ++t) CHECK(std::abs(x[t] - y[t]) < 1e-12);
  }
}

TEST_CASE("parameterize and reconstruct gradients match finite differences") {
  std::mt19937_64 rng(9);
  const std::size_t H = 21;
  const double dt = 0.02;
  RealDft dft(H);
  const auto T = time_grid(H, dt);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> z(H);
    for (double& v : z) v = n(rng);
    const double wf = n(rng), wa = n(rng), wb = n(rng);
    auto obj = [&](const std::vector<double>& zz) {
      auto p = parameterize_curve(dft, zz, dt);
      return wf * p.f + wa * p.a + wb * p.b;
    };
    std::vector<double> dz(H, 0.0);
    parameterize_curve_backward(dft, z, dt, wf, wa, wb, dz);
    for (std::size_t t = 0; t < H; ++t) {
      auto up = z, dn = z;
      up[t] += 1e-6;
      dn[t] -= 1e-6;
      const double num = (obj(up) - obj(dn)) / 2e-6;
      CHECK(std::abs(num - dz[t]) < 1e-6 * std::max(1.0, std::abs(num)));
    }

    std::vector<double> w(H);
    for (double& v : w) v = n(rng);
    const double phi = 0.3, f = 2.2, a = 0.7, b = -0.1;
    auto rec = [&](double p, double ff, double aa, double bb) {
      std::vector<double> out(H);
      reconstruct_curve(p, ff, aa, bb, T, out);
      double s = 0.0;
      for (std::size_t t = 0; t < H; ++t) s += w[t] * out[t];
      return s;
    };
    const auto g = reconstruct_curve_backward(phi, f, a, T, w);
    const double h = 1e-6;
    CHECK(g.phi == doctest::Approx((rec(phi + h, f, a, b) - rec(phi - h, f, a, b)) / (2 * h)).epsilon(1e-6));
    CHECK(g.f == doctest::Approx((rec(phi, f + h, a, b) - rec(phi, f - h, a, b)) / (2 * h)).epsilon(1e-6));
    CHECK(g.a == doctest::Approx((rec(phi, f, a + h, b) - rec(phi, f, a - h, b)) / (2 * h)).epsilon(1e-6));
    CHECK(g.b == doctest::Approx((rec(phi, f, a, b + h) - rec(phi, f, a, b - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("latent helpers") {
  LatentParameterization th{{1, 2}, {3, 4}, {5, 6}};
  auto flat = th.flatten();
  CHECK(flat == std::vector<double>{1, 2, 3, 4, 5, 6});
  auto back = LatentParameterization::unflatten(flat);
  CHECK(back.b == th.b);
  LatentState s{{0.45, -0.2}};
  auto s2 = advance(s, th, 3.0, 0.02);
  CHECK(s2.phi[0] == doctest::Approx(fld::numerics::wrap_phase(0.45 + 0.06)));
  CHECK(s2.phi[0] < 0.0);
  CHECK_THROWS_AS(LatentParameterization::unflatten(std::vector<double>{1, 2}), fld::ShapeError);
}

// ---------------------------------------------------------------------------
// FLD model
// ---------------------------------------------------------------------------

TEST_CASE("config validation") {
  FLDConfig c;
  CHECK(c.kernel() == 51);
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), fld::ConfigError);
  c = FLDConfig{};
  c.window = 1;
  CHECK_THROWS_AS(c.validate(), fld::ConfigError);
  c = FLDConfig{};
  c.kernel_size = 4;
  CHECK_THROWS_AS(c.validate(), fld::ConfigError);
  c = tiny_config();
  auto round = FLDConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());
  FLDConfig even;
  even.window = 16;
  CHECK(even.kernel() == 17);
}

TEST_CASE("layer shapes follow the configuration") {
  FLDConfig c;
  FLDModel m(c, 0);
  auto params = m.parameters();
  CHECK(params.front()->name == "encoder.0.conv.weight");
  CHECK(params.front()->value.shape() == Shape{64, 27, 51});
  bool found_phase = false;
  for (auto* p : params) {
    if (p->name == "phase.weight") {
      CHECK(p->value.shape() == Shape{8, 2, 51});
      found_phase = true;
    }
    if (p->name == "decoder.2.conv.weight") CHECK(p->value.shape() == Shape{27, 64, 51});
  }
  CHECK(found_phase);
  CHECK(m.batchnorm_layers().size() == 6);
  c.final_activation = true;
  CHECK(FLDModel(c, 0).batchnorm_layers().size() == 7);
}

TEST_CASE("encode and decode: snapshot, batch consistency, shape errors") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 7);
  std::mt19937_64 rng(3);
  const DenseArray x = random_array({cfg.state_dim, cfg.window}, rng);

  const DenseArray z = m.encode(x);
  REQUIRE(z.shape() == Shape{1, 2, 16});
  const DenseArray again = FLDModel(cfg, 7).encode(x);
  CHECK(fld::numerics::max_abs_diff(z, again) == 0.0);
  // Frozen from the first verified run.
  CHECK(z[0] == doctest::Approx(0.01118298805162507).epsilon(1e-12));
  CHECK(z[17] == doctest::Approx(-0.14113005472023479).epsilon(1e-12));

  DenseArray batch({3, cfg.state_dim, cfg.window});
  for (std::size_t b = 0; b < 3; ++b) std::copy(x.storage().begin(), x.storage().end(), batch.storage().begin() + b * x.size());
  const DenseArray zb = m.encode(batch);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(zb[b * z.size() + k] == z[k]);

  const DenseArray y = m.decode(z);
  REQUIRE(y.shape() == Shape{1, 4, 16});
  CHECK(y[0] == doctest::Approx(-0.15753246234235366).epsilon(1e-12));
  const DenseArray yb = m.decode(zb);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(yb[b * y.size() + k] == y[k]);

  CHECK_THROWS_AS(m.encode(DenseArray({3, 16})), fld::ShapeError);
  CHECK_THROWS_AS(m.encode(DenseArray({4, 15})), fld::ShapeError);
  CHECK_THROWS_AS(m.decode(DenseArray({3, 16})), fld::ShapeError);
}

TEST_CASE("predict: zero step, frozen dynamics, manual substitution") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 11);
  std::mt19937_64 rng(4);
  auto hb = sinusoid_batch(cfg, 2, 0, rng);
  const Encoding enc = m.encode_parameters(hb.current);

  const DenseArray p0 = m.predict(hb.current, 0);
  CHECK(fld::numerics::max_abs_diff(p0, m.decode(m.reconstruct(enc, 0))) == 0.0);

  Encoding frozen = enc;
  frozen.f.fill(0.0);
  const DenseArray base = m.decode(m.reconstruct(frozen, 0));
  for (long i = 1; i <= 5; ++i) CHECK(fld::numerics::max_abs_diff(m.decode(m.reconstruct(frozen, i)), base) == 0.0);

  Encoding manual = enc;
  for (std::size_t k = 0; k < manual.phi.size(); ++k) {
    manual.phi[k] = fld::numerics::wrap_phase(enc.phi[k] + enc.f[k] * cfg.dt);
  }
  CHECK(fld::numerics::max_abs_diff(m.predict(hb.current, 1), m.decode(m.reconstruct(manual, 0))) == 0.0);

  // State-level decoding agrees with the batched path.
  const DenseArray single = m.decode_state(enc.state(1), enc.theta(1));
  for (std::size_t k = 0; k < single.size(); ++k) CHECK(single[k] == p0[single.size() + k]);

  CHECK_THROWS_AS(m.predict(hb.current, -1), fld::ConfigError);
  for (std::size_t k = 0; k < enc.phi.size(); ++k) {
    CHECK(enc.phi[k] >= -0.5);
    CHECK(enc.phi[k] < 0.5);
    CHECK(enc.f[k] >= 0.0);
    CHECK(enc.f[k] <= 0.5 / cfg.dt);
    CHECK(enc.a[k] >= 0.0);
  }
}

TEST_CASE("loss: weighted sum arithmetic and monotonicity in alpha") {
  const std::vector<double> li{4.0, 2.0, 1.0};
  CHECK(weighted_loss(li, 0.5) == 5.25);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> l(1 + trial % 7);
    for (double& v : l) v = u(rng);
    double prev = -1.0;
    for (double alpha = 0.05; alpha <= 1.0; alpha += 0.05) {
      const double w = weighted_loss(l, alpha);
      CHECK(w >= prev);
      prev = w;
    }
  }
}

TEST_CASE("loss: horizon zero is the autoencoder reconstruction") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 5);
  std::mt19937_64 rng(8);
  auto hb = sinusoid_batch(cfg, 4, 3, rng);
  const LossResult l = m.loss(hb, 0, 1.0, {NormMode::train, false, false});
  REQUIRE(l.per_horizon.size() == 1);
  CHECK(l.total == l.per_horizon[0]);
  const DenseArray rec = m.predict(hb.current, 0, NormMode::train);
  CHECK(l.total == fld::numerics::mean_squared_difference(rec, hb.current));

  // Horizon-N loss in eval mode against the model's own predictions.
  HorizonBatch own = hb;
  for (std::size_t i = 1; i <= 3; ++i) own.futures[i - 1] = m.predict(hb.current, static_cast<long>(i));
  const LossResult le = m.loss(own, 3, 0.9, {NormMode::eval, false, false});
  CHECK(le.per_horizon[0] == fld::numerics::mean_squared_difference(m.predict(hb.current, 0), hb.current));
  for (std::size_t i = 1; i <= 3; ++i) CHECK(le.per_horizon[i] < 1e-28);
  CHECK(le.total == doctest::Approx(le.per_horizon[0]).epsilon(1e-12));

  CHECK_THROWS_AS(m.loss(hb, 4, 1.0, {}), fld::ConfigError);
}

TEST_CASE("loss: running statistics update only when asked") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 5);
  std::mt19937_64 rng(8);
  auto hb = sinusoid_batch(cfg, 4, 3, rng);
  const DenseArray before = m.batchnorm_layers()[0]->state.running_mean;
  m.loss(hb, 3, 1.0, {NormMode::train, false, false});
  CHECK(fld::numerics::max_abs_diff(before, m.batchnorm_layers()[0]->state.running_mean) == 0.0);
  m.loss(hb, 3, 1.0, {NormMode::train, false, true});
  CHECK(fld::numerics::max_abs_diff(before, m.batchnorm_layers()[0]->state.running_mean) > 0.0);
}

namespace {

bool feeds_batchnorm(const std::string& name) {
  return name.find(".conv.bias") != std::string::npos && name != "decoder.2.conv.bias";
}

}  // namespace

TEST_CASE("full-model gradient check, train-mode batch statistics") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 21);
  std::mt19937_64 rng(13);
  auto hb = sinusoid_batch(cfg, 3, cfg.horizon, rng);
  auto all = m.parameters();
  auto loss = [&](bool backward) {
    fld::numerics::zero_grads(all);
    return m.loss(hb, cfg.horizon, cfg.alpha, {NormMode::train, backward, false}).total;
  };
  // Conv biases that feed a batch-normalized layer cancel out exactly; their
  // gradient is zero and a finite difference only sees roundoff.
  std::vector<fld::numerics::Parameter*> checked, cancelled;
  for (auto* p : all) (feeds_batchnorm(p->name) || p->name == "phase.bias" ? cancelled : checked).push_back(p);
  // Three items per batch can leave a normalized phase logit pair near the
  // origin where atan2 bends sharply, hence the smaller step here.
  const auto report = fld::numerics::gradient_check(loss, checked, 1e-5, 0, 4);
  INFO(report.worst_parameter << "[" << report.worst_index << "] analytic " << report.analytic << " numeric "
                              << report.numeric);
  CHECK(report.entries_checked > 800);
  CHECK(report.max_rel_error < 1e-5);

  loss(true);
  for (auto* p : cancelled)
    for (double g : p->grad.storage()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("full-model gradient check, eval-mode running statistics") {
  const FLDConfig cfg = tiny_config();
  FLDModel m(cfg, 22);
  std::mt19937_64 rng(14);
  auto hb = sinusoid_batch(cfg, 3, cfg.horizon, rng);
  // Move the running estimates away from their initial values first.
  for (int k = 0; k < 3; ++k) m.loss(hb, cfg.horizon, cfg.alpha, {NormMode::train, false, true});
  auto all = m.parameters();
  auto loss = [&](bool backward) {
    fld::numerics::zero_grads(all);
    return m.loss(hb, cfg.horizon, cfg.alpha, {NormMode::eval, backward, false}).total;
  };
  const auto report = fld::numerics::gradient_check(loss, all, 1e-4, 0, 4);
  INFO(report.worst_parameter << "[" << report.worst_index << "] analytic " << report.analytic << " numeric "
                              << report.numeric);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("final activation variant bounds outputs below at -1") {
  FLDConfig cfg = tiny_config();
  cfg.final_activation = true;
  FLDModel m(cfg, 1);
  std::mt19937_64 rng(6);
  auto hb = sinusoid_batch(cfg, 2, 0, rng);
  const DenseArray y = m.predict(hb.current, 0);
  for (double v : y.storage()) CHECK(v >= -1.0);
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

TEST_CASE("representation parameter counts") {
  CHECK(representation_param_count(ModelKind::fld, 27, 8, 51, 1000) == 32);
  CHECK(representation_param_count(ModelKind::original, 27, 8, 51, 100) == 2700);
  CHECK(representation_param_count(ModelKind::pae, 27, 8, 51, 51) == 32);
  CHECK(representation_param_count(ModelKind::vae, 27, 8, 51, 60) == 80);
  CHECK_THROWS_AS(representation_param_count(ModelKind::pae, 27, 8, 51, 50), fld::ConfigError);
  CHECK_THROWS_AS(representation_param_count(ModelKind::ff, 27, 8, 51, 60), fld::ConfigError);
  CHECK(parse_model_kind("pae") == ModelKind::pae);
  CHECK(to_string(ModelKind::vae) == "vae");
  CHECK_THROWS_AS(parse_model_kind("gan"), fld::ConfigError);
}

TEST_CASE("gaussian KL closed form") {
  CHECK(gaussian_kl(0.0, 1.0) == 0.0);
  CHECK(gaussian_kl(1.0, 1.0) == 0.5);
  CHECK(gaussian_kl(0.0, 2.0) == doctest::Approx(1.5 - std::log(2.0)));
}

TEST_CASE("mlp gradient check") {
  std::mt19937_64 rng(1);
  Mlp net("m", {5, 7, 6, 3}, Activation::elu, Activation::softplus, rng);
  const DenseArray x = random_array({4, 5}, rng);
  const DenseArray w = random_array({4, 3}, rng);
  auto params = net.parameters();
  auto loss = [&](bool backward) {
    fld::numerics::zero_grads(params);
    Mlp::Cache cache;
    const DenseArray y = net.forward(x, cache);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += w[k] * y[k];
    if (backward) net.backward(cache, w);
    return s;
  };
  CHECK(fld::numerics::gradient_check(loss, params).max_rel_error < 1e-6);
  Mlp::Cache cache;
  CHECK(fld::numerics::max_abs_diff(net.forward(x), net.forward(x, cache)) == 0.0);
}

TEST_CASE("vae: beta zero is plain MSE and gradients check out") {
  VaeConfig cfg{2, 4, 3, 0.0};
  Vae vae(cfg, 3);
  std::mt19937_64 rng(5);
  const DenseArray x = random_array({5, 2, 4}, rng);
  std::mt19937_64 noise(9);
  const VaeLoss l = vae.loss(x, noise, false);
  CHECK(l.total == l.mse);
  CHECK(l.kl > 0.0);

  VaeConfig cfgb = cfg;
  cfgb.beta = 0.1;
  Vae vb(cfgb, 3);
  auto params = vb.parameters();
  auto loss = [&](bool backward) {
    fld::numerics::zero_grads(params);
    std::mt19937_64 r(9);
    return vb.loss(x, r, backward).total;
  };
  CHECK(fld::numerics::gradient_check(loss, params, 1e-6, 12).max_rel_error < 1e-5);

  const VaeOutput out = vb.forward(x);
  CHECK(out.reconstruction.shape() == Shape{5, 2, 4});
  for (double s : out.std.storage()) CHECK(s > 0.0);
}

TEST_CASE("feed-forward: zero weights, composition, identity fit") {
  FeedForwardConfig cfg{2, 4, 32};
  std::mt19937_64 rng(7);
  const DenseArray x = random_array({6, 2, 4}, rng);

  FeedForward zero(cfg, 1);
  for (auto* p : zero.parameters()) p->value.fill(0.0);
  const DenseArray zp = zero.predict(x, 1);
  for (double v : zp.storage()) CHECK(v == 0.0);

  FeedForward ff(cfg, 2);
  CHECK(fld::numerics::max_abs_diff(ff.predict(x, 0), x) == 0.0);
  const DenseArray three = ff.predict(ff.predict(ff.predict(x, 1), 1), 1);
  CHECK(fld::numerics::max_abs_diff(ff.predict(x, 3), three) == 0.0);

  auto params = ff.parameters();
  const DenseArray t = random_array({6, 2, 4}, rng);
  auto loss = [&](bool backward) {
    fld::numerics::zero_grads(params);
    return ff.loss(x, t, backward);
  };
  CHECK(fld::numerics::gradient_check(loss, params, 1e-6, 40).max_rel_error < 1e-5);

  FeedForward id(cfg, 3);
  auto ip = id.parameters();
  fld::numerics::Adam adam({.lr = 3e-3});
  for (int step = 0; step < 3000; ++step) {
    const DenseArray b = random_array({32, 2, 4}, rng);
    fld::numerics::zero_grads(ip);
    id.loss(b, b, true);
    adam.step(ip);
  }
  const DenseArray probe = random_array({64, 2, 4}, rng);
  CHECK(id.loss(probe, probe, false) < 1e-3);
}
