#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fld/common/error.hpp"
#include "fld/numerics/layers.hpp"
#include "fld/numerics/optim.hpp"
#include "fld/numerics/spectral.hpp"

using namespace fld::numerics;

namespace {

DenseArray random_array(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  DenseArray a(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : a.storage()) v = n(rng);
  return a;
}

// O(n k) sliding dot product, written independently of the im2col path.
DenseArray naive_conv(const DenseArray& x, const DenseArray& w, const DenseArray& b) {
  const std::size_t in = x.dim(0), len = x.dim(1), out = w.dim(0), k = w.dim(2);
  const long pad = static_cast<long>(k / 2);
  DenseArray y({out, len});
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(t) + static_cast<long>(j) - pad;
          if (src >= 0 && src < static_cast<long>(len)) s += w.at(o, i, j) * x.at(i, static_cast<std::size_t>(src));
        }
      }
      y.at(o, t) = s;
    }
  }
  return y;
}

double dot(const DenseArray& a, const DenseArray& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("conv1d: delta kernel is the identity") {
  std::mt19937_64 rng(1);
  const DenseArray x = random_array({3, 20}, rng);
  DenseArray w({3, 3, 5});
  for (std::size_t c = 0; c < 3; ++c) w.at(c, c, 2) = 1.0;
  const DenseArray y = conv1d(x, w, DenseArray({3}));
  CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv1d: zero input gives the bias") {
  DenseArray w({2, 1, 3}, 0.7);
  DenseArray b({2}, std::vector<double>{0.25, -1.5});
  const DenseArray y = conv1d(DenseArray({1, 6}), w, b);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(y.at(0, t) == 0.25);
    CHECK(y.at(1, t) == -1.5);
  }
}

TEST_CASE("conv1d: matches sliding-window oracle") {
  std::mt19937_64 rng(7);
  const DenseArray x = random_array({2, 8}, rng);
  const DenseArray w = random_array({3, 2, 3}, rng);
  const DenseArray b = random_array({3}, rng);
  CHECK(max_abs_diff(conv1d(x, w, b), naive_conv(x, w, b)) < 1e-12);

  // Batched input agrees item by item; a wide kernel exercises the padding.
  const DenseArray xb = random_array({4, 2, 11}, rng);
  const DenseArray wb = random_array({5, 2, 9}, rng);
  const DenseArray bb = random_array({5}, rng);
  const DenseArray yb = conv1d(xb, wb, bb);
  for (std::size_t i = 0; i < 4; ++i) {
    DenseArray xi({2, 11}, std::vector<double>(xb.row(i).begin(), xb.row(i).end()));
    DenseArray yi({5, 11}, std::vector<double>(yb.row(i).begin(), yb.row(i).end()));
    CHECK(max_abs_diff(yi, naive_conv(xi, wb, bb)) < 1e-12);
  }
}

TEST_CASE("conv1d: shape errors") {
  CHECK_THROWS_AS(conv1d(DenseArray({2, 8}), DenseArray({1, 2, 4}), DenseArray({1})), fld::ShapeError);
  CHECK_THROWS_AS(conv1d(DenseArray({3, 8}), DenseArray({1, 2, 3}), DenseArray({1})), fld::ShapeError);
  CHECK_THROWS_AS(conv1d(DenseArray({2, 8}), DenseArray({1, 2, 3}), DenseArray({2})), fld::ShapeError);
}

TEST_CASE("conv1d: backward matches finite differences") {
  std::mt19937_64 rng(3);
  Parameter x("x", random_array({2, 3, 9}, rng));
  Parameter w("w", random_array({4, 3, 5}, rng));
  Parameter b("b", random_array({4}, rng));
  const DenseArray probe = random_array({2, 4, 9}, rng);
  Parameter* params[] = {&x, &w, &b};
  auto loss = [&](bool backward) {
    const DenseArray y = conv1d(x.value, w.value, b.value);
    if (backward) {
      Conv1dGrads g = conv1d_backward(x.value, w.value, probe);
      x.grad = g.input;
      w.grad = g.weight;
      b.grad = g.bias;
    }
    return dot(y, probe);
  };
  CHECK(gradient_check(loss, params).max_rel_error < 1e-5);
}

TEST_CASE("batchnorm1d: train mode standardizes each channel") {
  std::mt19937_64 rng(5);
  DenseArray x = random_array({6, 2, 10}, rng, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 4.0;
  BatchNormLayer bn("bn", 2);
  const DenseArray y = bn.forward(x, NormMode::train, nullptr);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t b = 0; b < 6; ++b)
      for (std::size_t t = 0; t < 10; ++t) mean += y.at(b, c, t);
    mean /= 60.0;
    for (std::size_t b = 0; b < 6; ++b)
      for (std::size_t t = 0; t < 10; ++t) var += (y.at(b, c, t) - mean) * (y.at(b, c, t) - mean);
    var /= 60.0;
    CHECK(std::abs(mean) < 1e-10);
    // eps = 1e-5 shrinks the variance by var/(var+eps) ~ 1 - 1e-6.
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
  // Running stats moved toward the batch statistics with momentum 0.1.
  CHECK(bn.state.running_mean[0] > 0.3);
}

TEST_CASE("batchnorm1d: gamma zero outputs beta") {
  std::mt19937_64 rng(6);
  BatchNormLayer bn("bn", 3);
  bn.gamma.value.fill(0.0);
  bn.beta.value = DenseArray({3}, std::vector<double>{1.0, -2.0, 0.5});
  const DenseArray y = bn.forward(random_array({4, 3, 5}, rng), NormMode::train, nullptr);
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t t = 0; t < 5; ++t) CHECK(y.at(b, c, t) == bn.beta.value[c]);
}

TEST_CASE("batchnorm1d: batch of one is rejected in train mode") {
  BatchNormLayer bn("bn", 2);
  CHECK_THROWS_AS(bn.forward(DenseArray({1, 2, 8}), NormMode::train, nullptr), fld::NumericError);
  CHECK_NOTHROW(bn.forward(DenseArray({1, 2, 8}), NormMode::eval, nullptr));
}

TEST_CASE("batchnorm1d: backward matches finite differences") {
  std::mt19937_64 rng(11);
  for (NormMode mode : {NormMode::train, NormMode::eval}) {
    BatchNormLayer bn("bn", 2);
    bn.state.running_mean = DenseArray({2}, std::vector<double>{0.3, -0.2});
    bn.state.running_var = DenseArray({2}, std::vector<double>{1.7, 0.6});
    Parameter x("x", random_array({4, 2, 8}, rng));
    bn.gamma.value = random_array({2}, rng);
    bn.beta.value = random_array({2}, rng);
    const DenseArray probe = random_array({4, 2, 8}, rng);
    Parameter* params[] = {&x, &bn.gamma, &bn.beta};
    auto loss = [&](bool backward) {
      BatchNormCache cache;
      const DenseArray y = bn.forward(x.value, mode, &cache, false);
      if (backward) {
        zero_grads(params);
        x.grad = bn.backward(cache, probe);
      }
      return dot(y, probe);
    };
    const GradCheckReport r = gradient_check(loss, params);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("activations: values and derivatives") {
  CHECK(std::abs(elu(-50.0) + 1.0) < 1e-9);
  CHECK(elu(0.0) == 0.0);
  CHECK(relu(-2.0) == 0.0);
  CHECK(relu(3.0) == 3.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(40.0) == doctest::Approx(40.0));
  // ELU slope is continuous through zero.
  CHECK(elu_grad(1e-12) == doctest::Approx(elu_grad(-1e-12)));

  std::mt19937_64 rng(2);
  for (Activation act : {Activation::elu, Activation::relu, Activation::softplus}) {
    Parameter x("x", random_array({30}, rng, 2.0));
    const DenseArray probe = random_array({30}, rng);
    Parameter* params[] = {&x};
    auto loss = [&](bool backward) {
      if (backward) x.grad = activate_backward(x.value, probe, act);
      return dot(activate(x.value, act), probe);
    };
    CHECK(gradient_check(loss, params).max_rel_error < 1e-5);
  }
}

TEST_CASE("linear: identity, zero weights and matmul oracle") {
  std::mt19937_64 rng(9);
  const DenseArray x = random_array({3}, rng);
  DenseArray eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  CHECK(max_abs_diff(linear(x, eye, DenseArray({3})), x) == 0.0);
  const DenseArray b = random_array({2}, rng);
  CHECK(max_abs_diff(linear(x, DenseArray({2, 3}), b), b) == 0.0);

  const DenseArray w = random_array({3, 2}, rng);
  const DenseArray b3 = random_array({3}, rng);
  const DenseArray x2 = random_array({2}, rng);
  const DenseArray y = linear(x2, w, b3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(y[i] - (w.at(i, 0) * x2[0] + w.at(i, 1) * x2[1] + b3[i])) < 1e-14);
  }
  CHECK_THROWS_AS(linear(DenseArray({4}), w, b3), fld::ShapeError);
}

TEST_CASE("linear: backward matches finite differences") {
  std::mt19937_64 rng(4);
  Parameter x("x", random_array({5, 4}, rng));
  Parameter w("w", random_array({3, 4}, rng));
  Parameter b("b", random_array({3}, rng));
  const DenseArray probe = random_array({5, 3}, rng);
  Parameter* params[] = {&x, &w, &b};
  auto loss = [&](bool backward) {
    if (backward) {
      LinearGrads g = linear_backward(x.value, w.value, probe);
      x.grad = g.input;
      w.grad = g.weight;
      b.grad = g.bias;
    }
    return dot(linear(x.value, w.value, b.value), probe);
  };
  CHECK(gradient_check(loss, params).max_rel_error < 1e-5);
}

TEST_CASE("rfft: constant and bin-aligned signals") {
  const RealDft dft(8);
  const std::vector<double> c(8, 1.25);
  const ComplexSpectrum s = dft.forward(c);
  CHECK(std::abs(s.real[0] - 10.0) < 1e-12);
  for (std::size_t j = 1; j < s.bins(); ++j) CHECK(std::hypot(s.real[j], s.imag[j]) < 1e-12);

  std::vector<double> sine(8);
  for (std::size_t t = 0; t < 8; ++t) sine[t] = std::sin(2.0 * std::numbers::pi * 2.0 * t / 8.0);
  const ComplexSpectrum p = dft.forward(sine);
  CHECK(std::abs(std::hypot(p.real[2], p.imag[2]) - 4.0) < 1e-12);
  for (std::size_t j = 0; j < p.bins(); ++j)
    if (j != 2) CHECK(std::hypot(p.real[j], p.imag[j]) < 1e-12);
}

TEST_CASE("rfft: matches naive DFT oracle and is adjoint-consistent") {
  std::mt19937_64 rng(51);
  for (std::size_t h : {2u, 7u, 16u, 51u}) {
    const DenseArray x = random_array({h}, rng);
    const RealDft dft(h);
    const ComplexSpectrum fast = dft.forward(x.data());
    const ComplexSpectrum ref = naive_dft(x.data());
    for (std::size_t j = 0; j < fast.bins(); ++j) {
      CHECK(std::abs(fast.real[j] - ref.real[j]) < 1e-10);
      CHECK(std::abs(fast.imag[j] - ref.imag[j]) < 1e-10);
    }
    // <F x, y> == <x, F^T y> for random x, y.
    const DenseArray yr = random_array({dft.bins()}, rng);
    const DenseArray yi = random_array({dft.bins()}, rng);
    double lhs = 0.0;
    for (std::size_t j = 0; j < dft.bins(); ++j) lhs += fast.real[j] * yr[j] + fast.imag[j] * yi[j];
    const std::vector<double> back = dft.adjoint(yr.data(), yi.data());
    double rhs = 0.0;
    for (std::size_t t = 0; t < h; ++t) rhs += x[t] * back[t];
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
  CHECK_THROWS_AS(RealDft(1), fld::ConfigError);
}

TEST_CASE("atan2_phase: values, range and gradient") {
  CHECK(atan2_phase(0.0, 1.0) == 0.0);
  CHECK(atan2_phase(1.0, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(atan2_phase(-1.0, -1.0) == doctest::Approx(-0.375).epsilon(1e-15));
  CHECK(atan2_phase(0.0, -1.0) == -0.5);
  CHECK_THROWS_AS(atan2_phase(0.0, 0.0), fld::NumericError);

  const double sy = 0.3, sx = -0.8, h = 1e-6;
  const PhaseGrad g = atan2_phase_grad(sy, sx);
  CHECK(g.d_sy == doctest::Approx((atan2_phase(sy + h, sx) - atan2_phase(sy - h, sx)) / (2 * h)).epsilon(1e-7));
  CHECK(g.d_sx == doctest::Approx((atan2_phase(sy, sx + h) - atan2_phase(sy, sx - h)) / (2 * h)).epsilon(1e-7));
  CHECK(wrap_phase(0.5) == -0.5);
  CHECK(wrap_phase(1.25) == 0.25);
  CHECK(wrap_phase(-0.75) == 0.25);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter p("p", DenseArray({3}, std::vector<double>{1.0, -2.0, 3.0}));
  Adam adam({.lr = 0.1});
  Parameter* params[] = {&p};
  for (int i = 0; i < 5; ++i) adam.step(params);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(p.value[2] == 3.0);
  CHECK_THROWS_AS(Adam({.lr = 0.0}), fld::ConfigError);
}

TEST_CASE("adam: matches the reference recurrence") {
  // Hand-rolled recurrence, independent of the class.
  auto reference = [](double x, const std::vector<double>& grads, double lr) {
    double m = 0.0, v = 0.0;
    for (std::size_t t = 1; t <= grads.size(); ++t) {
      const double g = grads[t - 1];
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      x -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    return x;
  };
  Parameter p("p", DenseArray({1}, 2.0));
  Adam adam({.lr = 0.1});
  Parameter* params[] = {&p};
  p.grad[0] = 1.0;
  adam.step(params);
  CHECK(std::abs(p.value[0] - (2.0 - 0.1)) < 1e-8);
  CHECK(std::abs(p.value[0] - reference(2.0, {1.0}, 0.1)) < 1e-12);

  Parameter q("q", DenseArray({1}, 0.5));
  Adam adam2({.lr = 0.01});
  Parameter* qs[] = {&q};
  q.grad[0] = 3.0;
  adam2.step(qs);
  q.grad[0] = -2.0;
  adam2.step(qs);
  CHECK(std::abs(q.value[0] - reference(0.5, {3.0, -2.0}, 0.01)) < 1e-12);
}

TEST_CASE("adam: weight decay is an L2 term on the gradient") {
  Parameter p("p", DenseArray({1}, 4.0));
  Adam adam({.lr = 0.01, .weight_decay = 0.5});
  Parameter* params[] = {&p};
  adam.step(params);
  // Effective gradient 0.5 * 4 = 2 > 0, so the step is a full lr downhill.
  CHECK(std::abs(p.value[0] - (4.0 - 0.01)) < 1e-8);
}

TEST_CASE("gradient_check: quadratic and corrupted backward") {
  Parameter x("x", DenseArray({1}, 3.0));
  Parameter* params[] = {&x};
  auto quad = [&](bool backward) {
    if (backward) x.grad[0] = 2.0 * x.value[0];
    return x.value[0] * x.value[0];
  };
  CHECK(gradient_check(quad, params).max_rel_error < 1e-9);

  auto corrupted = [&](bool backward) {
    if (backward) x.grad[0] = 2.0 * 2.0 * x.value[0];
    return x.value[0] * x.value[0];
  };
  // Doubled slope: |2g - g| / max(2g, g) = 0.5. A 1.5x slope gives 1/3.
  CHECK(gradient_check(corrupted, params).max_rel_error == doctest::Approx(0.5).epsilon(1e-8));
  auto scaled = [&](bool backward) {
    if (backward) x.grad[0] = 1.5 * 2.0 * x.value[0];
    return x.value[0] * x.value[0];
  };
  CHECK(gradient_check(scaled, params).max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}
