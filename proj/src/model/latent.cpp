#include "fld/model/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fld/common/error.hpp"

namespace fld::model {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinPower = 1e-12;
}  // namespace

std::vector<double> LatentParameterization::flatten() const {
  std::vector<double> v;
  v.reserve(3 * f.size());
  v.insert(v.end(), f.begin(), f.end());
  v.insert(v.end(), a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

LatentParameterization LatentParameterization::unflatten(std::span<const double> v) {
  if (v.size() % 3 != 0) throw ShapeError("LatentParameterization: flattened size must be a multiple of 3");
  const std::size_t c = v.size() / 3;
  return {{v.begin(), v.begin() + c}, {v.begin() + c, v.begin() + 2 * c}, {v.begin() + 2 * c, v.end()}};
}

std::vector<double> time_grid(std::size_t window, double dt) {
  std::vector<double> T(window);
  for (std::size_t t = 0; t < window; ++t) T[t] = -static_cast<double>(window - 1 - t) * dt;
  return T;
}

CurveParams parameterize_curve(const RealDft& dft, std::span<const double> z, double dt) {
  const std::size_t H = dft.length();
  const std::size_t K = dft.bins();
  std::vector<double> re(K), im(K);
  dft.forward(z, re, im);
  CurveParams p;
  p.b = re[0] / static_cast<double>(H);
  double power = 0.0, weighted = 0.0;
  for (std::size_t j = 1; j < K; ++j) {
    const double pj = re[j] * re[j] + im[j] * im[j];
    power += pj;
    weighted += static_cast<double>(j) / (static_cast<double>(H) * dt) * pj;
  }
  if (power < kMinPower) {
    p.zero_power = true;
    return p;
  }
  p.f = std::clamp(weighted / power, 0.0, 0.5 / dt);
  p.a = 2.0 / static_cast<double>(H) * std::sqrt(power);
  return p;
}

void parameterize_curve_backward(const RealDft& dft, std::span<const double> z, double dt, double df, double da,
                                 double db, std::span<double> dz) {
  const std::size_t H = dft.length();
  const std::size_t K = dft.bins();
  std::vector<double> re(K), im(K);
  dft.forward(z, re, im);
  std::vector<double> dre(K, 0.0), dim(K, 0.0);
  dre[0] = db / static_cast<double>(H);
  double power = 0.0, weighted = 0.0;
  for (std::size_t j = 1; j < K; ++j) {
    const double pj = re[j] * re[j] + im[j] * im[j];
    power += pj;
    weighted += static_cast<double>(j) / (static_cast<double>(H) * dt) * pj;
  }
  if (power >= kMinPower) {
    const double f_raw = weighted / power;
    const bool clamped = f_raw < 0.0 || f_raw > 0.5 / dt;
    const double da_dp = 1.0 / (static_cast<double>(H) * std::sqrt(power));
    for (std::size_t j = 1; j < K; ++j) {
      const double nu = static_cast<double>(j) / (static_cast<double>(H) * dt);
      const double dp = da * da_dp + (clamped ? 0.0 : df * (nu - f_raw) / power);
      dre[j] = 2.0 * re[j] * dp;
      dim[j] = 2.0 * im[j] * dp;
    }
  }
  dft.adjoint_add(dre, dim, dz);
}

void reconstruct_curve(double phi, double f, double a, double b, std::span<const double> T, std::span<double> out) {
  for (std::size_t t = 0; t < T.size(); ++t) out[t] = a * std::sin(kTwoPi * (f * T[t] + phi)) + b;
}

CurveGrad reconstruct_curve_backward(double phi, double f, double a, std::span<const double> T,
                                     std::span<const double> grad_output) {
  CurveGrad g;
  for (std::size_t t = 0; t < T.size(); ++t) {
    const double arg = kTwoPi * (f * T[t] + phi);
    const double gy = grad_output[t];
    const double c = gy * a * kTwoPi * std::cos(arg);
    g.a += gy * std::sin(arg);
    g.b += gy;
    g.phi += c;
    g.f += c * T[t];
  }
  return g;
}

DenseArray reconstruct_latent(const LatentState& state, const LatentParameterization& theta, std::span<const double> T) {
  const std::size_t c = state.channels();
  if (theta.f.size() != c || theta.a.size() != c || theta.b.size() != c) {
    throw ShapeError("reconstruct_latent: phase and parameterization disagree on channel count");
  }
  DenseArray z({c, T.size()});
  for (std::size_t ch = 0; ch < c; ++ch) reconstruct_curve(state.phi[ch], theta.f[ch], theta.a[ch], theta.b[ch], T, z.row(ch));
  return z;
}

double analytic_phase(const RealDft& dft, std::span<const double> z) {
  const std::size_t H = dft.length();
  const std::size_t K = dft.bins();
  std::vector<double> re(K), im(K);
  dft.forward(z, re, im);
  std::size_t k = 1;
  double best = -1.0;
  for (std::size_t j = 1; j < K; ++j) {
    const double pj = re[j] * re[j] + im[j] * im[j];
    if (pj > best) {
      best = pj;
      k = j;
    }
  }
  if (best < kMinPower) throw NumericError("analytic_phase: curve has no oscillating component");
  // a sin(2 pi k t / H + theta) has c_k = (a H / 2)(sin theta - i cos theta).
  const double theta = std::atan2(re[k], -im[k]) / kTwoPi;
  return numerics::wrap_phase(theta + static_cast<double>(k * (H - 1)) / static_cast<double>(H));
}

LatentState advance(const LatentState& state, const LatentParameterization& theta, double steps, double dt) {
  LatentState out = state;
  for (std::size_t ch = 0; ch < out.phi.size(); ++ch) {
    out.phi[ch] = numerics::wrap_phase(state.phi[ch] + steps * theta.f[ch] * dt);
  }
  return out;
}

}  // namespace fld::model
