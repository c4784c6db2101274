#include "fld/numerics/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "fld/common/error.hpp"

namespace fld::numerics {

RealDft::RealDft(std::size_t length) : length_(length) {
  if (length < 2) throw ConfigError("RealDft: length must be at least 2");
  const std::size_t k = bins();
  cos_.resize(k * length);
  sin_.resize(k * length);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t t = 0; t < length; ++t) {
      // Reduce j*t mod H first so the angle stays in [0, 2 pi).
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((j * t) % length) / static_cast<double>(length);
      cos_[j * length + t] = std::cos(angle);
      sin_[j * length + t] = std::sin(angle);
    }
  }
}

void RealDft::forward(std::span<const double> signal, std::span<double> re, std::span<double> im) const {
  if (signal.size() != length_) throw ShapeError("RealDft::forward: signal length mismatch");
  const std::size_t k = bins();
  for (std::size_t j = 0; j < k; ++j) {
    const double* c = cos_.data() + j * length_;
    const double* s = sin_.data() + j * length_;
    double r = 0.0;
    double i = 0.0;
    for (std::size_t t = 0; t < length_; ++t) {
      r += signal[t] * c[t];
      i -= signal[t] * s[t];
    }
    re[j] = r;
    im[j] = i;
  }
  // Exact zeros where the transform of real input is real.
  im[0] = 0.0;
  if (length_ % 2 == 0) im[k - 1] = 0.0;
}

ComplexSpectrum RealDft::forward(std::span<const double> signal) const {
  ComplexSpectrum out{std::vector<double>(bins()), std::vector<double>(bins())};
  forward(signal, out.real, out.imag);
  return out;
}

void RealDft::adjoint_add(std::span<const double> re, std::span<const double> im, std::span<double> out) const {
  const std::size_t k = bins();
  if (re.size() != k || im.size() != k || out.size() != length_) throw ShapeError("RealDft::adjoint: size mismatch");
  for (std::size_t j = 0; j < k; ++j) {
    const double* c = cos_.data() + j * length_;
    const double* s = sin_.data() + j * length_;
    // The imaginary parts of bin 0 (and bin H/2 for even H) are pinned to
    // zero in forward, so they carry no gradient.
    const bool real_bin = j == 0 || (length_ % 2 == 0 && j == k - 1);
    const double gr = re[j];
    const double gi = real_bin ? 0.0 : im[j];
    for (std::size_t t = 0; t < length_; ++t) out[t] += gr * c[t] - gi * s[t];
  }
}

std::vector<double> RealDft::adjoint(std::span<const double> re, std::span<const double> im) const {
  std::vector<double> out(length_, 0.0);
  adjoint_add(re, im, out);
  return out;
}

ComplexSpectrum naive_dft(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n < 2) throw ConfigError("naive_dft: length must be at least 2");
  ComplexSpectrum out{std::vector<double>(n / 2 + 1), std::vector<double>(n / 2 + 1)};
  for (std::size_t j = 0; j <= n / 2; ++j) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      acc += signal[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) * static_cast<double>(t) /
                                              static_cast<double>(n));
    }
    out.real[j] = acc.real();
    out.imag[j] = acc.imag();
  }
  return out;
}

double wrap_phase(double cycles) { return cycles - std::floor(cycles + 0.5); }

double atan2_phase(double sy, double sx) {
  if (sy == 0.0 && sx == 0.0) throw NumericError("atan2_phase: phase undefined at the origin");
  const double p = std::atan2(sy, sx) / (2.0 * std::numbers::pi);
  return p >= 0.5 ? p - 1.0 : p;
}

PhaseGrad atan2_phase_grad(double sy, double sx) {
  const double r2 = sx * sx + sy * sy;
  if (r2 == 0.0) throw NumericError("atan2_phase_grad: undefined at the origin");
  const double k = 1.0 / (2.0 * std::numbers::pi * r2);
  return {sx * k, -sy * k};
}

}  // namespace fld::numerics
