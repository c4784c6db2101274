#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fld/numerics/dense_array.hpp"

namespace fld::numerics {

/// One-sided spectrum of a real signal: bins 0..floor(H/2).
struct ComplexSpectrum {
  std::vector<double> real;
  std::vector<double> imag;

  std::size_t bins() const { return real.size(); }
};

/// Real discrete Fourier transform of a fixed length H, with its adjoint.
///
/// c_j = sum_t x_t exp(-i 2 pi j t / H), j = 0..floor(H/2). Twiddles are
/// tabulated once; the transform is the direct O(H^2) sum, which is exact
/// enough to serve as its own oracle at the window sizes used here.
class RealDft {
 public:
  explicit RealDft(std::size_t length);

  std::size_t length() const noexcept { return length_; }
  std::size_t bins() const noexcept { return length_ / 2 + 1; }

  ComplexSpectrum forward(std::span<const double> signal) const;
  void forward(std::span<const double> signal, std::span<double> re, std::span<double> im) const;

  /// Transpose of `forward` viewed as a real linear map R^H -> R^{2(K+1)}:
  /// x_t = sum_j (re_j cos(2 pi j t/H) - im_j sin(2 pi j t/H)).
  std::vector<double> adjoint(std::span<const double> re, std::span<const double> im) const;
  void adjoint_add(std::span<const double> re, std::span<const double> im, std::span<double> out) const;

 private:
  std::size_t length_;
  std::vector<double> cos_;  // bins x length
  std::vector<double> sin_;
};

/// Direct evaluation with std::complex, used as an independent reference.
ComplexSpectrum naive_dft(std::span<const double> signal);

/// Wraps a phase in cycles to [-0.5, 0.5).
double wrap_phase(double cycles);

/// atan2(sy, sx) expressed in cycles, in [-0.5, 0.5). Throws NumericError at the origin.
double atan2_phase(double sy, double sx);

struct PhaseGrad {
  double d_sy;
  double d_sx;
};

/// Partial derivatives of atan2_phase.
PhaseGrad atan2_phase_grad(double sy, double sx);

}  // namespace fld::numerics
