#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fld/numerics/dense_array.hpp"
#include "fld/numerics/spectral.hpp"

namespace fld::model {

using numerics::DenseArray;
using numerics::RealDft;

/// Per-channel phase in cycles, wrapped to [-0.5, 0.5).
struct LatentState {
  std::vector<double> phi;

  std::size_t channels() const { return phi.size(); }
};

/// theta = (f, a, b): frequency in Hz, amplitude, offset; one entry per channel.
struct LatentParameterization {
  std::vector<double> f;
  std::vector<double> a;
  std::vector<double> b;

  std::size_t channels() const { return f.size(); }
  /// f, a, b concatenated (3c values).
  std::vector<double> flatten() const;
  static LatentParameterization unflatten(std::span<const double> v);
};

/// Sample times of a window, oldest first: (-(H-1) dt, ..., -dt, 0). The
/// newest frame sits at T = 0, so phi is the phase of the newest frame.
std::vector<double> time_grid(std::size_t window, double dt);

struct CurveParams {
  double f = 0.0;
  double a = 0.0;
  double b = 0.0;
  bool zero_power = false;
};

/// f, a, b of one latent curve from its one-sided spectrum c_j:
///   p_j = |c_j|^2 (j >= 1), f = sum_j nu_j p_j / sum_j p_j with nu_j = j / (H dt),
///   a = (2/H) sqrt(sum_j p_j), b = Re(c_0) / H.
/// f is clamped to [0, 1/(2 dt)]. Total power below 1e-12 gives f = a = 0.
CurveParams parameterize_curve(const RealDft& dft, std::span<const double> z, double dt);

/// Adds dL/dz to `dz` given the upstream gradients of f, a and b.
void parameterize_curve_backward(const RealDft& dft, std::span<const double> z, double dt, double df, double da,
                                 double db, std::span<double> dz);

/// a sin(2 pi (f T + phi)) + b on the grid `T`.
void reconstruct_curve(double phi, double f, double a, double b, std::span<const double> T, std::span<double> out);

struct CurveGrad {
  double phi = 0.0;
  double f = 0.0;
  double a = 0.0;
  double b = 0.0;
};

CurveGrad reconstruct_curve_backward(double phi, double f, double a, std::span<const double> T,
                                     std::span<const double> grad_output);

/// c x H latent curves for a state and parameterization.
DenseArray reconstruct_latent(const LatentState& state, const LatentParameterization& theta, std::span<const double> T);

/// Phase of the newest frame read off the DFT of a curve at its dominant
/// bin. It is exact for bin-aligned sinusoids and serves as an oracle for
/// the learned phase head.
double analytic_phase(const RealDft& dft, std::span<const double> z);

/// phi advanced by `steps` frames of length dt and wrapped.
LatentState advance(const LatentState& state, const LatentParameterization& theta, double steps, double dt);

}  // namespace fld::model
