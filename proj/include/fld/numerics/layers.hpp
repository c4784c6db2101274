#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fld/numerics/dense_array.hpp"

namespace fld::numerics {

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

struct Conv1dGrads {
  DenseArray input;
  DenseArray weight;
  DenseArray bias;
};

/// Same-padded, stride-1 cross-correlation.
///
/// `input` is either channels x length or batch x channels x length, `weight`
/// is out x in x k with k odd, `bias` has `out` entries. The output keeps the
/// input length; positions outside the signal read as zero.
DenseArray conv1d(const DenseArray& input, const DenseArray& weight, const DenseArray& bias);

Conv1dGrads conv1d_backward(const DenseArray& input, const DenseArray& weight, const DenseArray& grad_output);

// ---------------------------------------------------------------------------
// batchnorm1d
// ---------------------------------------------------------------------------

enum class NormMode { train, eval };

struct BatchNormState {
  DenseArray running_mean;
  DenseArray running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

struct BatchNormCache {
  NormMode mode = NormMode::eval;
  DenseArray normalized;           // x-hat, same shape as the input
  std::vector<double> inv_std;     // per channel
};

/// Per-channel normalization over batch (and length, for rank-3 input).
///
/// Input is batch x channels or batch x channels x length. In train mode the
/// batch statistics are used and, when `update_running` is set, folded into
/// the running estimates (unbiased variance, like the usual framework
/// convention). Eval mode uses the running estimates. Train mode with a batch
/// of one is rejected.
DenseArray batchnorm1d(const DenseArray& input, const DenseArray& gamma, const DenseArray& beta,
                       BatchNormState& state, NormMode mode, BatchNormCache* cache = nullptr,
                       bool update_running = true);

struct BatchNormGrads {
  DenseArray input;
  DenseArray gamma;
  DenseArray beta;
};

BatchNormGrads batchnorm1d_backward(const BatchNormCache& cache, const DenseArray& gamma,
                                    const DenseArray& grad_output);

// ---------------------------------------------------------------------------
// elementwise activations (alpha = 1 for elu)
// ---------------------------------------------------------------------------

double elu(double x);
double elu_grad(double x);
double relu(double x);
double relu_grad(double x);
double softplus(double x);
double softplus_grad(double x);

enum class Activation { none, elu, relu, softplus };

DenseArray activate(const DenseArray& x, Activation act);
/// Gradient w.r.t. the pre-activation `x` given the upstream gradient.
DenseArray activate_backward(const DenseArray& x, const DenseArray& grad_output, Activation act);

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

struct LinearGrads {
  DenseArray input;
  DenseArray weight;
  DenseArray bias;
};

/// y = W x + b for `input` of shape n or batch x n; `weight` is m x n.
DenseArray linear(const DenseArray& input, const DenseArray& weight, const DenseArray& bias);
LinearGrads linear_backward(const DenseArray& input, const DenseArray& weight, const DenseArray& grad_output);

// ---------------------------------------------------------------------------
// Layers that own their parameters
// ---------------------------------------------------------------------------

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for weights and biases.
void init_uniform_fan_in(DenseArray& a, std::size_t fan_in, std::mt19937_64& rng);

struct Conv1dLayer {
  Parameter weight;
  Parameter bias;

  Conv1dLayer() = default;
  Conv1dLayer(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, std::mt19937_64& rng);

  DenseArray forward(const DenseArray& x) const { return conv1d(x, weight.value, bias.value); }
  /// Accumulates parameter gradients and returns the input gradient.
  DenseArray backward(const DenseArray& x, const DenseArray& grad_output);
};

struct BatchNormLayer {
  Parameter gamma;
  Parameter beta;
  BatchNormState state;
  std::string name;

  BatchNormLayer() = default;
  BatchNormLayer(const std::string& name, std::size_t channels);

  DenseArray forward(const DenseArray& x, NormMode mode, BatchNormCache* cache, bool update_running = true) {
    return batchnorm1d(x, gamma.value, beta.value, state, mode, cache, update_running);
  }
  /// Forward without touching the running statistics.
  DenseArray infer(const DenseArray& x, NormMode mode) const;
  DenseArray backward(const BatchNormCache& cache, const DenseArray& grad_output);
};

struct LinearLayer {
  Parameter weight;
  Parameter bias;

  LinearLayer() = default;
  LinearLayer(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }
  DenseArray forward(const DenseArray& x) const { return linear(x, weight.value, bias.value); }
  DenseArray backward(const DenseArray& x, const DenseArray& grad_output);
};

}  // namespace fld::numerics
