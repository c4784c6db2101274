#include "fld/numerics/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fld/common/error.hpp"

namespace fld::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

struct ConvDims {
  std::size_t batch, in, out, length, kernel;
  bool batched;
};

ConvDims conv_dims(const DenseArray& input, const DenseArray& weight) {
  if (weight.rank() != 3) throw ShapeError("conv1d: kernels must be out x in x k");
  ConvDims d{};
  d.batched = input.rank() == 3;
  if (input.rank() == 2) {
    d.batch = 1;
    d.in = input.dim(0);
    d.length = input.dim(1);
  } else if (input.rank() == 3) {
    d.batch = input.dim(0);
    d.in = input.dim(1);
    d.length = input.dim(2);
  } else {
    throw ShapeError("conv1d: input must be channels x length or batch x channels x length");
  }
  d.out = weight.dim(0);
  d.kernel = weight.dim(2);
  if (weight.dim(1) != d.in) {
    throw ShapeError("conv1d: input has " + std::to_string(d.in) + " channels, kernels expect " +
                     std::to_string(weight.dim(1)));
  }
  if (d.kernel % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
  return d;
}

// Rows are (channel, tap); column t holds x[channel, t + tap - pad].
void im2col(const double* x, const ConvDims& d, RowMat& cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(d.length);
  cols.setZero(static_cast<Eigen::Index>(d.in * d.kernel), static_cast<Eigen::Index>(d.length));
  for (std::size_t c = 0; c < d.in; ++c) {
    const double* src = x + c * d.length;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      double* dst = cols.data() + (c * d.kernel + k) * d.length;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
      for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] = src[t + shift];
    }
  }
}

void col2im_add(const RowMat& cols, const ConvDims& d, double* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(d.length);
  for (std::size_t c = 0; c < d.in; ++c) {
    double* dst = dx + c * d.length;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const double* src = cols.data() + (c * d.kernel + k) * d.length;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
      for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t + shift] += src[t];
    }
  }
}

struct NormDims {
  std::size_t batch, channels, length;
};

NormDims norm_dims(const DenseArray& x) {
  if (x.rank() == 2) return {x.dim(0), x.dim(1), 1};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw ShapeError("batchnorm1d: input must be batch x channels [x length]");
}

}  // namespace

DenseArray conv1d(const DenseArray& input, const DenseArray& weight, const DenseArray& bias) {
  const ConvDims d = conv_dims(input, weight);
  require_shape(bias, {d.out}, "conv1d bias");
  DenseArray out = d.batched ? DenseArray({d.batch, d.out, d.length}) : DenseArray({d.out, d.length});
  const MapRowC w(weight.ptr(), static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.in * d.kernel));
  RowMat cols;
  // One GEMM per batch item keeps every item's result independent of the
  // batch it was computed in.
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col(input.ptr() + b * d.in * d.length, d, cols);
    MapRow y(out.ptr() + b * d.out * d.length, static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.length));
    y.noalias() = w * cols;
    for (std::size_t o = 0; o < d.out; ++o) y.row(static_cast<Eigen::Index>(o)).array() += bias[o];
  }
  return out;
}

Conv1dGrads conv1d_backward(const DenseArray& input, const DenseArray& weight, const DenseArray& grad_output) {
  const ConvDims d = conv_dims(input, weight);
  const Shape out_shape = d.batched ? Shape{d.batch, d.out, d.length} : Shape{d.out, d.length};
  require_shape(grad_output, out_shape, "conv1d_backward grad_output");
  Conv1dGrads g{DenseArray(input.shape()), DenseArray(weight.shape()), DenseArray({d.out})};
  const MapRowC w(weight.ptr(), static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.in * d.kernel));
  MapRow dw(g.weight.ptr(), static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.in * d.kernel));
  RowMat cols;
  RowMat dcols;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const MapRowC dy(grad_output.ptr() + b * d.out * d.length, static_cast<Eigen::Index>(d.out),
                     static_cast<Eigen::Index>(d.length));
    im2col(input.ptr() + b * d.in * d.length, d, cols);
    dw.noalias() += dy * cols.transpose();
    dcols.noalias() = w.transpose() * dy;
    col2im_add(dcols, d, g.input.ptr() + b * d.in * d.length);
    for (std::size_t o = 0; o < d.out; ++o) {
      const double* row = grad_output.ptr() + (b * d.out + o) * d.length;
      double s = 0.0;
      for (std::size_t t = 0; t < d.length; ++t) s += row[t];
      g.bias[o] += s;
    }
  }
  return g;
}

DenseArray batchnorm1d(const DenseArray& input, const DenseArray& gamma, const DenseArray& beta,
                       BatchNormState& state, NormMode mode, BatchNormCache* cache, bool update_running) {
  const NormDims d = norm_dims(input);
  require_shape(gamma, {d.channels}, "batchnorm1d gamma");
  require_shape(beta, {d.channels}, "batchnorm1d beta");
  if (state.running_mean.size() != d.channels || state.running_var.size() != d.channels) {
    throw ShapeError("batchnorm1d: running statistics do not match channel count");
  }
  if (mode == NormMode::train && d.batch < 2) {
    throw NumericError("batchnorm1d: train mode needs a batch of at least 2 (variance undefined)");
  }
  DenseArray out(input.shape());
  DenseArray normalized(input.shape());
  std::vector<double> inv_std(d.channels);
  const double n = static_cast<double>(d.batch * d.length);

  for (std::size_t c = 0; c < d.channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == NormMode::train) {
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* x = input.ptr() + (b * d.channels + c) * d.length;
        for (std::size_t t = 0; t < d.length; ++t) mean += x[t];
      }
      mean /= n;
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* x = input.ptr() + (b * d.channels + c) * d.length;
        for (std::size_t t = 0; t < d.length; ++t) var += (x[t] - mean) * (x[t] - mean);
      }
      var /= n;
      if (update_running) {
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean;
        state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * var * n / (n - 1.0);
      }
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + state.eps);
    inv_std[c] = is;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        const double xh = (input[off + t] - mean) * is;
        normalized[off + t] = xh;
        out[off + t] = gamma[c] * xh + beta[c];
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batchnorm1d_backward(const BatchNormCache& cache, const DenseArray& gamma,
                                    const DenseArray& grad_output) {
  const NormDims d = norm_dims(grad_output);
  if (!grad_output.same_shape(cache.normalized)) throw ShapeError("batchnorm1d_backward: shape mismatch");
  BatchNormGrads g{DenseArray(grad_output.shape()), DenseArray({d.channels}), DenseArray({d.channels})};
  const double n = static_cast<double>(d.batch * d.length);
  for (std::size_t c = 0; c < d.channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        sum_dy += grad_output[off + t];
        sum_dy_xh += grad_output[off + t] * cache.normalized[off + t];
      }
    }
    g.gamma[c] = sum_dy_xh;
    g.beta[c] = sum_dy;
    const double scale = gamma[c] * cache.inv_std[c];
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t t = 0; t < d.length; ++t) {
        if (cache.mode == NormMode::train) {
          g.input[off + t] =
              scale * (grad_output[off + t] - sum_dy / n - cache.normalized[off + t] * sum_dy_xh / n);
        } else {
          g.input[off + t] = scale * grad_output[off + t];
        }
      }
    }
  }
  return g;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
double relu(double x) { return x > 0.0 ? x : 0.0; }
double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double softplus_grad(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

DenseArray activate(const DenseArray& x, Activation act) {
  DenseArray y(x.shape());
  switch (act) {
    case Activation::none:
      return x;
    case Activation::elu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = elu(x[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = relu(x[i]);
      break;
    case Activation::softplus:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = softplus(x[i]);
      break;
  }
  return y;
}

DenseArray activate_backward(const DenseArray& x, const DenseArray& grad_output, Activation act) {
  if (!x.same_shape(grad_output)) throw ShapeError("activate_backward: shape mismatch");
  DenseArray g(x.shape());
  switch (act) {
    case Activation::none:
      return grad_output;
    case Activation::elu:
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = grad_output[i] * elu_grad(x[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = grad_output[i] * relu_grad(x[i]);
      break;
    case Activation::softplus:
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = grad_output[i] * softplus_grad(x[i]);
      break;
  }
  return g;
}

DenseArray linear(const DenseArray& input, const DenseArray& weight, const DenseArray& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weights must be m x n");
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  require_shape(bias, {m}, "linear bias");
  const bool batched = input.rank() == 2;
  if (!(input.rank() == 1 || batched) || input.shape().back() != n) {
    throw ShapeError("linear: input " + shape_string(input.shape()) + " incompatible with weights " +
                     shape_string(weight.shape()));
  }
  const std::size_t batch = batched ? input.dim(0) : 1;
  DenseArray out = batched ? DenseArray({batch, m}) : DenseArray({m});
  const MapRowC x(input.ptr(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(n));
  const MapRowC w(weight.ptr(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  MapRow y(out.ptr(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(m));
  const Eigen::Map<const Eigen::RowVectorXd> bv(bias.ptr(), static_cast<Eigen::Index>(m));
  y.noalias() = x * w.transpose();
  y.rowwise() += bv;
  return out;
}

LinearGrads linear_backward(const DenseArray& input, const DenseArray& weight, const DenseArray& grad_output) {
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  const std::size_t batch = input.rank() == 2 ? input.dim(0) : 1;
  if (grad_output.size() != batch * m) throw ShapeError("linear_backward: grad_output shape mismatch");
  LinearGrads g{DenseArray(input.shape()), DenseArray(weight.shape()), DenseArray({m})};
  const MapRowC x(input.ptr(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(n));
  const MapRowC w(weight.ptr(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const MapRowC dy(grad_output.ptr(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(m));
  MapRow dx(g.input.ptr(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(n));
  MapRow dw(g.weight.ptr(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  dx.noalias() = dy * w;
  dw.noalias() = dy.transpose() * x;
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < m; ++o) g.bias[o] += grad_output.ptr()[r * m + o];
  return g;
}

void init_uniform_fan_in(DenseArray& a, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : a.storage()) v = dist(rng);
}

Conv1dLayer::Conv1dLayer(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                         std::mt19937_64& rng)
    : weight(name + ".weight", DenseArray({out, in, kernel})), bias(name + ".bias", DenseArray({out})) {
  init_uniform_fan_in(weight.value, in * kernel, rng);
  init_uniform_fan_in(bias.value, in * kernel, rng);
}

DenseArray Conv1dLayer::backward(const DenseArray& x, const DenseArray& grad_output) {
  Conv1dGrads g = conv1d_backward(x, weight.value, grad_output);
  weight.grad += g.weight;
  bias.grad += g.bias;
  return std::move(g.input);
}

BatchNormLayer::BatchNormLayer(const std::string& n, std::size_t channels)
    : gamma(n + ".gamma", DenseArray({channels}, 1.0)), beta(n + ".beta", DenseArray({channels}, 0.0)), name(n) {
  state.running_mean = DenseArray({channels}, 0.0);
  state.running_var = DenseArray({channels}, 1.0);
}

DenseArray BatchNormLayer::infer(const DenseArray& x, NormMode mode) const {
  BatchNormState scratch = state;
  return batchnorm1d(x, gamma.value, beta.value, scratch, mode, nullptr, false);
}

DenseArray BatchNormLayer::backward(const BatchNormCache& cache, const DenseArray& grad_output) {
  BatchNormGrads g = batchnorm1d_backward(cache, gamma.value, grad_output);
  gamma.grad += g.gamma;
  beta.grad += g.beta;
  return std::move(g.input);
}

LinearLayer::LinearLayer(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(name + ".weight", DenseArray({out, in})), bias(name + ".bias", DenseArray({out})) {
  init_uniform_fan_in(weight.value, in, rng);
  init_uniform_fan_in(bias.value, in, rng);
}

DenseArray LinearLayer::backward(const DenseArray& x, const DenseArray& grad_output) {
  LinearGrads g = linear_backward(x, weight.value, grad_output);
  weight.grad += g.weight;
  bias.grad += g.bias;
  return std::move(g.input);
}

}  // namespace fld::numerics
