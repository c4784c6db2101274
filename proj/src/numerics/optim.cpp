#include "fld/numerics/optim.hpp"

#include <algorithm>
#include <cmath>

#include "fld/common/error.hpp"

namespace fld::numerics {

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("Adam: learning rate must be positive");
  if (options_.weight_decay < 0.0) throw ConfigError("Adam: weight decay must be non-negative");
}

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ConfigError("Adam::step: parameter list changed between steps");
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.value.same_shape(m_[k])) throw ShapeError("Adam::step: parameter '" + p.name + "' changed shape");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + options_.weight_decay * p.value[i];
      m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g;
      v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g * g;
      const double mhat = m_[k][i] / c1;
      const double vhat = v_[k][i] / c2;
      p.value[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

GradCheckReport gradient_check(const LossFn& loss, std::span<Parameter* const> params, double h,
                               std::size_t max_entries_per_param, int stencil) {
  if (stencil != 2 && stencil != 4) throw ConfigError("gradient_check: stencil must be 2 or 4");
  loss(true);
  std::vector<DenseArray> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const std::size_t n = p.value.size();
    const std::size_t stride =
        (max_entries_per_param == 0 || n <= max_entries_per_param) ? 1 : (n + max_entries_per_param - 1) / max_entries_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.value[i];
      auto at = [&](double offset) {
        p.value[i] = saved + offset;
        return loss(false);
      };
      double numeric = 0.0;
      if (stencil == 2) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      }
      p.value[i] = saved;
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.entries_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace fld::numerics
