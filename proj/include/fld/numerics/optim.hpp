#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fld/numerics/dense_array.hpp"

namespace fld::numerics {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with bias correction. Weight decay is added to the gradient as an L2
/// term before the moment updates. Moment buffers are owned here and keyed
/// by the position of each parameter in the list passed to `step`, so the
/// same list (same order) must be used on every call.
class Adam {
 public:
  explicit Adam(AdamOptions options);

  void step(std::span<Parameter* const> params);

  const AdamOptions& options() const noexcept { return options_; }
  long steps_taken() const noexcept { return t_; }

  /// Moment buffers, exposed for checkpointing.
  std::vector<DenseArray>& first_moments() { return m_; }
  std::vector<DenseArray>& second_moments() { return v_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<DenseArray> m_;
  std::vector<DenseArray> v_;
};

void zero_grads(std::span<Parameter* const> params);

/// Loss callback for gradient checking. With `backward` set it must zero and
/// then populate the gradients of the checked parameters.
using LossFn = std::function<double(bool backward)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Central differences against the analytic gradient, entry by entry.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// `max_entries_per_param` > 0 checks an evenly strided subset.
/// `stencil` is 2 (central difference) or 4 (five-point, O(h^4)); the wider
/// stencil tolerates a larger h and so suffers far less cancellation on
/// entries whose gradient is small next to the loss.
GradCheckReport gradient_check(const LossFn& loss, std::span<Parameter* const> params, double h = 1e-6,
                               std::size_t max_entries_per_param = 0, int stencil = 2);

}  // namespace fld::numerics
