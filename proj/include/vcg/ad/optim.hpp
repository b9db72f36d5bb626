#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vcg/ad/tape.hpp"
#include "vcg/ad/tensor.hpp"

namespace vcg::ad {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moments are sized on first bind and checked on every step.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<Tensor<float>* const> params, AdamHyper hyper);

  bool initialized() const { return initialized_; }
  std::int64_t step_count() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_lr(double lr) { hyper_.lr = lr; }

  /// One update from the params' current gradients. Gradients are left as-is.
  void step(std::span<Tensor<float>* const> params);

 private:
  AdamHyper hyper_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t t_ = 0;
  bool initialized_ = false;
};

void adam_step(std::span<Tensor<float>* const> params, AdamState& state);

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

using ScalarFn = std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>;

/// Central-difference check of the gradient of a scalar function w.r.t. `x`.
/// `f` records its graph on the tape it is handed; the checker runs backward.
/// Passes iff max |a - n| / max(|a|, |n|, 1e-6) <= tol. With `max_entries` > 0
/// only an evenly strided subset of x is perturbed.
GradCheckReport grad_check(const ScalarFn& f, Tensor<double>& x, double h = 1e-5, double tol = 1e-4,
                           std::size_t max_entries = 0);

}  // namespace vcg::ad
