#pragma once

#include "taskvec/tensor.hpp"

#include <cstdint>
#include <vector>

namespace taskvec {

/// Inverse square root schedule with linear warmup:
///   step <= warmup : peak * step / warmup
///   step >  warmup : peak * sqrt(warmup / step)
/// Both branches agree exactly at step == warmup.
double lr_schedule(std::int64_t step, double peak, std::int64_t warmup);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam over a fixed parameter set. Moment state is
/// keyed by position, so the set must not change between steps. Gradients
/// are consumed from each tensor's grad slot and cleared by step().
class AdamW {
public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  /// One update with the given learning rate; increments the internal step
  /// counter used for bias correction.
  void step(double lr);

  std::int64_t steps_taken() const { return t_; }

private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace taskvec
