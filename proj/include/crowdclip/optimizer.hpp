#pragma once

#include <span>
#include <vector>

namespace crowdclip {

// Defaults follow the common RAdam reference implementation.
struct RAdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// Rectified Adam.  While the variance estimate is unreliable
// (rho_t <= 5) it falls back to bias-corrected momentum.
class RAdam {
 public:
  RAdam(std::size_t num_parameters, RAdamOptions options);

  void Step(std::span<double> params, std::span<const double> grad);

  int steps() const noexcept { return steps_; }
  const RAdamOptions& options() const noexcept { return options_; }

 private:
  RAdamOptions options_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  int steps_ = 0;
};

}  // namespace crowdclip
