#include "crowdclip/optimizer.hpp"

#include <cmath>

#include "crowdclip/error.hpp"

namespace crowdclip {

RAdam::RAdam(std::size_t num_parameters, RAdamOptions options)
    : options_(options),
      first_moment_(num_parameters, 0.0),
      second_moment_(num_parameters, 0.0) {
  if (!(options_.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  }
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0 &&
        options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "betas must lie in [0, 1)");
  }
}

void RAdam::Step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != first_moment_.size() || grad.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer parameter count");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double t = steps_;
  const double b1t = std::pow(b1, t);
  const double b2t = std::pow(b2, t);
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  double rect = 0.0;
  if (rho_t > 5.0) {
    rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                     ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grad[i];
    if (options_.weight_decay != 0.0) g += options_.weight_decay * params[i];
    first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * g;
    second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * g * g;
    const double m_hat = first_moment_[i] / (1.0 - b1t);
    if (rho_t > 5.0) {
      const double adaptive = std::sqrt(1.0 - b2t) /
                              (std::sqrt(second_moment_[i]) + options_.epsilon);
      params[i] -= options_.learning_rate * m_hat * rect * adaptive;
    } else {
      params[i] -= options_.learning_rate * m_hat;
    }
  }
}

}  // namespace crowdclip
