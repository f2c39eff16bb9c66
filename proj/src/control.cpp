#include "fedsim/control.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsim/kernels.hpp"
#include "fedsim/privacy.hpp"

namespace fedsim::control {

bool NoiseSwitch::observe(int t, double artificial_level, double channel_level) {
  if (t <= last_round_)
    throw std::invalid_argument("noise switch rounds must advance");
  last_round_ = t;
  if (t_th_) return false;  // never reverts
  if (artificial_level <= channel_level) {
    t_th_ = t;
    return true;
  }
  return false;
}

double communication_noise_level(const wireless::PowerAllocation& power,
                                 const wireless::ChannelRealization& channel) {
  double acc = 0.0;
  for (std::size_t k = 0; k < channel.device_count(); ++k)
    acc += wireless::effective_noise_std(k, power, channel);
  return acc;
}

double artificial_noise_level(std::span<const double> delta_s,
                              std::span<const double> eps_devices,
                              double delta_dp) {
  if (delta_s.size() != eps_devices.size())
    throw std::invalid_argument("artificial_noise_level: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < delta_s.size(); ++k)
    acc += privacy::gaussian_sigma(delta_s[k], eps_devices[k], delta_dp);
  return acc;
}

double contraction_factor(double mu, double l_smooth, double learning_rate,
                          double delta, std::span<const double> weights) {
  const double g2 = kernels::norm_sq(weights);
  return 1.0 + mu * l_smooth * learning_rate * learning_rate * delta * delta * g2 -
         2.0 * learning_rate * mu;
}

double max_learning_rate(double l_smooth, double delta,
                         std::span<const double> weights) {
  if (l_smooth <= 0 || delta <= 0)
    throw std::domain_error("max_learning_rate: L and delta must be > 0");
  const double g2 = kernels::norm_sq(weights);
  if (g2 <= 0) throw std::domain_error("max_learning_rate: zero weights");
  return 2.0 / (l_smooth * delta * delta * g2);
}

DeltaEstimate estimate_delta(std::span<const std::vector<double>> local_gradients,
                             std::span<const double> global_gradient,
                             std::span<const double> weights) {
  const double global_sq = kernels::norm_sq(global_gradient);
  if (global_sq <= 0.0) return {1.0, false};
  double weighted = 0.0;
  for (std::size_t k = 0; k < local_gradients.size(); ++k)
    weighted += weights[k] * kernels::norm_sq(local_gradients[k]);
  return {std::max(std::sqrt(weighted / global_sq), 1.0), true};
}

namespace {

double channel_noise_sum(const BoundInputs& in) {
  double acc = 0.0;
  for (std::size_t k = 0; k < in.weights.size(); ++k) {
    if (in.sigma_n0 == 0.0) break;
    const double hp = in.h_norms[k] * in.powers[k];
    acc += in.weights[k] * in.weights[k] * in.sigma_n0 * in.sigma_n0 / (hp * hp);
  }
  return acc;
}

double artificial_round_noise(const BoundInputs& in, std::size_t m) {
  const auto& eps = in.eps_artificial[m];
  const double two_log = 2.0 * std::log(1.25 / in.delta_dp);
  double acc = 0.0;
  for (std::size_t k = 0; k < in.weights.size(); ++k) {
    const double gd = in.weights[k] * in.delta_s[k];
    acc += gd * gd * two_log / (eps[k] * eps[k]);
  }
  return acc;
}

}  // namespace

BoundDecomposition convergence_bound(const BoundInputs& inputs, double initial_gap) {
  BoundDecomposition out;
  out.contraction = contraction_factor(inputs.mu, inputs.l_smooth,
                                       inputs.learning_rate, inputs.delta,
                                       inputs.weights);
  const double a = out.contraction;
  if (a >= 1.0) {
    out.divergent = true;
    out.total = std::numeric_limits<double>::infinity();
    return out;
  }
  const int t_horizon = inputs.total_rounds;
  const double a_pow_t = std::pow(a, t_horizon);
  const double half_l_lambda_sq =
      0.5 * inputs.l_smooth * inputs.learning_rate * inputs.learning_rate;

  out.initial_term = a_pow_t * initial_gap;
  out.channel_term =
      half_l_lambda_sq * (1.0 - a_pow_t) / (1.0 - a) * channel_noise_sum(inputs);
  double art = 0.0;
  double a_pow_m = 1.0;
  for (std::size_t m = 0; m < inputs.eps_artificial.size(); ++m) {
    art += a_pow_m * artificial_round_noise(inputs, m);
    a_pow_m *= a;
  }
  out.artificial_term = half_l_lambda_sq * art;
  out.total = out.initial_term + out.channel_term + out.artificial_term;
  return out;
}

std::vector<double> convergence_bound_trajectory(const BoundInputs& inputs,
                                              double initial_gap) {
  std::vector<double> out(inputs.total_rounds,
                          std::numeric_limits<double>::infinity());
  const double a = contraction_factor(inputs.mu, inputs.l_smooth,
                                      inputs.learning_rate, inputs.delta,
                                      inputs.weights);
  if (a >= 1.0) return out;
  const double half_l_lambda_sq =
      0.5 * inputs.l_smooth * inputs.learning_rate * inputs.learning_rate;
  const double channel_sum = channel_noise_sum(inputs);

  double a_pow_t = 1.0;
  for (int t = 1; t <= inputs.total_rounds; ++t) {
    a_pow_t *= a;
    double art = 0.0;
    double a_pow_m = 1.0;
    const std::size_t art_rounds =
        std::min<std::size_t>(inputs.eps_artificial.size(), t);
    for (std::size_t m = 0; m < art_rounds; ++m) {
      art += a_pow_m * artificial_round_noise(inputs, m);
      a_pow_m *= a;
    }
    out[t - 1] = a_pow_t * initial_gap +
                 half_l_lambda_sq * (1.0 - a_pow_t) / (1.0 - a) * channel_sum +
                 half_l_lambda_sq * art;
  }
  return out;
}

}  // namespace fedsim::control
