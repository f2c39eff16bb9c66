#pragma once
// Dynamic noise control (first crossing of the artificial-noise level below
// the channel-noise level) and the convergence-bound evaluator used by the
// verification harness and the power optimizer.

#include <optional>
#include <span>
#include <vector>

#include "fedsim/wireless.hpp"

namespace fedsim::control {

// Tracks the switch round T_th. Artificial noise is injected for rounds
// t <= T_th (the crossing round included) and never resumes afterwards.
class NoiseSwitch {
 public:
  // Feed round t's levels in order; returns true when this call switched.
  bool observe(int t, double artificial_level, double channel_level);
  bool switched() const { return t_th_.has_value(); }
  // Whether round t still takes artificial noise.
  bool artificial_active(int t) const { return !t_th_ || t <= *t_th_; }
  std::optional<int> t_th() const { return t_th_; }
  // No-crossing convention: a run of T rounds without a crossing reports
  // T_th = T (artificial noise the whole run).
  int t_th_or(int total_rounds) const { return t_th_.value_or(total_rounds); }

 private:
  std::optional<int> t_th_;
  int last_round_ = 0;
};

// sum_k sigma_n0 / (p_k ||h_k||).
double communication_noise_level(const wireless::PowerAllocation& power,
                                 const wireless::ChannelRealization& channel);

// sum_k delta_s[k] * sqrt(2 ln(1.25/delta_dp)) / eps[k].
double artificial_noise_level(std::span<const double> delta_s,
                              std::span<const double> eps_devices,
                              double delta_dp);

// A = 1 + mu*L*lambda^2*delta^2*sum(G^2) - 2*lambda*mu.
double contraction_factor(double mu, double l_smooth, double learning_rate,
                          double delta, std::span<const double> weights);

// Strict upper bound 2 / (L * delta^2 * sum(G^2)).
double max_learning_rate(double l_smooth, double delta,
                         std::span<const double> weights);

struct DeltaEstimate {
  double value = 1.0;
  bool valid = false;  // false when the global gradient vanished
};

// sqrt(sum_k G_k ||g_k||^2 / ||g||^2), floored at 1.
DeltaEstimate estimate_delta(std::span<const std::vector<double>> local_gradients,
                             std::span<const double> global_gradient,
                             std::span<const double> weights);

struct BoundInputs {
  double mu = 0.0;
  double l_smooth = 0.0;
  double learning_rate = 0.0;
  double delta = 1.0;    // local dissimilarity, >= 1
  double delta_dp = 0.01;
  double sigma_n0 = 0.0;
  std::vector<double> weights;    // G_k
  std::vector<double> h_norms;    // ||h_k||
  std::vector<double> powers;     // p_k
  std::vector<double> delta_s;    // per-device sensitivity
  // Effective per-device budgets for each round that took artificial noise,
  // in round order (entry m corresponds to discount A^m, as printed).
  std::vector<std::vector<double>> eps_artificial;
  int total_rounds = 0;  // T
};

struct BoundDecomposition {
  double contraction = 0.0;      // A
  double initial_term = 0.0;     // A^T * gap0
  double channel_term = 0.0;
  double artificial_term = 0.0;
  double total = 0.0;
  bool divergent = false;        // A >= 1: bound reported as infinite
};

// Bound at horizon `total_rounds`.
BoundDecomposition convergence_bound(const BoundInputs& inputs, double initial_gap);

// Bound evaluated at every horizon t = 1..total_rounds (artificial rounds
// beyond t are not counted at horizon t).
std::vector<double> convergence_bound_trajectory(const BoundInputs& inputs,
                                              double initial_gap);

}  // namespace fedsim::control
