#pragma once
// Gaussian-mechanism calibration and basic-composition accounting.

#include <span>
#include <vector>

#include "fedsim/lapa.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::privacy {

struct MechanismParams {
  double delta_dp = 0.01;   // failure probability
  double clip_bound = 1.0;  // C
  double learning_rate = 0.01;
};

// l2 sensitivity of a clipped averaged gradient step: 2*lambda*C/|D_k|.
double sensitivity(double learning_rate, double clip_bound,
                   std::size_t dataset_size);
double sensitivity(const MechanismParams& params, std::size_t dataset_size);

// sqrt(2 ln(1.25/delta_dp)).
double noise_multiplier(double delta_dp);

// Minimal sigma meeting (eps, delta_dp)-DP for a query with sensitivity
// delta_s. Requires eps in (0, 1).
double gaussian_sigma(double delta_s, double eps, double delta_dp);

std::vector<double> add_dp_noise(std::span<const double> g, double sigma,
                                 Rng& rng);
void add_dp_noise_inplace(std::span<double> g, double sigma, Rng& rng);

// Basic composition over the ledger: per-device sum of round budgets,
// reported as the max over devices. Throws std::logic_error if any device
// exceeds the total budget.
double composed_epsilon(const lapa::PrivacyLedger& ledger);

}  // namespace fedsim::privacy
