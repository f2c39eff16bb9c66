#pragma once
// Lightweight adaptive privacy allocation: a PID-like progress signal over
// the stored global-gradient summaries drives per-round budgets, and
// smoothed gradient angles drive the per-device split of each round budget.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim::lapa {

// Scalar summaries (l2 norms) of past aggregated perturbed gradients,
// appended once per round, indexed from round 1.
class GradientHistory {
 public:
  void append(double norm_summary) { norms_.push_back(norm_summary); }
  std::size_t rounds() const { return norms_.size(); }
  // 1-based round index; throws std::domain_error when absent.
  double at(int round) const;

 private:
  std::vector<double> norms_;
};

struct PidConfig {
  double k_p = 1.0;
  double k_s = 0.5;
  int window = 5;  // m
  bool random_sampling = false;

  void validate() const;
};

struct PidError {
  double value = 0.0;
  bool warm_up = false;
};

struct PrivacyLedger {
  double eps_total = 0.0;
  double delta_dp = 0.01;
  int planned_rounds = 0;  // T

  double eps_consumed = 0.0;
  bool exhausted = false;
  std::vector<double> eps_round;                // one entry per round
  std::vector<std::vector<double>> eps_device;  // [round][device]

  void record_round(double eps);
  void record_devices(std::vector<double> eps);

  // Sum over rounds of each device's budget; returns the max over devices
  // (basic composition).
  double max_device_composition() const;
  // Checks sum_t eps_round <= eps_total and per-round device sums against
  // the round budget; returns false on any violation beyond tol.
  bool check_invariants(double tol = 1e-10) const;
};

// |s(i_m) - s(i_prev)| over stored summaries.
double feedback_error(const GradientHistory& history, int i_m, int i_prev);

// K_p * (latest pairwise error) + K_s * (mean pairwise error over the
// window). Deterministic mode uses the most recent consecutive pairs in
// [t-m, t); random mode draws the samples from rng. Fewer than two stored
// rounds -> {0, warm_up}.
PidError pid_error(const GradientHistory& history, const PidConfig& cfg, int t,
                   Rng* rng = nullptr);

// exp(-e_t) * (eps_total - eps_consumed) / (T - t + 1); zero with the
// exhausted flag set when the budget is gone.
double round_budget(double e_t, PrivacyLedger& ledger, int t);

struct AngleResult {
  double angle = 0.0;  // radians, in [0, pi]
  bool degenerate = false;
};

// arccos of the cosine similarity; a zero vector yields pi/2 (degenerate).
AngleResult gradient_angle(std::span<const double> global_gradient,
                           std::span<const double> local_gradient);

// Running mean: t = 1 -> theta; t > 1 -> ((t-1)*prev + theta)/t.
double smooth_angle(double previous_smoothed, double theta, int t);

struct AngleState {
  std::vector<double> smoothed;
  int round = 0;

  explicit AngleState(std::size_t device_count)
      : smoothed(device_count, 0.0) {}
  // Feeds round t's angles (t must advance by exactly 1).
  void update(std::span<const double> angles, int t);
};

// f(theta) = beta * (1 - exp(-exp(-beta*(theta - 1)))); strictly positive,
// strictly decreasing in theta.
double contribution(double smoothed_angle, double beta);

// Proportional split of eps_round; sums to eps_round exactly. A zero-sum
// contribution vector falls back to a uniform split.
std::vector<double> device_budgets(std::span<const double> contributions,
                                   double eps_round);

// Clamp into the Gaussian-mechanism validity range before computing noise;
// the ledger keeps the raw allocation so conservation stays exact.
double clamp_epsilon(double eps, double eps_floor = 1e-4);

}  // namespace fedsim::lapa
