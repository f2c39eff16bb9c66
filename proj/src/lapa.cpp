#include "fedsim/lapa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsim/kernels.hpp"

namespace fedsim::lapa {

double GradientHistory::at(int round) const {
  if (round < 1 || static_cast<std::size_t>(round) > norms_.size())
    throw std::domain_error("gradient history has no such round");
  return norms_[round - 1];
}

void PidConfig::validate() const {
  if (window < 1) throw std::invalid_argument("pid window must be >= 1");
  if (k_p < 0 || k_s < 0)
    throw std::invalid_argument("pid coefficients must be >= 0");
}

void PrivacyLedger::record_round(double eps) { eps_round.push_back(eps); }

void PrivacyLedger::record_devices(std::vector<double> eps) {
  eps_device.push_back(std::move(eps));
}

double PrivacyLedger::max_device_composition() const {
  if (eps_device.empty()) return 0.0;
  std::vector<double> totals(eps_device.front().size(), 0.0);
  for (const auto& row : eps_device)
    for (std::size_t k = 0; k < row.size(); ++k) totals[k] += row[k];
  return *std::max_element(totals.begin(), totals.end());
}

bool PrivacyLedger::check_invariants(double tol) const {
  double sum_rounds = 0.0;
  for (double e : eps_round) {
    if (e < 0) return false;
    sum_rounds += e;
  }
  if (sum_rounds > eps_total + tol) return false;
  const std::size_t paired = std::min(eps_round.size(), eps_device.size());
  for (std::size_t i = 0; i < paired; ++i) {
    const double device_sum =
        std::accumulate(eps_device[i].begin(), eps_device[i].end(), 0.0);
    if (std::abs(device_sum - eps_round[i]) > tol) return false;
    for (double e : eps_device[i])
      if (e < 0) return false;
  }
  return true;
}

double feedback_error(const GradientHistory& history, int i_m, int i_prev) {
  return std::abs(history.at(i_m) - history.at(i_prev));
}

PidError pid_error(const GradientHistory& history, const PidConfig& cfg, int t,
                   Rng* rng) {
  cfg.validate();
  const int available = static_cast<int>(history.rounds());
  if (available < 2) return {0.0, true};

  // Candidate rounds are the stored interval [max(1, t-m), min(t-1, stored)].
  const int hi = std::min(t - 1, available);
  const int lo = std::max(1, t - cfg.window);
  if (hi - lo < 1) return {0.0, true};

  std::vector<int> samples;
  if (cfg.random_sampling && rng != nullptr) {
    const int span = hi - lo + 1;
    const int want = std::min(cfg.window + 1, span);
    std::vector<int> pool(span);
    std::iota(pool.begin(), pool.end(), lo);
    for (int i = 0; i < want; ++i)
      std::swap(pool[i], pool[i + rng->uniform_index(span - i)]);
    samples.assign(pool.begin(), pool.begin() + want);
    std::sort(samples.begin(), samples.end());
  } else {
    for (int r = lo; r <= hi; ++r) samples.push_back(r);
  }
  if (samples.size() < 2) return {0.0, true};

  std::vector<double> errors;
  errors.reserve(samples.size() - 1);
  for (std::size_t i = 1; i < samples.size(); ++i)
    errors.push_back(feedback_error(history, samples[i], samples[i - 1]));
  const double latest = errors.back();
  const double mean =
      std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
  return {std::max(cfg.k_p * latest + cfg.k_s * mean, 0.0), false};
}

double round_budget(double e_t, PrivacyLedger& ledger, int t) {
  if (t < 1 || t > ledger.planned_rounds)
    throw std::invalid_argument("round index outside [1, T]");
  if (e_t < 0) throw std::invalid_argument("pid error must be >= 0");
  const double remaining = ledger.eps_total - ledger.eps_consumed;
  if (remaining <= 0.0) {
    ledger.exhausted = true;
    return 0.0;
  }
  return std::exp(-e_t) * remaining /
         static_cast<double>(ledger.planned_rounds - t + 1);
}

AngleResult gradient_angle(std::span<const double> global_gradient,
                           std::span<const double> local_gradient) {
  const double gn = kernels::norm(global_gradient);
  const double ln = kernels::norm(local_gradient);
  if (gn == 0.0 || ln == 0.0) return {1.5707963267948966, true};
  double cosine = kernels::dot(global_gradient, local_gradient) / (gn * ln);
  cosine = std::clamp(cosine, -1.0, 1.0);
  return {std::acos(cosine), false};
}

double smooth_angle(double previous_smoothed, double theta, int t) {
  if (t < 1) throw std::invalid_argument("round index must be >= 1");
  if (t == 1) return theta;
  const double tt = static_cast<double>(t);
  return (tt - 1.0) / tt * previous_smoothed + theta / tt;
}

void AngleState::update(std::span<const double> angles, int t) {
  if (angles.size() != smoothed.size())
    throw std::invalid_argument("angle count mismatch");
  if (t != round + 1) throw std::invalid_argument("angle rounds must advance by 1");
  for (std::size_t k = 0; k < smoothed.size(); ++k)
    smoothed[k] = smooth_angle(smoothed[k], angles[k], t);
  round = t;
}

double contribution(double smoothed_angle, double beta) {
  if (beta <= 0) throw std::invalid_argument("beta must be > 0");
  // -expm1(-x) = 1 - e^{-x} without cancellation, keeping f strictly
  // positive even when the inner exponential underflows.
  return beta * -std::expm1(-std::exp(-beta * (smoothed_angle - 1.0)));
}

std::vector<double> device_budgets(std::span<const double> contributions,
                                   double eps_round) {
  if (eps_round <= 0) throw std::invalid_argument("round budget must be > 0");
  if (contributions.empty())
    throw std::invalid_argument("no devices to allocate to");
  double sum = 0.0;
  for (double f : contributions) {
    if (f < 0) throw std::invalid_argument("contributions must be >= 0");
    sum += f;
  }
  std::vector<double> out(contributions.size());
  if (sum <= 0.0) {  // degenerate: uniform split
    const double share = eps_round / static_cast<double>(contributions.size());
    std::fill(out.begin(), out.end(), share);
    return out;
  }
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = contributions[k] / sum * eps_round;
  return out;
}

double clamp_epsilon(double eps, double eps_floor) {
  constexpr double kCeiling = 1.0 - 1e-9;
  return std::clamp(eps, eps_floor, kCeiling);
}

}  // namespace fedsim::lapa
