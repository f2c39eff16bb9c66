#include "fedsim/privacy.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim::privacy {

double sensitivity(double learning_rate, double clip_bound,
                   std::size_t dataset_size) {
  if (dataset_size == 0) throw std::domain_error("sensitivity of empty dataset");
  if (clip_bound <= 0) throw std::domain_error("clip bound must be > 0");
  if (learning_rate < 0) throw std::domain_error("learning rate must be >= 0");
  return 2.0 * learning_rate * clip_bound / static_cast<double>(dataset_size);
}

double sensitivity(const MechanismParams& params, std::size_t dataset_size) {
  return sensitivity(params.learning_rate, params.clip_bound, dataset_size);
}

double noise_multiplier(double delta_dp) {
  if (delta_dp <= 0.0 || delta_dp >= 1.0)
    throw std::domain_error("delta_dp must be in (0, 1)");
  return std::sqrt(2.0 * std::log(1.25 / delta_dp));
}

double gaussian_sigma(double delta_s, double eps, double delta_dp) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::domain_error("gaussian mechanism requires eps in (0, 1)");
  if (delta_s < 0.0) throw std::domain_error("sensitivity must be >= 0");
  return delta_s * noise_multiplier(delta_dp) / eps;
}

std::vector<double> add_dp_noise(std::span<const double> g, double sigma,
                                 Rng& rng) {
  std::vector<double> out(g.begin(), g.end());
  add_dp_noise_inplace(out, sigma, rng);
  return out;
}

void add_dp_noise_inplace(std::span<double> g, double sigma, Rng& rng) {
  if (sigma < 0) throw std::domain_error("sigma must be >= 0");
  if (sigma == 0.0) return;
  for (double& v : g) v += rng.gaussian(sigma);
}

double composed_epsilon(const lapa::PrivacyLedger& ledger) {
  const double worst = ledger.max_device_composition();
  if (worst > ledger.eps_total + 1e-10)
    throw std::logic_error("device composition exceeds the total budget");
  return worst;
}

}  // namespace fedsim::privacy
