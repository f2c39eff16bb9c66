#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsim/kernels.hpp"

namespace fedsim::aggregation {

double AggregationWeights::sum_squares() const {
  return kernels::norm_sq(values);
}

std::size_t AggregationWeights::selected_count() const {
  std::size_t n = 0;
  for (bool s : selected) n += s ? 1 : 0;
  return n;
}

double wasserstein_1d(const datagen::LabelPmf& a, const datagen::LabelPmf& b) {
  if (a.mass.size() != b.mass.size())
    throw std::domain_error("wasserstein_1d: PMF length mismatch");
  double cdf_a = 0.0, cdf_b = 0.0, dist = 0.0;
  for (std::size_t z = 0; z < a.mass.size(); ++z) {
    cdf_a += a.mass[z];
    cdf_b += b.mass[z];
    dist += std::abs(cdf_a - cdf_b);
  }
  return dist;
}

AggregationWeights compute_weights(std::span<const datagen::LabelPmf> pmfs,
                                   const datagen::LabelPmf& global_pmf,
                                   std::span<const std::size_t> sizes,
                                   std::span<const double> sinrs,
                                   const WeightConfig& cfg,
                                   std::span<const double> angles) {
  const std::size_t K = sizes.size();
  if (sinrs.size() != K)
    throw std::invalid_argument("compute_weights: SINR count mismatch");
  if (cfg.policy == WeightPolicy::kWasserstein && pmfs.size() != K)
    throw std::invalid_argument("compute_weights: PMF count mismatch");
  if (cfg.policy == WeightPolicy::kAngle && angles.size() != K)
    throw std::invalid_argument("angle policy requires per-device angles");

  AggregationWeights out;
  out.values.assign(K, 0.0);
  out.selected.assign(K, false);
  for (std::size_t k = 0; k < K; ++k)
    out.selected[k] = sinrs[k] >= cfg.gamma_th;
  out.any_selected =
      std::any_of(out.selected.begin(), out.selected.end(), [](bool s) { return s; });
  if (!out.any_selected) return out;  // empty-round signal

  // Log-scores; normalized with the usual max-shift so e^{1/W} at the floor
  // cannot overflow.
  std::vector<double> log_score(K, -std::numeric_limits<double>::infinity());
  bool all_zero = true;
  for (std::size_t k = 0; k < K; ++k) {
    if (!out.selected[k]) continue;
    switch (cfg.policy) {
      case WeightPolicy::kWasserstein: {
        const double w = std::max(wasserstein_1d(pmfs[k], global_pmf), cfg.w_floor);
        log_score[k] = std::log(static_cast<double>(sizes[k])) + 1.0 / w;
        all_zero = false;
        break;
      }
      case WeightPolicy::kFedAvg:
        log_score[k] = std::log(static_cast<double>(sizes[k]));
        all_zero = false;
        break;
      case WeightPolicy::kAngle: {
        const double c = std::cos(angles[k]);
        if (c > 0.0) {
          log_score[k] = std::log(c * static_cast<double>(sizes[k]));
          all_zero = false;
        }
        break;
      }
    }
  }

  if (all_zero) {  // e.g. every selected device at angle >= pi/2
    const double share = 1.0 / static_cast<double>(out.selected_count());
    for (std::size_t k = 0; k < K; ++k)
      if (out.selected[k]) out.values[k] = share;
    return out;
  }

  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k)
    if (out.selected[k]) max_log = std::max(max_log, log_score[k]);
  double denom = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (!out.selected[k]) continue;
    out.values[k] = std::exp(log_score[k] - max_log);
    denom += out.values[k];
  }
  for (std::size_t k = 0; k < K; ++k) out.values[k] /= denom;
  return out;
}

std::vector<double> aggregate(std::span<const std::vector<double>> gradients,
                              const AggregationWeights& weights) {
  if (gradients.size() != weights.values.size())
    throw std::invalid_argument("aggregate: gradient count mismatch");
  if (gradients.empty()) throw std::invalid_argument("aggregate: no gradients");
  const std::size_t dim = gradients.front().size();
  std::vector<double> out(dim, 0.0);
  for (std::size_t k = 0; k < gradients.size(); ++k) {
    if (weights.values[k] == 0.0) continue;
    if (gradients[k].size() != dim)
      throw std::domain_error("aggregate: gradient dimension mismatch");
    kernels::axpy(weights.values[k], gradients[k], out);
  }
  return out;
}

void global_update(learner::ModelParams& params,
                   std::span<const double> global_gradient,
                   double learning_rate) {
  if (params.w.size() != global_gradient.size())
    throw std::domain_error("global_update: dimension mismatch");
  kernels::axpy(-learning_rate, global_gradient, params.w);
}

double ser_to_gamma_th(double ser) {
  if (ser <= 0.0 || ser >= 0.5)
    throw std::domain_error("SER preset must be in (0, 0.5)");
  // Invert Q(x) = ser by Newton on the complementary error function.
  double x = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double q = 0.5 * std::erfc(x / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    const double step = (q - ser) / pdf;
    x += step;
    if (std::abs(step) < 1e-14) break;
  }
  return 0.5 * x * x;  // SER = Q(sqrt(2 gamma))
}

}  // namespace fedsim::aggregation
