#pragma once
// Aggregation weights from label-distribution heterogeneity (1-D
// Wasserstein distance) gated by an SINR device-selection threshold, plus
// the FedAvg and angle-based baselines, gradient aggregation and the
// global model step.

#include <span>
#include <vector>

#include "fedsim/datagen.hpp"
#include "fedsim/learner.hpp"

namespace fedsim::aggregation {

enum class WeightPolicy { kWasserstein, kFedAvg, kAngle };

struct WeightConfig {
  WeightPolicy policy = WeightPolicy::kWasserstein;
  double gamma_th = 0.0;   // SINR selection threshold
  double w_floor = 1e-3;   // floor on W_k before exp(1/W_k)
};

struct AggregationWeights {
  std::vector<double> values;     // zero wherever not selected
  std::vector<bool> selected;     // gamma_k >= gamma_th
  bool any_selected = false;

  double sum_squares() const;
  std::size_t selected_count() const;
};

// W1 between PMFs on unit-spaced integer labels: sum_z |CDF_a - CDF_b|.
double wasserstein_1d(const datagen::LabelPmf& a, const datagen::LabelPmf& b);

// angles (radians, from the previous round's aggregate) are only consulted
// by the angle policy; pass empty otherwise. Scores are normalized over the
// selected set in log-space so the exp(1/W_k) factor stays finite at the
// W floor. All-zero scores fall back to a uniform split over selected.
AggregationWeights compute_weights(std::span<const datagen::LabelPmf> pmfs,
                                   const datagen::LabelPmf& global_pmf,
                                   std::span<const std::size_t> sizes,
                                   std::span<const double> sinrs,
                                   const WeightConfig& cfg,
                                   std::span<const double> angles = {});

std::vector<double> aggregate(std::span<const std::vector<double>> gradients,
                              const AggregationWeights& weights);

void global_update(learner::ModelParams& params,
                   std::span<const double> global_gradient,
                   double learning_rate);

// SER preset -> SINR threshold via the BPSK relation SER = Q(sqrt(2*gamma)).
double ser_to_gamma_th(double ser);

}  // namespace fedsim::aggregation
