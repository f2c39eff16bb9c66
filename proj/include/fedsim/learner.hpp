#pragma once
// Local models: multinomial logistic regression on the synthetic clusters,
// and a strongly-convex quadratic task with constructed (mu, L) used by the
// convergence-bound harness. Gradients are analytic and full-batch; a
// batch_fraction < 1 switches to seeded mini-batches.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/datagen.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::learner {

struct ModelParams {
  std::vector<double> w;
};

enum class TaskKind { kLogistic, kQuadratic };

// One device's quadratic piece: F_k(w) = 0.5 (w-b_k)^T A_k (w-b_k).
struct QuadraticLocal {
  std::vector<double> a;  // dim x dim, symmetric PSD, row-major
  std::vector<double> b;  // dim
};

struct TaskSpec {
  TaskKind kind = TaskKind::kLogistic;
  int feature_dim = 0;   // d
  int class_count = 0;   // Z (logistic)
  double l2_reg = 0.0;
  std::vector<QuadraticLocal> quadratics;  // one per device (quadratic kind)

  std::size_t param_dim() const {
    return kind == TaskKind::kLogistic
               ? static_cast<std::size_t>(class_count) * feature_dim
               : static_cast<std::size_t>(feature_dim);
  }
};

struct QuadraticTaskConfig {
  int dim = 1;
  double mu = 1.0;
  double l_smooth = 4.0;
  // Centers b_k: mix of partition class anchors weighted by the device's
  // label PMF, plus a small per-device jitter.
  double anchor_scale = 1.0;
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

// Builds per-device quadratics whose eigenvalues cover [mu, L] exactly
// (device 0 attains mu, the last device attains L) and whose centers are
// anchored to the partition's label mixture.
TaskSpec make_quadratic_task(const datagen::PartitionSpec& partition,
                             std::span<const datagen::LabeledDataset> datasets,
                             const QuadraticTaskConfig& cfg);

double local_loss(const ModelParams& params, const datagen::LabeledDataset& data,
                  const TaskSpec& task, std::size_t device);

std::vector<double> local_gradient(const ModelParams& params,
                                   const datagen::LabeledDataset& data,
                                   const TaskSpec& task, std::size_t device);

// Mini-batch variant: picks ceil(fraction * |D_k|) sample indices from rng.
std::vector<double> local_gradient_minibatch(const ModelParams& params,
                                             const datagen::LabeledDataset& data,
                                             const TaskSpec& task,
                                             std::size_t device, double fraction,
                                             Rng& rng);

// g / max(1, ||g||/C); direction preserved, output norm <= C.
std::vector<double> clip_gradient(std::span<const double> g, double clip_bound);

// (mu, L): quadratic -> extreme eigenvalues over all devices (plus l2_reg);
// logistic -> (l2_reg, l2_reg + 0.25 * max feature row norm^2). Throws
// std::domain_error for logistic with l2_reg == 0.
std::pair<double, double> task_constants(
    const TaskSpec& task, std::span<const datagen::LabeledDataset> datasets);

// Weighted objective helpers for the quadratic task.
// F(w) = sum_k weights[k] * F_k(w); minimizer solves (sum w_k A_k) w = sum w_k A_k b_k.
std::vector<double> quadratic_weighted_minimizer(const TaskSpec& task,
                                                 std::span<const double> weights);

// Portable fixture format for quadratic instances.
void write_quadratic_task(std::ostream& os, const TaskSpec& task);
TaskSpec read_quadratic_task(std::istream& is);

}  // namespace fedsim::learner
