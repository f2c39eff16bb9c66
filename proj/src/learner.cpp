#include "fedsim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fedsim/kernels.hpp"
#include "fedsim/linalg.hpp"

namespace fedsim::learner {

namespace {

void check_logistic_dims(const ModelParams& params,
                         const datagen::LabeledDataset& data,
                         const TaskSpec& task) {
  if (params.w.size() != task.param_dim())
    throw std::domain_error("model dimension mismatch");
  if (data.dim != static_cast<std::size_t>(task.feature_dim))
    throw std::domain_error("feature dimension mismatch");
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
std::vector<double> random_rotation(int dim, Rng& rng) {
  std::vector<double> q(dim * dim);
  for (int col = 0; col < dim; ++col) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gaussian();
    for (int prev = 0; prev < col; ++prev) {
      double proj = 0.0;
      for (int i = 0; i < dim; ++i) proj += v[i] * q[i * dim + prev];
      for (int i = 0; i < dim; ++i) v[i] -= proj * q[i * dim + prev];
    }
    double nrm = std::sqrt(kernels::norm_sq(v));
    if (nrm < 1e-12) {  // retry direction; vanishingly rare
      v.assign(dim, 0.0);
      v[col % dim] = 1.0;
      nrm = 1.0;
    }
    for (int i = 0; i < dim; ++i) q[i * dim + col] = v[i] / nrm;
  }
  return q;
}

double logistic_sample_loss(std::span<const double> w,
                            std::span<const double> x, int label, int classes,
                            int dim, std::vector<double>& logits) {
  logits.resize(classes);
  for (int z = 0; z < classes; ++z) {
    logits[z] = kernels::ops().dot(w.data() + z * dim, x.data(), dim);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  lse = mx + std::log(lse);
  return lse - logits[label];
}

void logistic_sample_gradient(std::span<const double> w,
                              std::span<const double> x, int label, int classes,
                              int dim, double weight, std::vector<double>& logits,
                              std::span<double> grad) {
  logits.resize(classes);
  for (int z = 0; z < classes; ++z)
    logits[z] = kernels::ops().dot(w.data() + z * dim, x.data(), dim);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    denom += l;
  }
  for (int z = 0; z < classes; ++z) {
    const double p = logits[z] / denom;
    const double coef = weight * (p - (z == label ? 1.0 : 0.0));
    kernels::ops().axpy(coef, x.data(), grad.data() + z * dim, dim);
  }
}

std::vector<double> quadratic_gradient(const ModelParams& params,
                                       const TaskSpec& task, std::size_t device) {
  const auto& q = task.quadratics.at(device);
  const std::size_t dim = params.w.size();
  std::vector<double> diff(dim);
  for (std::size_t i = 0; i < dim; ++i) diff[i] = params.w[i] - q.b[i];
  std::vector<double> grad(dim);
  kernels::matvec(q.a, diff, {}, grad);
  if (task.l2_reg != 0.0) kernels::axpy(task.l2_reg, params.w, grad);
  return grad;
}

}  // namespace

TaskSpec make_quadratic_task(const datagen::PartitionSpec& partition,
                             std::span<const datagen::LabeledDataset> datasets,
                             const QuadraticTaskConfig& cfg) {
  if (cfg.dim < 1) throw std::invalid_argument("quadratic dim must be >= 1");
  if (cfg.mu <= 0 || cfg.l_smooth < cfg.mu)
    throw std::invalid_argument("require 0 < mu <= L");
  const int K = partition.device_count;
  const int d = cfg.dim;

  // Label-z anchor points in parameter space; device centers mix them with
  // the device's empirical label PMF so heterogeneity tracks the partition.
  std::vector<std::vector<double>> anchors(partition.class_count);
  for (int z = 0; z < partition.class_count; ++z) {
    Rng rng(Rng::derive(cfg.seed, "quad.anchor", static_cast<std::uint64_t>(z)));
    anchors[z].resize(d);
    for (double& v : anchors[z]) v = cfg.anchor_scale * rng.gaussian();
  }

  TaskSpec task;
  task.kind = TaskKind::kQuadratic;
  task.feature_dim = d;
  task.class_count = partition.class_count;
  task.quadratics.resize(K);
  // One global eigenvalue grid over all (device, coordinate) slots so that
  // min over devices is exactly mu and max exactly L.
  const int slots = K * d;
  for (int k = 0; k < K; ++k) {
    Rng rng(Rng::derive(cfg.seed, "quad.matrix", static_cast<std::uint64_t>(k)));
    std::vector<double> eig(d);
    for (int i = 0; i < d; ++i) {
      const int slot = k * d + i;
      eig[i] = slots == 1 ? cfg.mu
                          : cfg.mu + (cfg.l_smooth - cfg.mu) * slot / (slots - 1);
    }
    auto& quad = task.quadratics[k];
    quad.a.assign(d * d, 0.0);
    if (d == 1) {
      quad.a[0] = eig[0];
    } else {
      const auto rot = random_rotation(d, rng);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          double acc = 0.0;
          for (int i = 0; i < d; ++i) acc += rot[r * d + i] * eig[i] * rot[c * d + i];
          quad.a[r * d + c] = acc;
        }
      // Force exact symmetry against rounding.
      for (int r = 0; r < d; ++r)
        for (int c = r + 1; c < d; ++c) {
          const double s = 0.5 * (quad.a[r * d + c] + quad.a[c * d + r]);
          quad.a[r * d + c] = s;
          quad.a[c * d + r] = s;
        }
    }
    quad.b.assign(d, 0.0);
    const auto pmf = datagen::label_pmf(datasets[k], partition.class_count);
    for (int z = 0; z < partition.class_count; ++z)
      kernels::axpy(pmf.mass[z], anchors[z], quad.b);
    if (cfg.jitter > 0.0)
      for (double& v : quad.b) v += cfg.jitter * rng.gaussian();
  }
  return task;
}

double local_loss(const ModelParams& params, const datagen::LabeledDataset& data,
                  const TaskSpec& task, std::size_t device) {
  if (task.kind == TaskKind::kQuadratic) {
    const auto& q = task.quadratics.at(device);
    if (params.w.size() != q.b.size())
      throw std::domain_error("model dimension mismatch");
    const std::size_t dim = params.w.size();
    std::vector<double> diff(dim), av(dim);
    for (std::size_t i = 0; i < dim; ++i) diff[i] = params.w[i] - q.b[i];
    kernels::matvec(q.a, diff, {}, av);
    return 0.5 * kernels::dot(diff, av) +
           0.5 * task.l2_reg * kernels::norm_sq(params.w);
  }
  check_logistic_dims(params, data, task);
  if (data.size() == 0) throw std::domain_error("loss of empty dataset");
  std::vector<double> logits;
  double acc = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    acc += logistic_sample_loss(params.w, data.row(s), data.labels[s],
                                task.class_count, task.feature_dim, logits);
  }
  return acc / static_cast<double>(data.size()) +
         0.5 * task.l2_reg * kernels::norm_sq(params.w);
}

std::vector<double> local_gradient(const ModelParams& params,
                                   const datagen::LabeledDataset& data,
                                   const TaskSpec& task, std::size_t device) {
  if (task.kind == TaskKind::kQuadratic)
    return quadratic_gradient(params, task, device);
  check_logistic_dims(params, data, task);
  if (data.size() == 0) throw std::domain_error("gradient of empty dataset");
  std::vector<double> grad(params.w.size(), 0.0);
  std::vector<double> logits;
  const double weight = 1.0 / static_cast<double>(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    logistic_sample_gradient(params.w, data.row(s), data.labels[s],
                             task.class_count, task.feature_dim, weight, logits,
                             grad);
  }
  if (task.l2_reg != 0.0) kernels::axpy(task.l2_reg, params.w, grad);
  return grad;
}

std::vector<double> local_gradient_minibatch(const ModelParams& params,
                                             const datagen::LabeledDataset& data,
                                             const TaskSpec& task,
                                             std::size_t device, double fraction,
                                             Rng& rng) {
  if (task.kind == TaskKind::kQuadratic)
    return quadratic_gradient(params, task, device);
  if (fraction >= 1.0) return local_gradient(params, data, task, device);
  if (fraction <= 0.0) throw std::invalid_argument("batch fraction must be > 0");
  check_logistic_dims(params, data, task);
  const std::size_t n = data.size();
  const std::size_t batch =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < batch; ++i)
    std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
  std::vector<double> grad(params.w.size(), 0.0);
  std::vector<double> logits;
  const double weight = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    logistic_sample_gradient(params.w, data.row(idx[i]), data.labels[idx[i]],
                             task.class_count, task.feature_dim, weight, logits,
                             grad);
  }
  if (task.l2_reg != 0.0) kernels::axpy(task.l2_reg, params.w, grad);
  return grad;
}

std::vector<double> clip_gradient(std::span<const double> g, double clip_bound) {
  if (clip_bound <= 0) throw std::invalid_argument("clip bound must be > 0");
  std::vector<double> out(g.begin(), g.end());
  const double nrm = kernels::norm(g);
  if (nrm > clip_bound) kernels::scale(out, clip_bound / nrm);
  return out;
}

std::pair<double, double> task_constants(
    const TaskSpec& task, std::span<const datagen::LabeledDataset> datasets) {
  if (task.kind == TaskKind::kQuadratic) {
    if (task.quadratics.empty())
      throw std::domain_error("quadratic task holds no devices");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& q : task.quadratics) {
      const auto eig = linalg::symmetric_eigenvalues(q.a, q.b.size());
      lo = std::min(lo, eig.front());
      hi = std::max(hi, eig.back());
    }
    return {lo + task.l2_reg, hi + task.l2_reg};
  }
  if (task.l2_reg <= 0.0)
    throw std::domain_error(
        "logistic task without l2 regularization is not strongly convex");
  double max_row_sq = 0.0;
  for (const auto& ds : datasets)
    for (std::size_t s = 0; s < ds.size(); ++s)
      max_row_sq = std::max(max_row_sq, kernels::norm_sq(ds.row(s)));
  return {task.l2_reg, task.l2_reg + 0.25 * max_row_sq};
}

std::vector<double> quadratic_weighted_minimizer(const TaskSpec& task,
                                                 std::span<const double> weights) {
  if (task.kind != TaskKind::kQuadratic)
    throw std::domain_error("minimizer only defined for the quadratic task");
  const std::size_t d = task.feature_dim;
  std::vector<double> h(d * d, 0.0), rhs(d, 0.0), ab(d);
  for (std::size_t k = 0; k < task.quadratics.size(); ++k) {
    const double wk = weights[k];
    if (wk == 0.0) continue;
    const auto& q = task.quadratics[k];
    kernels::axpy(wk, q.a, h);
    kernels::matvec(q.a, q.b, {}, ab);
    kernels::axpy(wk, ab, rhs);
  }
  if (task.l2_reg != 0.0)
    for (std::size_t i = 0; i < d; ++i) h[i * d + i] += task.l2_reg;
  return linalg::solve(std::move(h), std::move(rhs), d);
}

void write_quadratic_task(std::ostream& os, const TaskSpec& task) {
  if (task.kind != TaskKind::kQuadratic)
    throw std::domain_error("can only serialize quadratic tasks");
  os.precision(17);
  os << "fedsim-quadratic 1\n";
  os << task.quadratics.size() << ' ' << task.feature_dim << ' '
     << task.class_count << ' ' << task.l2_reg << '\n';
  for (const auto& q : task.quadratics) {
    for (double v : q.a) os << v << ' ';
    os << '\n';
    for (double v : q.b) os << v << ' ';
    os << '\n';
  }
}

TaskSpec read_quadratic_task(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "fedsim-quadratic" || version != 1)
    throw std::domain_error("not a quadratic task fixture");
  std::size_t devices = 0;
  TaskSpec task;
  task.kind = TaskKind::kQuadratic;
  is >> devices >> task.feature_dim >> task.class_count >> task.l2_reg;
  if (!is || task.feature_dim < 1) throw std::domain_error("corrupt fixture header");
  task.quadratics.resize(devices);
  const std::size_t d = task.feature_dim;
  for (auto& q : task.quadratics) {
    q.a.resize(d * d);
    q.b.resize(d);
    for (double& v : q.a) is >> v;
    for (double& v : q.b) is >> v;
  }
  if (!is) throw std::domain_error("corrupt fixture body");
  return task;
}

}  // namespace fedsim::learner
