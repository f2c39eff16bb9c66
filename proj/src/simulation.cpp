#include "fedsim/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fedsim/aggregation.hpp"
#include "fedsim/kernels.hpp"
#include "fedsim/privacy.hpp"

namespace fedsim::sim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct LossPair {
  double weighted;
  double uni;
};

LossPair losses(const learner::ModelParams& params,
                std::span<const datagen::LabeledDataset> datasets,
                const learner::TaskSpec& task,
                std::span<const double> weights,
                std::span<const double> size_weights) {
  LossPair out{0.0, 0.0};
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (weights[k] == 0.0 && size_weights[k] == 0.0) continue;
    const double l = learner::local_loss(params, datasets[k], task, k);
    out.weighted += weights[k] * l;
    out.uni += size_weights[k] * l;
  }
  return out;
}

double quadratic_optimum_value(const learner::TaskSpec& task,
                               std::span<const datagen::LabeledDataset> datasets,
                               std::span<const double> weights) {
  const auto w_star = learner::quadratic_weighted_minimizer(task, weights);
  learner::ModelParams p{w_star};
  double acc = 0.0;
  for (std::size_t k = 0; k < task.quadratics.size(); ++k) {
    if (weights[k] == 0.0) continue;
    acc += weights[k] * learner::local_loss(p, datasets[k], task, k);
  }
  return acc;
}

}  // namespace

RunResult run_simulation(const config::ExperimentConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  RunResult result;
  const int K = cfg.partition.device_count;
  const int T = cfg.rounds;
  const bool privacy_on = cfg.privacy.mode != config::PrivacyMode::kNone;
  const bool lapa_mode = cfg.privacy.mode == config::PrivacyMode::kLapa;

  // --- static setup -------------------------------------------------------
  const auto datasets = datagen::generate_partition(cfg.partition);
  std::vector<datagen::LabelPmf> pmfs;
  pmfs.reserve(K);
  for (const auto& ds : datasets)
    pmfs.push_back(datagen::label_pmf(ds, cfg.partition.class_count));
  const auto gpmf = datagen::global_pmf(datasets, cfg.partition.class_count);

  learner::TaskSpec task;
  if (cfg.task.kind == learner::TaskKind::kQuadratic) {
    task = learner::make_quadratic_task(cfg.partition, datasets, cfg.task.quadratic);
    task.l2_reg = cfg.task.l2_reg;
  } else {
    task.kind = learner::TaskKind::kLogistic;
    task.feature_dim = cfg.partition.feature_dim;
    task.class_count = cfg.partition.class_count;
    task.l2_reg = cfg.task.l2_reg;
  }

  const auto geometry = config::build_geometry(cfg.geometry, K);
  const std::uint64_t channel_seed =
      cfg.channel.seed ? *cfg.channel.seed : Rng::derive(seed, "run.channel");
  const double sigma_n0 = std::sqrt(cfg.channel.noise_power_w);
  const auto channel = wireless::sample_channel(
      geometry, cfg.channel.antennas, sigma_n0, channel_seed, cfg.channel.sinr_cap);

  std::vector<double> raw_amps;
  if (cfg.power.mode == config::PowerConfig::Mode::kExplicit) {
    raw_amps = cfg.power.amplitudes;
  } else {
    const double total =
        cfg.power.total > 0 ? cfg.power.total : 0.5 * cfg.power.p_max_total;
    raw_amps.assign(K, std::sqrt(total / K));
  }
  const auto power = wireless::project_power(std::move(raw_amps),
                                             cfg.power.p_min_total,
                                             cfg.power.p_max_total);

  const auto sinrs = wireless::all_sinrs(power, channel);

  std::vector<std::size_t> sizes = cfg.partition.sizes;
  std::vector<double> size_weights(K);
  {
    const double total = static_cast<double>(
        std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    for (int k = 0; k < K; ++k) size_weights[k] = sizes[k] / total;
  }

  const privacy::MechanismParams mechanism{cfg.privacy.delta_dp,
                                           cfg.privacy.clip_bound,
                                           cfg.task.learning_rate};
  std::vector<double> delta_s(K, 0.0);
  for (int k = 0; k < K; ++k)
    delta_s[k] = privacy::sensitivity(mechanism, sizes[k]);

  // Static weight policies are computed once; the angle policy re-evaluates
  // per round against the previous aggregate.
  const bool static_policy =
      cfg.weights.policy != aggregation::WeightPolicy::kAngle;
  aggregation::AggregationWeights weights;
  if (static_policy)
    weights = aggregation::compute_weights(pmfs, gpmf, sizes, sinrs, cfg.weights);

  learner::ModelParams params;
  params.w.assign(task.param_dim(), cfg.task.w0_value);

  lapa::PrivacyLedger ledger;
  ledger.eps_total = cfg.privacy.eps_total;
  ledger.delta_dp = cfg.privacy.delta_dp;
  ledger.planned_rounds = T;

  lapa::GradientHistory history;
  lapa::AngleState angle_state(K);
  lapa::PidConfig pid_cfg;
  pid_cfg.k_p = cfg.lapa.k_p;
  pid_cfg.k_s = cfg.lapa.k_s;
  pid_cfg.window = cfg.lapa.window;
  pid_cfg.random_sampling = cfg.lapa.random_sampling;

  control::NoiseSwitch noise_switch;
  const double channel_level = control::communication_noise_level(power, channel);

  std::vector<Rng> dp_rngs, chan_rngs, batch_rngs;
  for (int k = 0; k < K; ++k) {
    dp_rngs.emplace_back(Rng::derive(seed, "run.dp", k));
    chan_rngs.emplace_back(Rng::derive(seed, "run.chan", k));
    batch_rngs.emplace_back(Rng::derive(seed, "run.batch", k));
  }
  Rng pid_rng(Rng::derive(seed, "run.pid"));

  result.h_norms = channel.column_norms;
  result.amplitudes = power.amplitudes;
  result.delta_s = delta_s;
  result.sinrs = sinrs;
  result.sigma_n0 = sigma_n0;

  // Closed-form optima for gap columns (quadratic task only).
  const bool quadratic = task.kind == learner::TaskKind::kQuadratic;
  double f_star_weighted = kNan;
  double f_star_union = kNan;
  if (quadratic) {
    f_star_union = quadratic_optimum_value(task, datasets, size_weights);
    if (static_policy && weights.any_selected)
      f_star_weighted = quadratic_optimum_value(task, datasets, weights.values);
  }
  if (quadratic && static_policy && weights.any_selected) {
    const auto initial =
        losses(params, datasets, task, weights.values, size_weights);
    result.initial_gap_weighted = initial.weighted - f_star_weighted;
  }

  std::vector<double> prev_global_gradient;  // for the angle policy
  std::vector<std::vector<double>> local_grads(K), sent(K);
  std::vector<double> round_eps(K, 0.0), round_sigma(K, 0.0);

  auto fail = [&](std::string kind, std::string message, int round) {
    result.failure = RunFailure{std::move(kind), std::move(message), round};
  };

  for (int t = 1; t <= T && !result.failure; ++t) {
    // Local gradients (exact unless a mini-batch fraction is configured).
    for (int k = 0; k < K; ++k) {
      local_grads[k] = cfg.task.batch_fraction < 1.0
                           ? learner::local_gradient_minibatch(
                                 params, datasets[k], task, k,
                                 cfg.task.batch_fraction, batch_rngs[k])
                           : learner::local_gradient(params, datasets[k], task, k);
    }

    // Privacy budgets for this round.
    double eps_round = 0.0;
    if (privacy_on) {
      if (lapa_mode) {
        const auto pid = lapa::pid_error(history, pid_cfg, t,
                                         pid_cfg.random_sampling ? &pid_rng : nullptr);
        eps_round = lapa::round_budget(pid.value, ledger, t);
        if (ledger.exhausted || eps_round <= 0.0) {
          fail("budget_exhaustion", "privacy budget exhausted", t);
          break;
        }
        ledger.record_round(eps_round);
        ledger.eps_consumed += eps_round;
        if (t == 1) {
          std::fill(round_eps.begin(), round_eps.end(), eps_round / K);
        } else {
          std::vector<double> contribs(K);
          for (int k = 0; k < K; ++k)
            contribs[k] = lapa::contribution(angle_state.smoothed[k], cfg.lapa.beta);
          round_eps = lapa::device_budgets(contribs, eps_round);
        }
        ledger.record_devices(round_eps);
      } else {  // uniform
        eps_round = cfg.privacy.eps_total / T;
        ledger.record_round(eps_round);
        ledger.eps_consumed += eps_round;
        std::fill(round_eps.begin(), round_eps.end(), eps_round / K);
        ledger.record_devices(round_eps);
      }
      for (int k = 0; k < K; ++k) {
        const double eff = lapa::clamp_epsilon(round_eps[k], cfg.privacy.eps_floor);
        round_sigma[k] = privacy::gaussian_sigma(delta_s[k], eff, mechanism.delta_dp);
      }
      result.eps_effective.push_back([&] {
        std::vector<double> eff(K);
        for (int k = 0; k < K; ++k)
          eff[k] = lapa::clamp_epsilon(round_eps[k], cfg.privacy.eps_floor);
        return eff;
      }());
    }

    // Dynamic noise control: observe levels, then decide this round's mode.
    bool artificial = privacy_on;
    if (privacy_on && cfg.control.dynamic) {
      const double art_level =
          std::accumulate(round_sigma.begin(), round_sigma.end(), 0.0);
      noise_switch.observe(t, art_level, channel_level);
      artificial = noise_switch.artificial_active(t);
    }

    // Clip, perturb, transmit.
    for (int k = 0; k < K; ++k) {
      sent[k] = privacy_on
                    ? learner::clip_gradient(local_grads[k], cfg.privacy.clip_bound)
                    : local_grads[k];
      if (privacy_on &&
          kernels::norm(sent[k]) > cfg.privacy.clip_bound * (1.0 + 1e-9))
        throw std::logic_error("clipped gradient exceeds the clip bound");
      if (artificial)
        privacy::add_dp_noise_inplace(sent[k], round_sigma[k], dp_rngs[k]);
      if (sigma_n0 > 0.0)
        sent[k] = wireless::transmit(sent[k], k, power, channel, chan_rngs[k]);
    }

    // Aggregation weights for this round.
    aggregation::AggregationWeights round_weights;
    if (static_policy) {
      round_weights = weights;
    } else {
      std::vector<double> angles(K, 1.5707963267948966);
      if (!prev_global_gradient.empty()) {
        for (int k = 0; k < K; ++k)
          angles[k] = lapa::gradient_angle(prev_global_gradient, sent[k]).angle;
        round_weights = aggregation::compute_weights(pmfs, gpmf, sizes, sinrs,
                                                     cfg.weights, angles);
      } else {
        // Round 1 falls back to size-proportional weights.
        auto fallback = cfg.weights;
        fallback.policy = aggregation::WeightPolicy::kFedAvg;
        round_weights =
            aggregation::compute_weights(pmfs, gpmf, sizes, sinrs, fallback);
      }
    }
    if (!round_weights.any_selected) {
      fail("empty_selection", "no device passed the SINR threshold", t);
      break;
    }

    const auto global_gradient = aggregation::aggregate(sent, round_weights);
    aggregation::global_update(params, global_gradient, cfg.task.learning_rate);

    // Bookkeeping: history, angles, dissimilarity, losses, trace.
    const double grad_norm = kernels::norm(global_gradient);
    history.append(grad_norm);
    {
      std::vector<double> angles(K);
      for (int k = 0; k < K; ++k)
        angles[k] = lapa::gradient_angle(global_gradient, sent[k]).angle;
      angle_state.update(angles, t);
    }
    {
      std::vector<double> true_global(params.w.size(), 0.0);
      for (int k = 0; k < K; ++k)
        kernels::axpy(round_weights.values[k], local_grads[k], true_global);
      const auto est = control::estimate_delta(local_grads, true_global,
                                               round_weights.values);
      if (est.valid) {
        result.delta_max = result.delta_valid
                               ? std::max(result.delta_max, est.value)
                               : est.value;
        result.delta_valid = true;
      }
    }
    prev_global_gradient = global_gradient;

    const auto loss =
        losses(params, datasets, task, round_weights.values, size_weights);
    if (!std::isfinite(loss.weighted) || !std::isfinite(grad_norm)) {
      fail("non_finite_loss", "training diverged to a non-finite value", t);
      break;
    }

    trace::RoundTrace row;
    row.t = t;
    row.loss_weighted = loss.weighted;
    row.loss_union = loss.uni;
    row.gap_weighted =
        quadratic && !std::isnan(f_star_weighted) && static_policy
            ? loss.weighted - f_star_weighted
            : kNan;
    row.gap_union = quadratic ? loss.uni - f_star_union : kNan;
    row.grad_norm = grad_norm;
    row.eps_round = eps_round;
    row.noise_mode = artificial ? 1 : 0;
    row.t_th = noise_switch.t_th().value_or(-1);
    row.selected_count = static_cast<int>(round_weights.selected_count());
    row.eps_device = round_eps;
    row.sigma_device = round_sigma;
    row.weight_device = round_weights.values;
    row.sinr_device = sinrs;
    if (!privacy_on) {
      std::fill(row.eps_device.begin(), row.eps_device.end(), 0.0);
      std::fill(row.sigma_device.begin(), row.sigma_device.end(), 0.0);
      row.eps_round = 0.0;
    }
    result.traces.push_back(std::move(row));
    result.static_weights = round_weights.values;
  }

  if (privacy_on && !ledger.check_invariants())
    throw std::logic_error("privacy ledger invariants violated");
  if (privacy_on) privacy::composed_epsilon(ledger);  // throws on violation

  result.final_params = params;
  result.ledger = std::move(ledger);
  if (privacy_on && cfg.control.dynamic) {
    result.t_th = noise_switch.t_th_or(T);
  } else if (privacy_on) {
    result.t_th = T;  // artificial noise the whole run
  } else {
    result.t_th = 0;
  }
  if (!result.traces.empty()) {
    const auto& last = result.traces.back();
    result.final_loss_weighted = last.loss_weighted;
    result.final_loss_union = last.loss_union;
    result.final_gap_weighted = last.gap_weighted;
    result.final_gap_union = last.gap_union;
  }
  return result;
}

control::BoundInputs build_bound_inputs(const config::ExperimentConfig& cfg,
                                        const RunResult& run,
                                        std::optional<double> delta_override) {
  const auto datasets = datagen::generate_partition(cfg.partition);
  learner::TaskSpec task;
  if (cfg.task.kind == learner::TaskKind::kQuadratic) {
    task = learner::make_quadratic_task(cfg.partition, datasets, cfg.task.quadratic);
    task.l2_reg = cfg.task.l2_reg;
  } else {
    task.kind = learner::TaskKind::kLogistic;
    task.feature_dim = cfg.partition.feature_dim;
    task.class_count = cfg.partition.class_count;
    task.l2_reg = cfg.task.l2_reg;
  }
  const auto [mu, l_smooth] = learner::task_constants(task, datasets);

  control::BoundInputs in;
  in.mu = mu;
  in.l_smooth = l_smooth;
  in.learning_rate = cfg.task.learning_rate;
  in.delta = delta_override.value_or(run.delta_max);
  in.delta_dp = cfg.privacy.delta_dp;
  in.sigma_n0 = run.sigma_n0;
  in.weights = run.static_weights;
  in.h_norms = run.h_norms;
  in.powers = run.amplitudes;
  in.delta_s = run.delta_s;
  in.total_rounds = cfg.rounds;
  const std::size_t art_rounds = std::min<std::size_t>(
      run.eps_effective.size(), static_cast<std::size_t>(std::max(run.t_th, 0)));
  in.eps_artificial.assign(run.eps_effective.begin(),
                           run.eps_effective.begin() + art_rounds);
  return in;
}

ddpg::PowerEnvConfig build_power_env(const config::ExperimentConfig& cfg,
                                     const RunResult& reference) {
  if (reference.eps_effective.empty())
    throw std::invalid_argument(
        "power env needs a privacy-enabled reference run");
  ddpg::PowerEnvConfig env;
  env.h_norms = reference.h_norms;
  env.sigma_n0 = reference.sigma_n0;
  env.p_min_total = cfg.power.p_min_total;
  env.p_max_total = cfg.power.p_max_total;
  env.weights = reference.static_weights;
  env.delta_s = reference.delta_s;
  env.delta_dp = cfg.privacy.delta_dp;
  env.total_rounds = cfg.rounds;
  env.eps_schedule = reference.eps_effective;

  const auto datasets = datagen::generate_partition(cfg.partition);
  learner::TaskSpec task;
  if (cfg.task.kind == learner::TaskKind::kQuadratic) {
    task = learner::make_quadratic_task(cfg.partition, datasets, cfg.task.quadratic);
    task.l2_reg = cfg.task.l2_reg;
  } else {
    task.kind = learner::TaskKind::kLogistic;
    task.feature_dim = cfg.partition.feature_dim;
    task.class_count = cfg.partition.class_count;
    task.l2_reg = cfg.task.l2_reg;
  }
  const auto [mu, l_smooth] = learner::task_constants(task, datasets);
  env.contraction = control::contraction_factor(
      mu, l_smooth, cfg.task.learning_rate,
      reference.delta_valid ? reference.delta_max : 1.0,
      reference.static_weights);
  if (env.contraction >= 1.0)
    throw std::invalid_argument(
        "reference run sits in the divergence regime (A >= 1); reduce the "
        "learning rate");

  if (cfg.ddpg.live) {
    // Live mode re-runs the full FL loop per candidate allocation.
    auto base_cfg = cfg;
    const std::uint64_t ref_seed = cfg.ddpg.reference_seed;
    env.live_schedule =
        [base_cfg, ref_seed](const wireless::PowerAllocation& p)
        -> std::vector<std::vector<double>> {
      auto probe = base_cfg;
      probe.power.mode = config::PowerConfig::Mode::kExplicit;
      probe.power.amplitudes = p.amplitudes;
      const auto run = run_simulation(probe, ref_seed);
      return run.eps_effective;
    };
  }
  return env;
}

std::string write_run_outputs(const std::string& out_dir,
                              const std::string& cell_name,
                              const nlohmann::json& cell_document,
                              std::uint64_t seed, const RunResult& run) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string base = cell_name + "_seed" + std::to_string(seed);
  const fs::path csv_path = fs::path(out_dir) / (base + ".csv");
  {
    std::ofstream csv(csv_path);
    trace::write_csv(csv, run.traces, run.h_norms.size());
  }
  nlohmann::json manifest;
  manifest["tool"] = "fedsim";
  manifest["version"] = "0.1.0";
  manifest["cell"] = cell_name;
  manifest["seed"] = seed;
  manifest["config_hash"] = config::document_hash(cell_document);
  manifest["provenance"] = "fedsim-0.1.0+" + config::document_hash(cell_document);
  manifest["trace"] = csv_path.filename().string();
  manifest["rounds"] = run.traces.size();
  manifest["t_th"] = run.t_th;
  if (run.failure) {
    manifest["failure"] = {{"kind", run.failure->kind},
                           {"message", run.failure->message},
                           {"round", run.failure->round}};
  } else {
    manifest["failure"] = nullptr;
  }
  std::ofstream mf(fs::path(out_dir) / (base + ".json"));
  mf << manifest.dump(2) << '\n';
  return csv_path.string();
}

namespace {

// Bound-vs-measured entry for cells where the bound is defined: quadratic
// task, a static weight policy (fixed G), privacy enabled, all runs clean.
void attach_bound_comparison(const config::ExperimentConfig& cfg,
                             CellStats& stats) {
  if (cfg.task.kind != learner::TaskKind::kQuadratic) return;
  if (cfg.weights.policy == aggregation::WeightPolicy::kAngle) return;
  if (cfg.privacy.mode == config::PrivacyMode::kNone) return;
  if (stats.failures > 0 || stats.runs.empty()) return;
  double shared_delta = 1.0;
  for (const auto& run : stats.runs)
    if (run.delta_valid) shared_delta = std::max(shared_delta, run.delta_max);
  double mean_bound = 0.0;
  bool divergent = false;
  for (const auto& run : stats.runs) {
    const auto inputs = build_bound_inputs(cfg, run, shared_delta);
    const auto bound = control::convergence_bound(inputs, run.initial_gap_weighted);
    divergent = divergent || bound.divergent;
    mean_bound += bound.total / stats.runs.size();
  }
  stats.bound_available = true;
  stats.bound_divergent = divergent;
  stats.mean_bound_total = mean_bound;
  stats.bound_holds =
      !divergent && stats.mean_final_gap_weighted <= mean_bound;
}

void accumulate_stats(CellStats& stats) {
  std::vector<double> lw, lu, gw, gu, tth;
  for (const auto& run : stats.runs) {
    if (!run.ok()) {
      ++stats.failures;
      continue;
    }
    lw.push_back(run.final_loss_weighted);
    lu.push_back(run.final_loss_union);
    if (!std::isnan(run.final_gap_weighted)) gw.push_back(run.final_gap_weighted);
    if (!std::isnan(run.final_gap_union)) gu.push_back(run.final_gap_union);
    tth.push_back(static_cast<double>(run.t_th));
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? kNan
                     : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  auto stdev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1));
  };
  stats.mean_final_loss_weighted = mean(lw);
  stats.std_final_loss_weighted = stdev(lw);
  stats.mean_final_loss_union = mean(lu);
  stats.mean_final_gap_weighted = mean(gw);
  stats.std_final_gap_weighted = stdev(gw);
  stats.mean_final_gap_union = mean(gu);
  stats.mean_t_th = mean(tth);
}

}  // namespace

std::vector<CellStats> run_suite(const nlohmann::json& base_config,
                                 const SuiteOptions& options) {
  auto cells = config::expand_cells(base_config);
  if (!options.cell_filter.empty()) {
    std::erase_if(cells, [&](const config::SuiteCell& c) {
      return c.name != options.cell_filter;
    });
    if (cells.empty())
      throw std::invalid_argument("no suite cell named '" + options.cell_filter +
                                  "'");
  }

  struct Job {
    std::size_t cell_index;
    std::size_t run_index;
    std::uint64_t seed;
  };
  std::vector<CellStats> stats(cells.size());
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    stats[c].name = cells[c].name;
    stats[c].seeds = static_cast<int>(cells[c].config.seeds.size());
    stats[c].runs.resize(cells[c].config.seeds.size());
    for (std::size_t s = 0; s < cells[c].config.seeds.size(); ++s)
      jobs.push_back({c, s, cells[c].config.seeds[s]});
  }

  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, options.threads);
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      auto& slot = stats[job.cell_index].runs[job.run_index];
      slot = run_simulation(cells[job.cell_index].config, job.seed);
      if (!options.out_dir.empty()) {
        write_run_outputs(options.out_dir, cells[job.cell_index].name,
                          cells[job.cell_index].document, job.seed, slot);
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < stats.size(); ++c) {
    accumulate_stats(stats[c]);
    attach_bound_comparison(cells[c].config, stats[c]);
    if (!options.keep_runs) stats[c].runs.clear();
  }
  return stats;
}

}  // namespace fedsim::sim
