// fedsim: experiment runner for the DP federated-learning-over-wireless
// simulator. Subcommands: simulate, suite, optimize, bound,
// partition-report. All failures exit nonzero with an error JSON on stdout.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/aggregation.hpp"
#include "fedsim/simulation.hpp"
#include "fedsim/trace.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

int fail_with_json(const std::string& type, const std::string& message) {
  json err;
  err["error"] = {{"type", type}, {"message", message}};
  std::cout << err.dump(2) << std::endl;
  return 1;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 bool seed_given, const std::string& out_dir) {
  const json doc = load_json(config_path);
  auto cfg = fedsim::config::parse(doc);
  const std::uint64_t use_seed = seed_given ? seed : cfg.seeds.front();
  const auto run = fedsim::sim::run_simulation(cfg, use_seed);
  const std::string csv = fedsim::sim::write_run_outputs(
      out_dir.empty() ? "." : out_dir, cfg.name, doc, use_seed, run);
  if (!run.ok())
    return fail_with_json(run.failure->kind,
                          run.failure->message + " (round " +
                              std::to_string(run.failure->round) + ")");
  std::cout << "wrote " << csv << " (" << run.traces.size()
            << " rounds, final weighted loss "
            << fedsim::trace::format_double(run.final_loss_weighted)
            << ", t_th " << run.t_th << ")\n";
  return 0;
}

int cmd_suite(const std::string& config_path, const std::string& out_dir,
              int threads, const std::string& cell) {
  const json doc = load_json(config_path);
  fedsim::sim::SuiteOptions opts;
  opts.threads = threads;
  opts.out_dir = out_dir;
  opts.cell_filter = cell;
  opts.keep_runs = false;
  const auto stats = fedsim::sim::run_suite(doc, opts);

  json summary = json::array();
  for (const auto& s : stats) {
    json row;
    row["cell"] = s.name;
    row["seeds"] = s.seeds;
    row["failures"] = s.failures;
    row["final_loss_weighted"] = {{"mean", s.mean_final_loss_weighted},
                                  {"std", s.std_final_loss_weighted}};
    row["final_loss_union"] = {{"mean", s.mean_final_loss_union}};
    if (!std::isnan(s.mean_final_gap_weighted))
      row["final_gap_weighted"] = {{"mean", s.mean_final_gap_weighted},
                                   {"std", s.std_final_gap_weighted}};
    row["mean_t_th"] = s.mean_t_th;
    if (s.bound_available) {
      row["bound_vs_measured"] = {{"mean_bound_total", s.mean_bound_total},
                                  {"mean_measured_gap", s.mean_final_gap_weighted},
                                  {"divergent", s.bound_divergent},
                                  {"holds", s.bound_holds}};
    }
    summary.push_back(row);
  }
  std::cout << summary.dump(2) << std::endl;
  if (!out_dir.empty()) {
    std::ofstream out(std::filesystem::path(out_dir) / "suite_summary.json");
    out << summary.dump(2) << '\n';
  }
  for (const auto& s : stats)
    if (s.failures > 0)
      return fail_with_json("cell_failures",
                            "cell '" + s.name + "' had failing runs");
  return 0;
}

int cmd_bound(const std::string& config_path, std::uint64_t seed,
              bool seed_given) {
  const json doc = load_json(config_path);
  auto cfg = fedsim::config::parse(doc);
  const std::uint64_t use_seed = seed_given ? seed : cfg.seeds.front();
  const auto run = fedsim::sim::run_simulation(cfg, use_seed);
  if (!run.ok()) return fail_with_json(run.failure->kind, run.failure->message);
  const auto inputs = fedsim::sim::build_bound_inputs(cfg, run);
  const auto bound =
      fedsim::control::convergence_bound(inputs, run.initial_gap_weighted);

  json out;
  out["contraction"] = bound.contraction;
  out["divergent"] = bound.divergent;
  out["initial_term"] = bound.initial_term;
  out["channel_term"] = bound.channel_term;
  out["artificial_term"] = bound.artificial_term;
  out["total"] = bound.total;
  out["t_th"] = run.t_th;
  out["delta_estimate"] = run.delta_max;
  out["mu"] = inputs.mu;
  out["L"] = inputs.l_smooth;
  out["lambda"] = inputs.learning_rate;
  out["max_learning_rate"] = fedsim::control::max_learning_rate(
      inputs.l_smooth, inputs.delta, inputs.weights);
  out["initial_gap"] = run.initial_gap_weighted;
  out["measured_final_gap"] = run.final_gap_weighted;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_optimize(const std::string& config_path, std::uint64_t seed,
                 bool seed_given, const std::string& out_dir) {
  const json doc = load_json(config_path);
  auto cfg = fedsim::config::parse(doc);
  const std::uint64_t use_seed = seed_given ? seed : cfg.seeds.front();

  const auto reference =
      fedsim::sim::run_simulation(cfg, cfg.ddpg.reference_seed);
  if (!reference.ok())
    return fail_with_json(reference.failure->kind,
                          "reference run failed: " + reference.failure->message);
  auto env_cfg = fedsim::sim::build_power_env(cfg, reference);
  fedsim::ddpg::PowerEnv env(std::move(env_cfg));
  const auto result = fedsim::ddpg::optimize_power(env, cfg.ddpg.agent, use_seed);

  json out;
  out["best_power"] = result.best_power.amplitudes;
  out["best_total_power"] = result.best_power.total_power();
  out["best_t_th"] = result.best_t_th;
  out["best_objective"] = result.best_objective;
  out["steps"] = result.reward_trace.size();
  std::cout << out.dump(2) << std::endl;

  const std::string dir = out_dir.empty() ? "." : out_dir;
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(std::filesystem::path(dir) /
                      (cfg.name + "_rewards_seed" + std::to_string(use_seed) +
                       ".csv"));
    csv << "step,reward\n";
    for (std::size_t i = 0; i < result.reward_trace.size(); ++i)
      csv << i << ',' << fedsim::trace::format_double(result.reward_trace[i])
          << '\n';
  }
  std::ofstream jf(std::filesystem::path(dir) /
                   (cfg.name + "_best_seed" + std::to_string(use_seed) + ".json"));
  jf << out.dump(2) << '\n';
  return 0;
}

int cmd_partition_report(const std::string& config_path) {
  const json doc = load_json(config_path);
  auto cfg = fedsim::config::parse(doc);
  const auto datasets = fedsim::datagen::generate_partition(cfg.partition);
  std::vector<fedsim::datagen::LabelPmf> pmfs;
  for (const auto& ds : datasets)
    pmfs.push_back(fedsim::datagen::label_pmf(ds, cfg.partition.class_count));
  const auto gpmf =
      fedsim::datagen::global_pmf(datasets, cfg.partition.class_count);

  std::vector<double> sinrs(datasets.size(),
                            std::numeric_limits<double>::infinity());
  auto wcfg = cfg.weights;
  wcfg.policy = fedsim::aggregation::WeightPolicy::kWasserstein;
  wcfg.gamma_th = 0.0;
  const auto weights = fedsim::aggregation::compute_weights(
      pmfs, gpmf, cfg.partition.sizes, sinrs, wcfg);

  std::printf("%6s %8s %6s %12s %12s\n", "device", "size", "iid", "W_k", "G_k");
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    const double w = fedsim::aggregation::wasserstein_1d(pmfs[k], gpmf);
    std::printf("%6zu %8zu %6s %12.6f %12.6g\n", k, cfg.partition.sizes[k],
                k < static_cast<std::size_t>(cfg.partition.iid_count) ? "yes"
                                                                      : "no",
                w, weights.values[k]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic DP federated learning over a noisy uplink"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", cell;
  std::uint64_t seed = 0;
  int threads = 2;

  auto add_common = [&](CLI::App* sub, bool with_seed = true) {
    sub->add_option("--config", config_path, "config JSON path")->required();
    if (with_seed) sub->add_option("--seed", seed, "run seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "run one seeded simulation");
  add_common(simulate);
  auto* suite = app.add_subcommand("suite", "run all configured cells x seeds");
  add_common(suite, false);
  suite->add_option("--threads", threads, "worker threads");
  suite->add_option("--cell", cell, "run only this cell");
  auto* optimize =
      app.add_subcommand("optimize", "DDPG transmit-power optimization");
  add_common(optimize);
  auto* bound = app.add_subcommand("bound", "print the convergence-bound terms");
  bound->add_option("--config", config_path, "config JSON path")->required();
  bound->add_option("--seed", seed, "run seed");
  auto* report =
      app.add_subcommand("partition-report", "print the per-device W_k table");
  report->add_option("--config", config_path, "config JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return cmd_simulate(config_path, seed, simulate->count("--seed") > 0,
                          out_dir);
    if (suite->parsed()) return cmd_suite(config_path, out_dir, threads, cell);
    if (optimize->parsed())
      return cmd_optimize(config_path, seed, optimize->count("--seed") > 0,
                          out_dir);
    if (bound->parsed())
      return cmd_bound(config_path, seed, bound->count("--seed") > 0);
    if (report->parsed()) return cmd_partition_report(config_path);
  } catch (const std::invalid_argument& e) {
    return fail_with_json("config_error", e.what());
  } catch (const std::domain_error& e) {
    return fail_with_json("domain_error", e.what());
  } catch (const std::exception& e) {
    return fail_with_json("internal_error", e.what());
  }
  return 0;
}
