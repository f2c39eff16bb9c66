#pragma once
// End-to-end seeded FL runs: local gradients -> clipping -> LAPA budgets ->
// DP noise (while artificial injection is active) -> wireless transmission
// -> weighted aggregation -> global step, with ledger and trace recording.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/control.hpp"
#include "fedsim/ddpg.hpp"
#include "fedsim/lapa.hpp"
#include "fedsim/trace.hpp"

namespace fedsim::sim {

struct RunFailure {
  std::string kind;  // "budget_exhaustion" | "empty_selection" | "non_finite_loss"
  std::string message;
  int round = 0;
};

struct RunResult {
  std::vector<trace::RoundTrace> traces;
  learner::ModelParams final_params;
  lapa::PrivacyLedger ledger;
  std::optional<RunFailure> failure;

  // Effective (clamped) per-device budgets actually used for noise, one row
  // per round with privacy enabled.
  std::vector<std::vector<double>> eps_effective;
  int t_th = 0;             // final convention: T when never switched
  double delta_max = 1.0;   // max estimated local dissimilarity over rounds
  bool delta_valid = false;

  // Frozen physics of the run, for bound evaluation and the RL environment.
  std::vector<double> h_norms;
  std::vector<double> amplitudes;
  std::vector<double> static_weights;  // weights of the last round
  std::vector<double> delta_s;
  std::vector<double> sinrs;
  double sigma_n0 = 0.0;

  double initial_gap_weighted = 0.0;  // quadratic task only
  double final_loss_weighted = 0.0;
  double final_loss_union = 0.0;
  double final_gap_weighted = 0.0;
  double final_gap_union = 0.0;

  bool ok() const { return !failure.has_value(); }
};

RunResult run_simulation(const config::ExperimentConfig& cfg,
                         std::uint64_t seed);

// Convergence-bound inputs from a finished run; mu/L from task_constants,
// delta from the run estimate (or an override).
control::BoundInputs build_bound_inputs(const config::ExperimentConfig& cfg,
                                        const RunResult& run,
                                        std::optional<double> delta_override = {});

// Frozen-trajectory power environment from a reference run.
ddpg::PowerEnvConfig build_power_env(const config::ExperimentConfig& cfg,
                                     const RunResult& reference);

struct CellStats {
  std::string name;
  int seeds = 0;
  int failures = 0;
  double mean_final_loss_weighted = 0.0;
  double std_final_loss_weighted = 0.0;
  double mean_final_loss_union = 0.0;
  double mean_final_gap_weighted = 0.0;
  double std_final_gap_weighted = 0.0;
  double mean_final_gap_union = 0.0;
  double mean_t_th = 0.0;
  // Bound-vs-measured (quadratic task with a static weight policy): mean
  // bound total at the final round next to the mean measured gap.
  bool bound_available = false;
  bool bound_divergent = false;
  double mean_bound_total = 0.0;
  bool bound_holds = false;
  std::vector<RunResult> runs;  // in seed order
};

struct SuiteOptions {
  int threads = 2;
  std::string out_dir;          // empty: no files written
  std::string cell_filter;      // empty: all cells
  bool keep_runs = true;        // retain per-run results in CellStats
};

std::vector<CellStats> run_suite(const nlohmann::json& base_config,
                                 const SuiteOptions& options);

// Writes <out_dir>/<cell>_seed<seed>.csv and the run manifest JSON next to
// it; returns the CSV path.
std::string write_run_outputs(const std::string& out_dir,
                              const std::string& cell_name,
                              const nlohmann::json& cell_document,
                              std::uint64_t seed, const RunResult& run);

}  // namespace fedsim::sim
