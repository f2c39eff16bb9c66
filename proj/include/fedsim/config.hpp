#pragma once
// Experiment configuration: a single JSON document with nested sections.
// Suite cells are merge patches (RFC 7386) applied to the base document.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/aggregation.hpp"
#include "fedsim/datagen.hpp"
#include "fedsim/ddpg.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/wireless.hpp"

namespace fedsim::config {

struct TaskConfig {
  learner::TaskKind kind = learner::TaskKind::kLogistic;
  double l2_reg = 0.01;
  double learning_rate = 0.05;
  double batch_fraction = 1.0;
  // Quadratic-task knobs.
  learner::QuadraticTaskConfig quadratic;
  // Initial model: w0 = w0_value in every coordinate.
  double w0_value = 0.0;
};

struct GeometryConfig {
  std::array<double, 3> bs_position{-50.0, 0.0, 10.0};
  struct Region {
    int count = 0;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0, z = 0.0;
  };
  std::vector<Region> regions;  // sampled placement
  std::vector<std::array<double, 3>> positions;  // explicit placement
  double bs_gain_dbi = 5.0;
  double device_gain_dbi = 0.0;
  double carrier_hz = 915e6;
  double path_exponent = 3.76;
  std::uint64_t seed = 1;
};

struct ChannelConfig {
  std::size_t antennas = 15;
  double noise_power_w = 1e-3;  // sigma_n0^2
  double sinr_cap = 1e12;
  // When set, the fading realization is fixed across run seeds; otherwise it
  // is derived from each run seed (block fading either way).
  std::optional<std::uint64_t> seed;
};

struct PowerConfig {
  enum class Mode { kEqualTotal, kExplicit };
  Mode mode = Mode::kEqualTotal;
  double total = 0.0;  // sum of p_k^2 for kEqualTotal (0 -> p_max/2)
  std::vector<double> amplitudes;  // kExplicit
  double p_min_total = 1e10;
  double p_max_total = 4e11;
};

enum class PrivacyMode { kNone, kUniform, kLapa };

struct PrivacyConfig {
  PrivacyMode mode = PrivacyMode::kLapa;
  double eps_total = 10.0;
  double delta_dp = 0.01;
  double clip_bound = 1.0;
  double eps_floor = 1e-4;
};

struct LapaConfig {
  double k_p = 1.0;
  double k_s = 0.5;
  int window = 5;
  double beta = 1.0;
  bool random_sampling = false;
};

struct ControlConfig {
  bool dynamic = false;  // Eq.-23 switching on/off
};

struct DdpgConfig {
  ddpg::AgentConfig agent;
  std::uint64_t reference_seed = 1;  // seed of the frozen reference run
  bool live = false;                 // re-run FL per env step
};

struct ExperimentConfig {
  std::string name = "experiment";
  int rounds = 50;
  std::vector<std::uint64_t> seeds = {1};
  datagen::PartitionSpec partition;
  TaskConfig task;
  GeometryConfig geometry;
  ChannelConfig channel;
  PowerConfig power;
  PrivacyConfig privacy;
  LapaConfig lapa;
  aggregation::WeightConfig weights;
  ControlConfig control;
  DdpgConfig ddpg;

  void validate() const;  // throws std::invalid_argument with a field path
};

// Parse/serialize. parse() applies defaults, then validates.
ExperimentConfig parse(const nlohmann::json& j);
ExperimentConfig load_file(const std::string& path);

// Named suite cells: each entry of j["cells"] is a merge patch with a
// mandatory "name". A config without cells yields one cell named after the
// experiment.
struct SuiteCell {
  std::string name;
  nlohmann::json document;  // fully merged config JSON
  ExperimentConfig config;
};
std::vector<SuiteCell> expand_cells(const nlohmann::json& base);

// FNV-1a over the canonical dump; stable across runs.
std::string document_hash(const nlohmann::json& j);

// Geometry -> concrete device positions (samples regions if needed).
wireless::Geometry build_geometry(const GeometryConfig& cfg, int device_count);

}  // namespace fedsim::config
