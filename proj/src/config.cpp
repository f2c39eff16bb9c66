#include "fedsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: " + path + ": " + what);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

datagen::PartitionSpec parse_partition(const json& j) {
  datagen::PartitionSpec p;
  p.device_count = get_or(j, "devices", 15);
  p.class_count = get_or(j, "classes", 5);
  p.iid_count = get_or(j, "iid_devices", 3);
  p.labels_per_noniid_device = get_or(j, "labels_per_noniid_device", 1);
  p.feature_dim = get_or(j, "feature_dim", 8);
  p.cluster_sep = get_or(j, "cluster_sep", 3.0);
  p.feature_noise = get_or(j, "feature_noise", 1.0);
  p.seed = get_or<std::uint64_t>(j, "seed", 42);
  p.center_seed = get_or<std::uint64_t>(j, "center_seed", 0);
  if (j.contains("sizes")) {
    p.sizes = j.at("sizes").get<std::vector<std::size_t>>();
  } else {
    p.sizes.assign(p.device_count, get_or<std::size_t>(j, "size", 120));
  }
  return p;
}

TaskConfig parse_task(const json& j) {
  TaskConfig t;
  const std::string kind = get_or<std::string>(j, "kind", "logistic");
  if (kind == "logistic") {
    t.kind = learner::TaskKind::kLogistic;
  } else if (kind == "quadratic") {
    t.kind = learner::TaskKind::kQuadratic;
  } else {
    fail("task.kind", "expected 'logistic' or 'quadratic'");
  }
  t.l2_reg = get_or(j, "l2_reg", t.kind == learner::TaskKind::kLogistic ? 0.01 : 0.0);
  t.learning_rate = get_or(j, "learning_rate", 0.05);
  t.batch_fraction = get_or(j, "batch_fraction", 1.0);
  t.w0_value = get_or(j, "w0_value", 0.0);
  t.quadratic.dim = get_or(j, "dim", 1);
  t.quadratic.mu = get_or(j, "mu", 1.0);
  t.quadratic.l_smooth = get_or(j, "L", 4.0);
  t.quadratic.anchor_scale = get_or(j, "anchor_scale", 1.0);
  t.quadratic.jitter = get_or(j, "jitter", 0.0);
  t.quadratic.seed = get_or<std::uint64_t>(j, "seed", 7);
  return t;
}

GeometryConfig parse_geometry(const json& j) {
  GeometryConfig g;
  if (j.contains("bs")) {
    const auto v = j.at("bs").get<std::vector<double>>();
    if (v.size() != 3) fail("geometry.bs", "expected [x, y, z]");
    g.bs_position = {v[0], v[1], v[2]};
  }
  g.bs_gain_dbi = get_or(j, "bs_gain_dbi", 5.0);
  g.device_gain_dbi = get_or(j, "device_gain_dbi", 0.0);
  g.carrier_hz = get_or(j, "carrier_hz", 915e6);
  g.path_exponent = get_or(j, "path_exponent", 3.76);
  g.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("positions")) {
    for (const auto& p : j.at("positions")) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 3) fail("geometry.positions", "expected [x, y, z] rows");
      g.positions.push_back({v[0], v[1], v[2]});
    }
  } else if (j.contains("regions")) {
    for (const auto& r : j.at("regions")) {
      GeometryConfig::Region region;
      region.count = r.at("count").get<int>();
      const auto x = r.at("x").get<std::vector<double>>();
      const auto y = r.at("y").get<std::vector<double>>();
      if (x.size() != 2 || y.size() != 2)
        fail("geometry.regions", "x/y must be [min, max]");
      region.x_min = x[0];
      region.x_max = x[1];
      region.y_min = y[0];
      region.y_max = y[1];
      region.z = get_or(r, "z", 0.0);
      g.regions.push_back(region);
    }
  }
  return g;
}

ChannelConfig parse_channel(const json& j) {
  ChannelConfig c;
  c.antennas = get_or<std::size_t>(j, "antennas", 15);
  c.noise_power_w = get_or(j, "noise_power_w", 1e-3);
  c.sinr_cap = get_or(j, "sinr_cap", 1e12);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

PowerConfig parse_power(const json& j) {
  PowerConfig p;
  p.p_min_total = get_or(j, "p_min_total", 1e10);
  p.p_max_total = get_or(j, "p_max_total", 4e11);
  const std::string mode = get_or<std::string>(j, "mode", "equal_total");
  if (mode == "equal_total") {
    p.mode = PowerConfig::Mode::kEqualTotal;
    p.total = get_or(j, "total", 0.0);
  } else if (mode == "explicit") {
    p.mode = PowerConfig::Mode::kExplicit;
    p.amplitudes = j.at("amplitudes").get<std::vector<double>>();
  } else {
    fail("power.mode", "expected 'equal_total' or 'explicit'");
  }
  return p;
}

PrivacyConfig parse_privacy(const json& j) {
  PrivacyConfig p;
  const std::string mode = get_or<std::string>(j, "mode", "lapa");
  if (mode == "none") {
    p.mode = PrivacyMode::kNone;
  } else if (mode == "uniform") {
    p.mode = PrivacyMode::kUniform;
  } else if (mode == "lapa") {
    p.mode = PrivacyMode::kLapa;
  } else {
    fail("privacy.mode", "expected 'none', 'uniform' or 'lapa'");
  }
  p.eps_total = get_or(j, "eps_total", 10.0);
  p.delta_dp = get_or(j, "delta_dp", 0.01);
  p.clip_bound = get_or(j, "clip_bound", 1.0);
  p.eps_floor = get_or(j, "eps_floor", 1e-4);
  return p;
}

LapaConfig parse_lapa(const json& j) {
  LapaConfig l;
  l.k_p = get_or(j, "k_p", 1.0);
  l.k_s = get_or(j, "k_s", 0.5);
  l.window = get_or(j, "window", 5);
  l.beta = get_or(j, "beta", 1.0);
  l.random_sampling = get_or(j, "random_sampling", false);
  return l;
}

aggregation::WeightConfig parse_weights(const json& j) {
  aggregation::WeightConfig w;
  const std::string policy = get_or<std::string>(j, "policy", "wasserstein");
  if (policy == "wasserstein") {
    w.policy = aggregation::WeightPolicy::kWasserstein;
  } else if (policy == "fedavg") {
    w.policy = aggregation::WeightPolicy::kFedAvg;
  } else if (policy == "angle") {
    w.policy = aggregation::WeightPolicy::kAngle;
  } else {
    fail("weights.policy", "expected 'wasserstein', 'fedavg' or 'angle'");
  }
  if (j.contains("ser_preset")) {
    w.gamma_th = aggregation::ser_to_gamma_th(j.at("ser_preset").get<double>());
  } else {
    w.gamma_th = get_or(j, "gamma_th", 0.0);
  }
  w.w_floor = get_or(j, "w_floor", 1e-3);
  return w;
}

DdpgConfig parse_ddpg(const json& j) {
  DdpgConfig d;
  d.agent.discount = get_or(j, "discount", 0.99);
  d.agent.tau = get_or(j, "tau", 0.001);
  d.agent.batch_size = get_or<std::size_t>(j, "batch_size", 64);
  d.agent.buffer_capacity = get_or<std::size_t>(j, "buffer_capacity", 10000);
  d.agent.explore_std_start = get_or(j, "explore_std_start", 0.2);
  d.agent.explore_std_end = get_or(j, "explore_std_end", 0.02);
  d.agent.episodes = get_or(j, "episodes", 25);
  d.agent.steps_per_episode = get_or(j, "steps_per_episode", 40);
  d.agent.actor_lr = get_or(j, "actor_lr", 1e-3);
  d.agent.critic_lr = get_or(j, "critic_lr", 1e-3);
  if (j.contains("hidden"))
    d.agent.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  d.reference_seed = get_or<std::uint64_t>(j, "reference_seed", 1);
  d.live = get_or(j, "live", false);
  return d;
}

}  // namespace

void ExperimentConfig::validate() const {
  partition.validate();
  const int K = partition.device_count;
  if (rounds < 1) fail("rounds", "must be >= 1");
  if (seeds.empty()) fail("seeds", "must list at least one seed");
  if (task.learning_rate <= 0) fail("task.learning_rate", "must be > 0");
  if (task.batch_fraction <= 0 || task.batch_fraction > 1)
    fail("task.batch_fraction", "must be in (0, 1]");
  if (task.kind == learner::TaskKind::kLogistic && task.l2_reg < 0)
    fail("task.l2_reg", "must be >= 0");
  int geometry_count = 0;
  if (!geometry.positions.empty()) {
    geometry_count = static_cast<int>(geometry.positions.size());
  } else {
    for (const auto& r : geometry.regions) geometry_count += r.count;
  }
  if (geometry_count != K)
    fail("geometry", "device positions (" + std::to_string(geometry_count) +
                         ") must match partition.devices (" + std::to_string(K) +
                         ")");
  if (channel.antennas < 1) fail("channel.antennas", "must be >= 1");
  if (channel.noise_power_w < 0) fail("channel.noise_power_w", "must be >= 0");
  if (power.p_min_total < 0 || power.p_max_total < power.p_min_total)
    fail("power", "requires 0 <= p_min_total <= p_max_total");
  if (power.mode == PowerConfig::Mode::kExplicit &&
      power.amplitudes.size() != static_cast<std::size_t>(K))
    fail("power.amplitudes", "must list one amplitude per device");
  if (privacy.mode != PrivacyMode::kNone) {
    if (privacy.eps_total <= 0) fail("privacy.eps_total", "must be > 0");
    if (privacy.delta_dp <= 0 || privacy.delta_dp >= 1)
      fail("privacy.delta_dp", "must be in (0, 1)");
    if (privacy.clip_bound <= 0) fail("privacy.clip_bound", "must be > 0");
  }
  if (lapa.window < 1) fail("lapa.window", "must be >= 1");
  if (lapa.k_p < 0 || lapa.k_s < 0) fail("lapa", "k_p and k_s must be >= 0");
  if (lapa.beta <= 0) fail("lapa.beta", "must be > 0");
  if (weights.gamma_th < 0) fail("weights.gamma_th", "must be >= 0");
  if (weights.w_floor <= 0) fail("weights.w_floor", "must be > 0");
}

ExperimentConfig parse(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.name = get_or<std::string>(j, "name", "experiment");
  cfg.rounds = get_or(j, "rounds", 50);
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("partition")) cfg.partition = parse_partition(j.at("partition"));
  else cfg.partition = parse_partition(nlohmann::json::object());
  if (j.contains("task")) cfg.task = parse_task(j.at("task"));
  if (j.contains("geometry")) cfg.geometry = parse_geometry(j.at("geometry"));
  if (j.contains("channel")) cfg.channel = parse_channel(j.at("channel"));
  if (j.contains("power")) cfg.power = parse_power(j.at("power"));
  if (j.contains("privacy")) cfg.privacy = parse_privacy(j.at("privacy"));
  if (j.contains("lapa")) cfg.lapa = parse_lapa(j.at("lapa"));
  if (j.contains("weights")) cfg.weights = parse_weights(j.at("weights"));
  if (j.contains("control"))
    cfg.control.dynamic = get_or(j.at("control"), "dynamic", false);
  if (j.contains("ddpg")) cfg.ddpg = parse_ddpg(j.at("ddpg"));

  // Default geometry: the two-region layout when nothing else is given.
  if (cfg.geometry.positions.empty() && cfg.geometry.regions.empty()) {
    const int K = cfg.partition.device_count;
    const int first = std::min(7, K);
    GeometryConfig::Region r1{first, -10.0, 0.0, -5.0, 5.0, 0.0};
    cfg.geometry.regions.push_back(r1);
    if (K > first) {
      GeometryConfig::Region r2{K - first, 10.0, 20.0, -5.0, 5.0, 0.0};
      cfg.geometry.regions.push_back(r2);
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return parse(j);
}

std::vector<SuiteCell> expand_cells(const nlohmann::json& base) {
  std::vector<SuiteCell> cells;
  nlohmann::json stripped = base;
  stripped.erase("cells");
  if (!base.contains("cells") || base.at("cells").empty()) {
    SuiteCell cell;
    cell.document = stripped;
    cell.config = parse(stripped);
    cell.name = cell.config.name;
    cells.push_back(std::move(cell));
    return cells;
  }
  for (const auto& patch : base.at("cells")) {
    if (!patch.contains("name"))
      throw std::invalid_argument("config: every cell needs a name");
    SuiteCell cell;
    cell.name = patch.at("name").get<std::string>();
    nlohmann::json merged = stripped;
    nlohmann::json body = patch;
    body.erase("name");
    merged.merge_patch(body);
    cell.document = merged;
    cell.config = parse(merged);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string document_hash(const nlohmann::json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

wireless::Geometry build_geometry(const GeometryConfig& cfg, int device_count) {
  wireless::Geometry g;
  g.bs_position = cfg.bs_position;
  g.bs_gain_dbi = cfg.bs_gain_dbi;
  g.device_gain_dbi = cfg.device_gain_dbi;
  g.carrier_hz = cfg.carrier_hz;
  g.path_exponent = cfg.path_exponent;
  if (!cfg.positions.empty()) {
    g.device_positions = cfg.positions;
  } else {
    Rng rng(Rng::derive(cfg.seed, "geometry.placement"));
    for (const auto& r : cfg.regions) {
      for (int i = 0; i < r.count; ++i) {
        g.device_positions.push_back({rng.uniform(r.x_min, r.x_max),
                                      rng.uniform(r.y_min, r.y_max), r.z});
      }
    }
  }
  if (g.device_positions.size() != static_cast<std::size_t>(device_count))
    throw std::invalid_argument("geometry produced wrong device count");
  return g;
}

}  // namespace fedsim::config
