#include "fedsim/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsim/kernels.hpp"

namespace fedsim::ddpg {

void Mlp::Gradients::zero() {
  for (auto& g : w) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : b) std::fill(g.begin(), g.end(), 0.0);
}

Mlp Mlp::make(std::span<const std::size_t> dims, bool tanh_output, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs >= 2 dims");
  Mlp net;
  net.tanh_output_ = tanh_output;
  net.layers_.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer& layer = net.layers_[l];
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(layer.out * layer.in);
    layer.b.assign(layer.out, 0.0);
    // Xavier-style init for tanh units.
    const double scale = std::sqrt(1.0 / static_cast<double>(layer.in));
    for (double& v : layer.w) v = scale * rng.gaussian();
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> input,
                                 Workspace* ws) const {
  if (input.size() != input_dim())
    throw std::invalid_argument("mlp forward: input dim mismatch");
  if (ws) {
    ws->inputs.assign(layers_.size(), {});
    ws->preact.assign(layers_.size(), {});
  }
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (ws) ws->inputs[l] = x;
    std::vector<double> z(layer.out);
    kernels::matvec(layer.w, x, layer.b, z);
    if (ws) ws->preact[l] = z;
    const bool apply_tanh = l + 1 < layers_.size() || tanh_output_;
    if (apply_tanh)
      for (double& v : z) v = std::tanh(v);
    x = std::move(z);
  }
  return x;
}

Mlp::Gradients Mlp::make_gradients() const {
  Gradients g;
  g.w.resize(layers_.size());
  g.b.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    g.w[l].assign(layers_[l].w.size(), 0.0);
    g.b[l].assign(layers_[l].b.size(), 0.0);
  }
  return g;
}

void Mlp::backward(const Workspace& ws, std::span<const double> output_grad,
                   Gradients* grads, std::vector<double>* input_grad) const {
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const bool applied_tanh = li + 1 < layers_.size() || tanh_output_;
    if (applied_tanh) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        const double th = std::tanh(ws.preact[li][i]);
        delta[i] *= 1.0 - th * th;
      }
    }
    if (grads) {
      kernels::rank1_update(grads->w[li], 1.0, delta, ws.inputs[li]);
      for (std::size_t i = 0; i < delta.size(); ++i) grads->b[li][i] += delta[i];
    }
    if (li > 0 || input_grad) {
      std::vector<double> prev(layer.in, 0.0);
      kernels::matvec_t(layer.w, delta, prev);
      if (li == 0) {
        *input_grad = std::move(prev);
        return;
      }
      delta = std::move(prev);
    }
  }
}

void Mlp::apply_gradients(const Gradients& grads, double lr, double scale) {
  const double step = -lr * scale;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    kernels::axpy(step, grads.w[l], layers_[l].w);
    kernels::axpy(step, grads.b[l], layers_[l].b);
  }
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
  if (online.layers_.size() != layers_.size())
    throw std::invalid_argument("soft update: architecture mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (online.layers_[l].w.size() != layers_[l].w.size() ||
        online.layers_[l].b.size() != layers_[l].b.size())
      throw std::invalid_argument("soft update: layer shape mismatch");
    for (std::size_t i = 0; i < layers_[l].w.size(); ++i)
      layers_[l].w[i] = tau * online.layers_[l].w[i] + (1.0 - tau) * layers_[l].w[i];
    for (std::size_t i = 0; i < layers_[l].b.size(); ++i)
      layers_[l].b[i] = tau * online.layers_[l].b[i] + (1.0 - tau) * layers_[l].b[i];
  }
}

double Mlp::get_parameter(std::size_t index) const {
  for (const auto& l : layers_) {
    if (index < l.w.size()) return l.w[index];
    index -= l.w.size();
    if (index < l.b.size()) return l.b[index];
    index -= l.b.size();
  }
  throw std::out_of_range("mlp parameter index");
}

void Mlp::set_parameter(std::size_t index, double value) {
  for (auto& l : layers_) {
    if (index < l.w.size()) {
      l.w[index] = value;
      return;
    }
    index -= l.w.size();
    if (index < l.b.size()) {
      l.b[index] = value;
      return;
    }
    index -= l.b.size();
  }
  throw std::out_of_range("mlp parameter index");
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  ++insertions_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n,
                                                    Rng& rng) const {
  if (storage_.size() < n)
    throw std::logic_error("replay buffer smaller than batch");
  std::vector<const Transition*> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = &storage_[rng.uniform_index(storage_.size())];
  return out;
}

void AgentConfig::validate() const {
  if (discount < 0.0 || discount >= 1.0)
    throw std::invalid_argument("discount must be in [0, 1)");
  if (tau <= 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must be in (0, 1]");
  if (batch_size == 0 || buffer_capacity < batch_size)
    throw std::invalid_argument("buffer must hold at least one batch");
  if (episodes < 1 || steps_per_episode < 1)
    throw std::invalid_argument("episodes and steps must be >= 1");
}

Agent::Agent(std::size_t state_dim, std::size_t action_dim,
             const AgentConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  std::vector<std::size_t> actor_dims{state_dim};
  actor_dims.insert(actor_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_dims.push_back(action_dim);
  actor_ = Mlp::make(actor_dims, /*tanh_output=*/true, rng);

  // Critic sees [state; action] at its first hidden layer.
  std::vector<std::size_t> critic_dims{state_dim + action_dim};
  critic_dims.insert(critic_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_dims.push_back(1);
  critic_ = Mlp::make(critic_dims, /*tanh_output=*/false, rng);

  target_actor_ = actor_;
  target_critic_ = critic_;
}

std::vector<double> Agent::select_action(std::span<const double> state,
                                         double noise_std, Rng& rng) const {
  auto a = actor_.forward(state);
  if (noise_std > 0.0)
    for (double& v : a) v += rng.gaussian(noise_std);
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);
  return a;
}

namespace {
std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}
}  // namespace

double Agent::critic_value(std::span<const double> state,
                           std::span<const double> action) const {
  return critic_.forward(concat(state, action))[0];
}

std::vector<double> Agent::critic_targets(
    std::span<const Transition* const> batch) const {
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    double target = tr.reward;
    if (!tr.terminal) {
      const auto next_action = target_actor_.forward(tr.next_state);
      target += cfg_.discount *
                target_critic_.forward(concat(tr.next_state, next_action))[0];
    }
    y[i] = target;
  }
  return y;
}

double Agent::critic_update(std::span<const Transition* const> batch,
                            std::span<const double> targets) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  auto grads = critic_.make_gradients();
  Mlp::Workspace ws;
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto input = concat(batch[i]->state, batch[i]->action);
    const double q = critic_.forward(input, &ws)[0];
    const double err = q - targets[i];
    loss += err * err * inv_n;
    const double upstream[1] = {2.0 * err * inv_n};
    critic_.backward(ws, upstream, &grads, nullptr);
  }
  critic_.apply_gradients(grads, cfg_.critic_lr);
  return loss;
}

double Agent::actor_update(std::span<const Transition* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  auto grads = actor_.make_gradients();
  Mlp::Workspace actor_ws, critic_ws;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const std::size_t state_dim = actor_.input_dim();
  for (const Transition* tr : batch) {
    const auto action = actor_.forward(tr->state, &actor_ws);
    const auto critic_in = concat(tr->state, action);
    critic_.forward(critic_in, &critic_ws);
    // dQ/d(input) of the critic; the action block is the policy gradient
    // seed. Critic parameters are left untouched here.
    std::vector<double> dq_dinput;
    const double upstream[1] = {1.0};
    critic_.backward(critic_ws, upstream, nullptr, &dq_dinput);
    std::vector<double> dq_daction(dq_dinput.begin() + state_dim,
                                   dq_dinput.end());
    // Ascend: accumulate -(1/N) dQ/da * dmu/dtheta and step "downhill".
    kernels::scale(dq_daction, -inv_n);
    actor_.backward(actor_ws, dq_daction, &grads, nullptr);
  }
  double norm_sq = 0.0;
  for (const auto& g : grads.w) norm_sq += kernels::norm_sq(g);
  for (const auto& g : grads.b) norm_sq += kernels::norm_sq(g);
  actor_.apply_gradients(grads, cfg_.actor_lr);
  return std::sqrt(norm_sq);
}

void Agent::soft_update_targets() {
  target_actor_.soft_update_from(actor_, cfg_.tau);
  target_critic_.soft_update_from(critic_, cfg_.tau);
}

void PowerEnvConfig::validate() const {
  const std::size_t k = device_count();
  if (k == 0) throw std::invalid_argument("power env needs >= 1 device");
  if (weights.size() != k || delta_s.size() != k)
    throw std::invalid_argument("power env: per-device vectors mismatch");
  if (p_max_total <= 0 || p_min_total < 0 || p_min_total > p_max_total)
    throw std::invalid_argument("power env: invalid power box");
  if (contraction >= 1.0)
    throw std::invalid_argument("power env: contraction must be < 1");
  if (total_rounds < 1) throw std::invalid_argument("power env: T must be >= 1");
  if (!live_schedule && eps_schedule.empty())
    throw std::invalid_argument("power env: missing budget schedule");
  for (const auto& row : eps_schedule)
    if (row.size() != k)
      throw std::invalid_argument("power env: schedule row size mismatch");
}

PowerEnv::PowerEnv(PowerEnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

wireless::PowerAllocation PowerEnv::action_to_power(
    std::span<const double> raw) const {
  if (raw.size() != action_dim())
    throw std::invalid_argument("action dimension mismatch");
  const double amp_max = std::sqrt(cfg_.p_max_total);
  std::vector<double> amps(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k)
    amps[k] = 0.5 * (raw[k] + 1.0) * amp_max;
  return wireless::project_power(std::move(amps), cfg_.p_min_total,
                                 cfg_.p_max_total);
}

double PowerEnv::objective(const wireless::PowerAllocation& power,
                           int* t_th_out) const {
  const std::size_t K = cfg_.device_count();
  const auto schedule =
      cfg_.live_schedule ? cfg_.live_schedule(power) : cfg_.eps_schedule;

  double channel_level = 0.0;
  double channel_sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double hp = cfg_.h_norms[k] * power.amplitudes[k];
    channel_level += cfg_.sigma_n0 / hp;
    channel_sum +=
        cfg_.weights[k] * cfg_.weights[k] * cfg_.sigma_n0 * cfg_.sigma_n0 / (hp * hp);
  }

  // First round whose required artificial level falls to the channel level.
  control::NoiseSwitch sw;
  const int rounds = std::min<int>(cfg_.total_rounds,
                                   static_cast<int>(schedule.size()));
  for (int t = 1; t <= rounds; ++t) {
    const double art = control::artificial_noise_level(
        cfg_.delta_s, schedule[t - 1], cfg_.delta_dp);
    if (sw.observe(t, art, channel_level)) break;
  }
  const int t_th = schedule.empty() ? 0 : sw.t_th_or(rounds);
  if (t_th_out) *t_th_out = t_th;

  const double a = cfg_.contraction;
  const double a_pow_t = std::pow(a, cfg_.total_rounds);
  const double two_log = 2.0 * std::log(1.25 / cfg_.delta_dp);
  double objective = (1.0 - a_pow_t) / (1.0 - a) * channel_sum;
  double a_pow_m = 1.0;
  for (int m = 0; m < t_th; ++m) {
    double round_noise = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double gd = cfg_.weights[k] * cfg_.delta_s[k];
      const double eps = schedule[m][k];
      round_noise += gd * gd * two_log / (eps * eps);
    }
    objective += a_pow_m * round_noise;
    a_pow_m *= a;
  }
  return objective;
}

std::vector<double> PowerEnv::build_state(
    const wireless::PowerAllocation& prev_power, int t_th,
    double prev_objective_scaled) const {
  std::vector<double> s;
  s.reserve(state_dim());
  const double amp_max = std::sqrt(cfg_.p_max_total);
  for (double p : prev_power.amplitudes) s.push_back(p / amp_max);
  s.push_back(static_cast<double>(t_th) / static_cast<double>(cfg_.total_rounds));
  s.push_back(prev_objective_scaled);
  return s;
}

double PowerEnv::standardize(double objective) {
  ++obj_count_;
  const double delta = objective - obj_mean_;
  obj_mean_ += delta / static_cast<double>(obj_count_);
  obj_m2_ += delta * (objective - obj_mean_);
  const double var =
      obj_count_ > 1 ? obj_m2_ / static_cast<double>(obj_count_ - 1) : 0.0;
  const double scale = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
  return (objective - obj_mean_) / scale;
}

std::vector<double> PowerEnv::reset(Rng& rng) {
  // Random feasible starting allocation.
  std::vector<double> raw(action_dim());
  for (double& v : raw) v = rng.uniform(-1.0, 1.0);
  const auto power = action_to_power(raw);
  int t_th = 0;
  const double obj = objective(power, &t_th);
  return build_state(power, t_th, standardize(obj));
}

PowerEnv::StepResult PowerEnv::step(const wireless::PowerAllocation& power) {
  StepResult out;
  out.objective = objective(power, &out.t_th);
  if (!std::isfinite(out.objective)) {
    out.terminal = true;
    out.reward_raw = -1e30;
    out.reward_scaled = -10.0;
    out.next_state = build_state(power, out.t_th, 0.0);
    return out;
  }
  out.reward_raw = -out.objective;
  out.reward_scaled = -standardize(out.objective);
  out.next_state = build_state(power, out.t_th, -out.reward_scaled);
  return out;
}

OptimizeResult optimize_power(PowerEnv& env, const AgentConfig& cfg,
                              std::uint64_t seed) {
  cfg.validate();
  Rng agent_rng(Rng::derive(seed, "ddpg.init"));
  Rng explore_rng(Rng::derive(seed, "ddpg.explore"));
  Rng buffer_rng(Rng::derive(seed, "ddpg.buffer"));
  Rng env_rng(Rng::derive(seed, "ddpg.env"));

  Agent agent(env.state_dim(), env.action_dim(), cfg, agent_rng);
  ReplayBuffer buffer(cfg.buffer_capacity);

  OptimizeResult result;
  result.best_reward = -std::numeric_limits<double>::infinity();
  const std::size_t total_steps =
      static_cast<std::size_t>(cfg.episodes) * cfg.steps_per_episode;
  result.reward_trace.reserve(total_steps);

  std::size_t step_index = 0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    std::vector<double> state = env.reset(env_rng);
    for (int st = 0; st < cfg.steps_per_episode; ++st, ++step_index) {
      const double frac =
          total_steps > 1
              ? static_cast<double>(step_index) / static_cast<double>(total_steps - 1)
              : 0.0;
      const double noise_std =
          cfg.explore_std_start + frac * (cfg.explore_std_end - cfg.explore_std_start);
      const auto action = agent.select_action(state, noise_std, explore_rng);
      const auto power = env.action_to_power(action);
      const auto sr = env.step(power);

      result.reward_trace.push_back(sr.reward_raw);
      if (sr.reward_raw > result.best_reward) {
        result.best_reward = sr.reward_raw;
        result.best_objective = sr.objective;
        result.best_power = power;
        result.best_t_th = sr.t_th;
      }

      buffer.push(
          {state, action, sr.reward_scaled, sr.next_state, sr.terminal});
      state = sr.next_state;

      if (buffer.size() >= cfg.batch_size) {
        const auto batch = buffer.sample(cfg.batch_size, buffer_rng);
        const auto targets = agent.critic_targets(batch);
        agent.critic_update(batch, targets);
        agent.actor_update(batch);
        agent.soft_update_targets();
      }
      if (sr.terminal) break;
    }
  }
  return result;
}

}  // namespace fedsim::ddpg
