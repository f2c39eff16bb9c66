#pragma once
// Deep deterministic policy gradient over transmit powers. Networks are
// small dense MLPs with tanh hidden units and manual backpropagation;
// gradients are checked against central finite differences in the tests.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/control.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/wireless.hpp"

namespace fedsim::ddpg {

class Mlp {
 public:
  struct Layer {
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
    std::size_t in = 0;
    std::size_t out = 0;
  };

  struct Workspace {
    // inputs[l] is the input of layer l; preact[l] its pre-activation.
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> preact;
  };

  struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
    void zero();
  };

  // dims = {in, hidden..., out}; tanh on hidden layers, and on the output
  // too when tanh_output is set.
  static Mlp make(std::span<const std::size_t> dims, bool tanh_output, Rng& rng);

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  std::size_t parameter_count() const;

  std::vector<double> forward(std::span<const double> input,
                              Workspace* ws = nullptr) const;

  Gradients make_gradients() const;

  // Accumulates dL/dparams into grads given dL/doutput; when input_grad is
  // non-null it receives dL/dinput (resized). The workspace must come from a
  // forward() call on the same input.
  void backward(const Workspace& ws, std::span<const double> output_grad,
                Gradients* grads, std::vector<double>* input_grad) const;

  // params -= lr * scale * grads
  void apply_gradients(const Gradients& grads, double lr, double scale = 1.0);

  // this = tau * online + (1 - tau) * this; architectures must match.
  void soft_update_from(const Mlp& online, double tau);

  // Flat parameter view for finite-difference probes.
  double get_parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  bool tanh_output() const { return tanh_output_; }

 private:
  std::vector<Layer> layers_;
  bool tanh_output_ = false;
};

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(Transition t);
  std::size_t size() const { return storage_.size(); }
  std::size_t insertions() const { return insertions_; }
  // Uniform with replacement; throws std::logic_error when size() < n.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t insertions_ = 0;
  std::vector<Transition> storage_;
};

struct AgentConfig {
  double discount = 0.99;          // Upsilon
  double tau = 0.001;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 10000;
  double explore_std_start = 0.2;  // in normalized action units
  double explore_std_end = 0.02;
  int episodes = 25;
  int steps_per_episode = 40;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};

  void validate() const;
};

class Agent {
 public:
  Agent(std::size_t state_dim, std::size_t action_dim, const AgentConfig& cfg,
        Rng& rng);

  // mu(s) plus exploration noise, clamped to [-1, 1]^action_dim.
  std::vector<double> select_action(std::span<const double> state,
                                    double noise_std, Rng& rng) const;

  // y_i = r_i + discount * Q'(s', mu'(s')); terminal transitions drop the
  // bootstrap term.
  std::vector<double> critic_targets(
      std::span<const Transition* const> batch) const;

  // One gradient-descent step on the MSE critic loss; returns the pre-step
  // loss.
  double critic_update(std::span<const Transition* const> batch,
                       std::span<const double> targets);

  // One ascent step along the deterministic policy gradient; returns the
  // parameter-gradient norm.
  double actor_update(std::span<const Transition* const> batch);

  void soft_update_targets();

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }

  double critic_value(std::span<const double> state,
                      std::span<const double> action) const;

 private:
  AgentConfig cfg_;
  Mlp actor_, critic_, target_actor_, target_critic_;
};

// Objective pieces frozen from a reference run: everything in the P1
// objective except the transmit powers.
struct PowerEnvConfig {
  std::vector<double> h_norms;
  double sigma_n0 = 0.0;
  double p_min_total = 0.0;
  double p_max_total = 0.0;
  std::vector<double> weights;     // G_k
  std::vector<double> delta_s;     // per device
  double delta_dp = 0.01;
  double contraction = 0.5;        // A (must be < 1)
  int total_rounds = 100;          // T
  // eps_schedule[t-1][k]: effective round-t device budgets from the frozen
  // reference trajectory.
  std::vector<std::vector<double>> eps_schedule;
  // Live mode: recompute the budget schedule for a candidate power
  // allocation (runs the full FL loop); empty for the default frozen mode.
  std::function<std::vector<std::vector<double>>(const wireless::PowerAllocation&)>
      live_schedule;

  std::size_t device_count() const { return h_norms.size(); }
  void validate() const;
};

class PowerEnv {
 public:
  explicit PowerEnv(PowerEnvConfig cfg);

  std::size_t state_dim() const { return cfg_.device_count() + 2; }
  std::size_t action_dim() const { return cfg_.device_count(); }

  // Maps a normalized action in [-1,1]^K to a feasible allocation.
  wireless::PowerAllocation action_to_power(std::span<const double> raw) const;

  // Eq.-28 objective under the frozen (or live) budget schedule; reports the
  // switching round through t_th_out. Routine building block for both the
  // agent loop and the grid-search oracle.
  double objective(const wireless::PowerAllocation& power, int* t_th_out) const;

  struct StepResult {
    double reward_raw = 0.0;       // -objective
    double reward_scaled = 0.0;    // standardized reward fed to the critic
    double objective = 0.0;
    int t_th = 0;
    std::vector<double> next_state;
    bool terminal = false;
  };

  std::vector<double> reset(Rng& rng);
  StepResult step(const wireless::PowerAllocation& power);

  const PowerEnvConfig& config() const { return cfg_; }

 private:
  std::vector<double> build_state(const wireless::PowerAllocation& prev_power,
                                  int t_th, double prev_objective_scaled) const;
  double standardize(double objective);

  PowerEnvConfig cfg_;
  // Running mean/std of the raw objective (Welford) for state/reward scaling.
  double obj_mean_ = 0.0;
  double obj_m2_ = 0.0;
  std::size_t obj_count_ = 0;
};

struct OptimizeResult {
  wireless::PowerAllocation best_power;
  int best_t_th = 0;
  double best_objective = 0.0;
  double best_reward = 0.0;
  std::vector<double> reward_trace;  // raw rewards, episode-major
};

OptimizeResult optimize_power(PowerEnv& env, const AgentConfig& cfg,
                              std::uint64_t seed);

}  // namespace fedsim::ddpg
