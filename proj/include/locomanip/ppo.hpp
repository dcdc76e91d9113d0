#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locomanip/nn.hpp"
#include "locomanip/rng.hpp"

namespace locomanip::ppo {

struct PpoConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.005;
  double value_coef = 1.0;
  double desired_kl = 0.01;
  int epochs = 5;
  int minibatches = 4;
  int steps_per_env = 24;
  int num_envs = 64;
  double init_noise_std = 1.0;
  double max_grad_norm = 1.0;
  double lr = 1.0e-3;
  // Distillation blend: bc_weight * action MSE against recorded teacher
  // actions + (1 - bc_weight) * (clipped surrogate + entropy bonus). The
  // value loss is trained at full weight throughout.
  double bc_weight = 0.0;

  void validate() const;
};

// kl > 2*desired shrinks lr by 1.5, kl < desired/2 grows it by 1.5,
// clamped to [1e-6, 1e-2].
double adapt_lr(double measured_kl, double desired_kl, double lr);

// Per-(step, env) storage for one on-policy collection window. A timed-out
// step carries the critic's value of the state it was cut at, folded into the
// reward as a bootstrap before advantage estimation.
struct RolloutBuffer {
  int num_envs = 0, steps = 0, obs_dim = 0, critic_dim = 0, act_dim = 0;
  nn::Vec obs, critic_obs, actions, logp, values, rewards;
  std::vector<uint8_t> dones, timeouts;
  nn::Vec timeout_values;
  nn::Vec advantages, returns;
  nn::Vec teacher_actions;  // consulted only when bc_weight > 0

  void resize(int envs, int steps_per_env, int obs_dim_in, int critic_dim_in, int act_dim_in);
  int size() const { return num_envs * steps; }
  size_t at(int t, int e) const { return static_cast<size_t>(t) * num_envs + e; }
};

// A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1},
// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t, V_T = bootstrap.
void compute_gae(const nn::Vec& rewards, const nn::Vec& values, const std::vector<uint8_t>& dones,
                 double bootstrap, double gamma, double lam, nn::Vec& advantages,
                 nn::Vec& returns);

// Timeout bootstrap fold plus per-env GAE over the whole buffer;
// last_values[e] bootstraps the rollout tail.
void buffer_gae(RolloutBuffer& buf, const nn::Vec& last_values, double gamma, double lam);

void normalize_advantages(nn::Vec& adv);

// Diagonal Gaussian over actions: MLP mean, state-independent log-std.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(nn::ParamStore& ps, const std::string& name, int obs_dim,
                 const std::vector<int>& hidden, int act_dim, double init_std);

  void init(nn::ParamStore& ps, Rng& rng) const;

  void mean(const nn::ParamStore& ps, const nn::Vec& obs, int batch, nn::Vec& mu,
            nn::MlpCache* cache = nullptr) const;
  void sample(const nn::ParamStore& ps, const nn::Vec& obs_row, Rng& rng, nn::Vec& action,
              double& log_prob) const;
  double log_prob_row(const nn::ParamStore& ps, const double* mu, const double* action) const;
  double entropy(const nn::ParamStore& ps) const;  // state-independent, per sample

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const nn::Mlp& net() const { return net_; }
  int log_std_handle() const { return log_std_; }

 private:
  nn::Mlp net_;
  int log_std_ = -1;
  int obs_dim_ = 0, act_dim_ = 0;
  double init_std_ = 1.0;
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double bc_loss = 0.0;  // mean squared teacher-action error when blending
};

// One PPO update over a full buffer: epochs x minibatches of clipped
// surrogate + value MSE - entropy bonus, Adam with global-norm clipping.
// Actor and critic live in the same store and are stepped together.
// Throws DivergenceError when a loss goes non-finite.
PpoStats ppo_update(nn::ParamStore& store, const GaussianPolicy& actor, const nn::Mlp& critic,
                    RolloutBuffer& buf, const PpoConfig& cfg, int& adam_t, Rng& rng);

}  // namespace locomanip::ppo
