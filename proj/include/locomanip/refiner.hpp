#pragma once

#include <map>
#include <string>
#include <vector>

#include "locomanip/dataset.hpp"
#include "locomanip/env.hpp"
#include "locomanip/ppo.hpp"

namespace locomanip::refiner {

// Actor-critic pair sharing one parameter store and one Adam clock.
// Architecture lives in checkpoint metadata so consumers can rebuild the
// networks before loading values.
struct ActorCritic {
  nn::ParamStore store;
  ppo::GaussianPolicy actor;
  nn::Mlp critic;
  int adam_t = 0;
  int actor_obs = 0, critic_obs = 0, act_dim = 0;
  std::vector<int> actor_hidden, critic_hidden;
  double init_noise_std = 1.0;
};

void build_actor_critic(ActorCritic& ac, int actor_obs, int critic_obs, int act_dim,
                        const std::vector<int>& actor_hidden, const std::vector<int>& critic_hidden,
                        double init_noise_std, uint64_t seed);

// Checkpoint with self-describing architecture metadata; extra entries are
// stored verbatim (stage name, iteration, dataset hashes, ...).
void save_policy(const std::string& path, const ActorCritic& ac,
                 const std::map<std::string, std::string>& extra_meta);
std::map<std::string, std::string> load_policy(const std::string& path, ActorCritic& ac);

struct IterStats {
  int iteration = 0;
  double mean_reward = 0.0;        // per-step total reward across the batch
  double mean_track_reward = 0.0;  // per-step tracking term
  double mean_episode_len = 0.0;   // completed episodes this iteration
  int episodes = 0;
  int full_length = 0;  // episodes that ran from frame 0 to the end untouched
  double kl = 0.0;
  double lr = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  int pool_size = 0;
};

struct TrainConfig {
  ppo::PpoConfig ppo;
  env::EnvConfig env;
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{128, 128};
  int iterations = 1500;
  int pool_capacity = 4096;
  int pool_survive_steps = 50;
  int checkpoint_every = 500;
  std::string out_dir;  // empty: keep everything in memory
  uint64_t seed = 1;
  bool resume = false;  // continue from out_dir's run state if present

  void validate() const;
};

// Complete training state at an iteration boundary: parameters with their
// Adam moments, every env's episode state, the state pool, the update rng,
// and scalar counters. A restored run continues bit-exact, so its metric
// trace matches the uninterrupted run's.
struct RunState {
  int next_iteration = 0;
  double lr = 0.0;
  std::map<std::string, std::string> extra;  // stage-specific counters
};

void save_run_state(const std::string& path, const ActorCritic& ac,
                    const std::vector<env::MimicEnv>& envs, const pool::StatePool& pool,
                    const Rng& update_rng, const RunState& rs);

// Returns false when the file does not exist; throws DataError when the
// stored run does not match the given architecture or env count.
bool load_run_state(const std::string& path, ActorCritic& ac, std::vector<env::MimicEnv>& envs,
                    pool::StatePool& pool, Rng& update_rng, RunState& rs);

struct TrainResult {
  ActorCritic ac;
  std::vector<IterStats> history;
  pool::StatePool pool;
};

// PPO over the kinematic reference tracks: uniform trajectory assignment,
// schedule-mixed start states, per-episode physics randomization, impulse
// perturbations, and state-pool harvesting of surviving intermediate states.
// On divergence the last complete checkpoint is kept and the error rethrown.
TrainResult train_refiner(const std::vector<env::ReferenceTrack>& tracks,
                          const sim::RobotModel& model, const sim::BoxModel& box,
                          const sim::SimConfig& sim_cfg, const TrainConfig& cfg);

struct RefineAccounting {
  struct PerPrior {
    int trajectory_id = 0;
    bool success = false;
    int attempts = 0;
  };
  std::vector<PerPrior> priors;
  int successes = 0;
};

// Rolls the trained policy from each prior's first frame under nominal
// physics: the first attempt replays mean actions, later attempts sample
// from the policy. An episode enters the output only when it reaches the
// trajectory end without a violation and the final object pose satisfies
// the task tolerance. Commands record what the policy actually did: joint
// positions as executed, root velocities as state finite differences, the
// contact label from measured forces.
std::vector<data::RefinedTrajectory> refine_dataset(
    const ActorCritic& ac, const std::vector<priors::KinematicPrior>& priors_in,
    const sim::RobotModel& model, const sim::BoxModel& box, const sim::SimConfig& sim_cfg,
    const env::EnvConfig& env_cfg, int attempts_per_prior, uint64_t seed,
    RefineAccounting* accounting = nullptr);

}  // namespace locomanip::refiner
