#pragma once

#include <string>
#include <vector>

#include "locomanip/refiner.hpp"

namespace locomanip::tracker {

// Three-phase distillation timeline: imitation only, a linear hand-off to
// reinforcement, then reinforcement only.
struct DistillSchedule {
  int bc_iters = 500;
  int warmup_iters = 500;
  int rl_iters = 1000;

  // Imitation weight during the hand-off, exactly linear: 1 at iteration 0,
  // 0 at warmup_iters (and beyond).
  double bc_weight(int warmup_iter) const;
  void validate() const;
};

struct TrainConfig {
  ppo::PpoConfig ppo;  // init_noise_std is the tracker's starting exploration
  env::EnvConfig env;
  DistillSchedule schedule;
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{128, 128};
  int pool_capacity = 4096;
  int pool_survive_steps = 50;
  int checkpoint_every = 500;
  double bc_lr = 1.0e-3;  // Adam rate for the imitation-only phase
  std::string out_dir;
  uint64_t seed = 1;
  bool resume = false;  // continue from out_dir's run state if present

  void validate() const;
};

struct TrainResult {
  refiner::ActorCritic ac;  // deployable actor, privileged critic
  std::vector<refiner::IterStats> history;
  std::vector<double> bc_losses;  // one entry per imitation-only iteration
  pool::StatePool pool;
};

TrainConfig default_train_config();

// One imitation update: mean squared error between the student's mean
// actions and recorded teacher actions over a row-major batch, followed by
// an Adam step on the student policy. Returns the pre-update loss.
double bc_update(refiner::ActorCritic& student, const nn::Vec& obs, const nn::Vec& teacher_actions,
                 int rows, const nn::AdamConfig& adam);

// Full distillation: the frozen teacher is queried for mean actions on its
// privileged view of the student-visited states; commands replay from the
// refined tracks in lockstep with the reference phase. Checkpoints carry
// the deployable observation layout fingerprint.
TrainResult train_tracker(const refiner::ActorCritic& teacher,
                          const std::vector<env::ReferenceTrack>& tracks,
                          const sim::RobotModel& model, const sim::BoxModel& box,
                          const sim::SimConfig& sim_cfg, const TrainConfig& cfg);

}  // namespace locomanip::tracker
