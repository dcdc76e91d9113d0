#pragma once

#include <string>
#include <vector>

#include "locomanip/generator.hpp"
#include "locomanip/tracker.hpp"

namespace locomanip::eval {

// Aggregate episode metrics for one task. The error mean covers completed
// episodes only: runs that ended in a fall carry no meaningful final
// distance and are counted as failures instead.
struct EvalReport {
  std::string task_id;
  int episodes = 0;
  int successes = 0;
  int completed = 0;  // episodes contributing to the error mean
  int falls = 0;
  double success_rate = 0.0;
  double mean_final_error = 0.0;  // m, over completed episodes
  std::vector<uint64_t> episode_seeds;
  std::string config_fingerprint;
};

// Training-time pipeline variants; each switch is independent of the others.
struct AblationSwitches {
  bool refiner = true;  // off: the generator learns from raw prior commands
  pool::InitMode init_mode = pool::InitMode::kRSIToPSPI;
  bool interaction_rewards = true;
  bool robustness = true;  // physics randomization + impulse perturbations
};

// Folds the reward/initialization/robustness switches into an environment
// configuration; the refiner switch is dataset routing and is applied where
// the generator's training data is assembled.
void apply_switches(const AblationSwitches& s, env::EnvConfig& e);

// Autonomous closed-loop evaluation over freshly sampled start/goal draws;
// identical (seed, config) inputs give an identical report.
EvalReport evaluate(const gen::Generator& g, const refiner::ActorCritic& tracker_policy,
                    const priors::TaskSpec& task, const sim::RobotModel& model,
                    const sim::SimConfig& sim_cfg, const env::EnvConfig& env_cfg, int episodes,
                    int max_steps, uint64_t seed);

// Episode budget: twice the longest refined trajectory, in control steps.
int episode_step_limit(const std::vector<data::RefinedTrajectory>& refined);

std::string report_text(const EvalReport& r);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

// One full desk-scale training pass over a fixed prior corpus.
struct PipelineConfig {
  priors::TaskSpec task = priors::TaskSpec::push_box();
  sim::RobotModel model = sim::default_robot_model();
  sim::SimConfig sim_cfg;
  int prior_count = 10;
  priors::NoiseModel noise = priors::NoiseModel::defaults();
  int filter_window = 5;
  refiner::TrainConfig refiner_cfg;
  int refine_attempts = 4;
  tracker::TrainConfig tracker_cfg = tracker::default_train_config();
  gen::GeneratorConfig generator_cfg;
  AblationSwitches switches;
  uint64_t seed = 1;
  std::string out_dir;  // empty: keep all artifacts in memory

  void validate() const;
};

struct PipelineResult {
  std::vector<priors::KinematicPrior> priors;
  refiner::TrainResult refiner_result;
  std::vector<data::RefinedTrajectory> refined;
  tracker::TrainResult tracker_result;
  std::vector<data::RolloutTrajectory> rollouts;
  gen::Generator generator;
  int episode_limit = 0;  // control steps available to evaluation episodes
};

// priors -> refiner -> refined set -> tracker -> rollout collection ->
// generator, honoring the ablation switches throughout.
PipelineResult run_pipeline_from_priors(const std::vector<priors::KinematicPrior>& priors_in,
                                        const PipelineConfig& cfg);
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct ScalingRow {
  int size = 0;
  std::vector<double> per_seed_success;
  std::vector<double> per_seed_error;
  double mean_success = 0.0;
  double mean_error = 0.0;
};

// Data-volume sweep with nested corpora: the size-k run trains on the first
// k trajectories of one master draw, so every smaller corpus is a prefix of
// every larger one. Evaluation uses a fixed held-out seed per training seed.
std::vector<ScalingRow> data_scaling_run(const std::vector<int>& sizes,
                                         const PipelineConfig& base,
                                         const std::vector<uint64_t>& seeds, int eval_episodes,
                                         std::string* plot_data = nullptr);

std::string scaling_csv(const std::vector<ScalingRow>& rows);

}  // namespace locomanip::eval
