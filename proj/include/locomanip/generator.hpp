#pragma once

#include <map>
#include <string>
#include <vector>

#include "locomanip/dataset.hpp"
#include "locomanip/env.hpp"
#include "locomanip/refiner.hpp"

namespace locomanip::gen {

struct GeneratorConfig {
  int horizon = 8;       // command knots per predicted chunk
  int exec_steps = 4;    // knots executed before re-planning
  int blocks = 4;        // transformer depth
  int token_dim = 48;    // token width (divisible by heads, even)
  int heads = 4;
  int denoise_steps = 50;  // reverse-process step count K
  int stride = 4;          // control steps per command knot; also the
                           // interpolation factor back to the control rate
  int batch = 32;
  int iterations = 1200;
  double lr = 3.0e-4;
  double max_grad_norm = 1.0;
  int checkpoint_every = 200;
  bool resume = false;  // continue from out_dir's checkpoint if present

  void validate() const;
};

// Signal-retention table of the cosine noising schedule: index t in [0, K),
// monotonically decreasing from exactly 1 at t = 0, clamped to [1e-5, 1].
nn::Vec cosine_alpha_bar(int K);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
void forward_noising(const nn::Vec& x0, int t, const nn::Vec& eps, const nn::Vec& alpha_bar,
                     nn::Vec& xt);

// Deterministic reverse update t -> t-1 using the predicted noise: the
// clean-sample estimate is re-noised at level t-1 with the same predicted
// noise, so an exact noise prediction inverts one forward step exactly.
void reverse_step(nn::Vec& x, const nn::Vec& eps_hat, int t, const nn::Vec& alpha_bar);

inline constexpr int kConditionDim = 4 + data::kCommandDim + 5;  // object, prev command, goal+flag

// Noise-prediction transformer over a chunk of command tokens. The
// condition row (object estimate, previous command, goal with validity
// bit) and the timestep embedding modulate every block.
class DiffusionModel {
 public:
  DiffusionModel() = default;
  DiffusionModel(nn::ParamStore& ps, const GeneratorConfig& cfg);

  void init(nn::ParamStore& ps, Rng& rng) const;

  struct Cache {
    nn::Vec x_in, tokens0, sin_emb, t_emb, emb_concat, cond;
    nn::MlpCache t_cache, obj_cache, cmd_cache, goal_cache;
    std::vector<nn::Vec> blk_in;
    std::vector<nn::AdaNormBlock::Cache> blk;
    nn::LayerNorm::Cache ln;
    nn::Vec ln_out;
  };

  // x: [horizon x command] normalized noisy chunk, t: noise level,
  // cond_raw: kConditionDim condition row. eps: predicted noise, same
  // shape as x. The head starts at zero so the initial prediction is 0.
  void forward(const nn::ParamStore& ps, const nn::Vec& x, int t, const nn::Vec& cond_raw,
               nn::Vec& eps, Cache* cache) const;
  void backward(nn::ParamStore& ps, const Cache& cache, const nn::Vec& deps) const;

  int horizon() const { return H_; }
  int channels() const { return C_; }

 private:
  int H_ = 0, C_ = 0, D_ = 0, heads_ = 0, nblocks_ = 0;
  nn::Linear tok_in_;
  int pos_ = -1;
  nn::Mlp t_mlp_, emb_obj_, emb_cmd_, emb_goal_;
  nn::Linear fuse_;
  std::vector<nn::AdaNormBlock> blocks_;
  nn::LayerNorm final_ln_;
  nn::Linear head_;
};

// Trained generator bundle: parameters, architecture, per-channel command
// normalization (stored in the checkpoint), and the noising schedule.
struct Generator {
  nn::ParamStore store;
  DiffusionModel model;
  GeneratorConfig cfg;
  nn::Vec cmd_mean, cmd_std;  // kCommandDim entries each
  nn::Vec alpha_bar;
  bool norm_pinned = false;  // some channel had zero variance
};

void save_generator(const std::string& path, const Generator& g,
                    const std::map<std::string, std::string>& extra_meta);
std::map<std::string, std::string> load_generator(const std::string& path, Generator& g);

// Command channel packing shared by training, sampling, and conditioning.
void command_to_channels(const data::CommandVector& c, double* out);
data::CommandVector channels_to_command(const double* in);

// Neutral previous command used at window starts and episode starts.
data::CommandVector neutral_command(const sim::RobotModel& model);

// Replays each refined trajectory's commands through the frozen tracker and
// records the closed-loop object estimate, the active command, and the goal
// at every stride-th control step. Episodes that terminate early are
// dropped; zero survivors is an error.
std::vector<data::RolloutTrajectory> collect_rollouts(
    const refiner::ActorCritic& tracker_policy, const std::vector<env::ReferenceTrack>& tracks,
    const sim::RobotModel& model, const sim::BoxModel& box, const sim::SimConfig& sim_cfg,
    const env::EnvConfig& env_cfg, uint64_t seed, int stride = 4,
    std::vector<int>* dropped = nullptr);

// Ablation dataset: knots read straight off the kinematic priors with
// synthesized commands (poses as targets, finite-difference root velocities,
// the prior's own contact labels). No simulator or tracker involved.
std::vector<data::RolloutTrajectory> rollouts_from_priors(
    const std::vector<priors::KinematicPrior>& priors_in, int stride = 4);

struct GenTrainStats {
  std::vector<double> losses;  // one per iteration
};

// Denoising score matching over command windows: per-channel normalization,
// uniform noise-level sampling, mean squared noise-prediction error.
Generator train_generator(const std::vector<data::RolloutTrajectory>& rollouts,
                          const sim::RobotModel& model, const GeneratorConfig& cfg, uint64_t seed,
                          const std::string& out_dir = "", GenTrainStats* stats = nullptr);

// K-step deterministic denoising from a unit Gaussian draw; de-normalizes,
// thresholds the contact-label channel at 0.5, clamps joint commands to
// their limits. Returns exactly cfg.horizon commands.
std::vector<data::CommandVector> sample_chunk(const Generator& g, const sim::RobotModel& model,
                                              const std::array<double, 4>& object_obs,
                                              const data::CommandVector& prev_cmd,
                                              const std::array<double, 4>& goal_obs,
                                              bool goal_valid, Rng& rng);

// Piecewise-linear upsampling of the first exec_steps knots, starting from
// the previously executed command as knot zero. Continuous channels
// interpolate; the boolean label snaps to the nearer knot (ties toward the
// newer one). Emits exec_steps * factor control-rate commands whose every
// factor-th entry equals a knot exactly.
std::vector<data::CommandVector> interpolate_commands(const std::vector<data::CommandVector>& chunk,
                                                      const data::CommandVector& prev_executed,
                                                      int exec_steps, int factor);

struct EpisodeTrace {
  bool success = false;
  double final_error = 0.0;  // object-to-goal distance at episode end, m
  int steps = 0;             // control steps executed
  int replans = 0;
  bool fell = false;
};

// Receding-horizon closed loop: sample a chunk from the current condition,
// execute its first exec_steps knots through the tracker at the control
// rate, re-plan. Ends on success (object settled within tolerance), a fall,
// or the step limit.
EpisodeTrace autonomous_episode(const Generator& g, const refiner::ActorCritic& tracker_policy,
                                const priors::TaskSpec& task, const sim::RobotModel& model,
                                const sim::SimConfig& sim_cfg, const env::EnvConfig& env_cfg,
                                int max_steps, uint64_t seed);

}  // namespace locomanip::gen
