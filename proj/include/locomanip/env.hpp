#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "locomanip/dataset.hpp"
#include "locomanip/priors.hpp"
#include "locomanip/rewards.hpp"
#include "locomanip/rng.hpp"
#include "locomanip/sim.hpp"
#include "locomanip/state_pool.hpp"

namespace locomanip::env {

using Vec = std::vector<double>;

// Closed interval for uniform sampling; lo == hi pins the parameter.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Episode-level physics randomization ranges and impulse-perturbation
// bounds. Defaults are the training ranges; collapsing every range to its
// nominal point (or clearing the flags) recovers un-randomized physics.
struct RandomizerConfig {
  bool randomize_params = true;  // sample physical parameters per episode
  bool apply_pushes = true;      // periodic impulse perturbations

  Range robot_friction_static{0.3, 1.6};
  Range robot_friction_dynamic{0.3, 1.2};
  Range robot_restitution{0.0, 0.5};
  Range object_friction_static{0.2, 0.8};
  Range object_friction_dynamic{0.2, 0.8};
  Range object_restitution{0.0, 0.5};
  Range object_mass_scale{0.5, 2.0};
  double com_offset_x = 0.025;         // +/- m, torso CoM shift in the plane
  double com_offset_z = 0.05;          // +/- m
  double joint_default_offset = 0.01;  // +/- rad actuator zero-calibration error

  double robot_push_linvel = 0.3;   // +/- m/s
  double robot_push_angvel = 0.5;   // +/- rad/s
  double object_push_linvel = 0.5;  // +/- m/s; gated on robot-object contact
  double object_push_angvel = 1.0;  // +/- rad/s
  Range push_interval{1.5, 3.0};    // s between perturbations

  void validate() const;
};

// Samples every physical parameter uniformly within its configured range
// and installs the draw on the simulator; returns the sample for logging.
// With randomize_params false the simulator keeps nominal parameters.
sim::PhysicalParams randomize_episode(sim::Simulator& sim, const RandomizerConfig& cfg, Rng& rng);

// One tracked reference motion: kinematic frames, optionally the per-frame
// command vectors (present for refined data, absent for raw priors), and
// the task goal with its success tolerance.
struct ReferenceTrack {
  std::vector<rewards::ReferenceFrame> frames;
  std::vector<data::CommandVector> commands;  // empty when tracking raw priors
  double frame_dt = 0.02;
  int trajectory_id = 0;
  std::string task_id = "push_box";
  Vec2 goal_pos{0.0, 0.0};
  double goal_angle = 0.0;
  double tolerance = 0.15;

  int length() const { return static_cast<int>(frames.size()); }
  bool has_commands() const { return !commands.empty(); }
};

ReferenceTrack track_from_prior(const priors::KinematicPrior& p);
ReferenceTrack track_from_refined(const data::RefinedTrajectory& r);

std::vector<ReferenceTrack> tracks_from_priors(const std::vector<priors::KinematicPrior>& ps);
std::vector<ReferenceTrack> tracks_from_refined(const std::vector<data::RefinedTrajectory>& rs);

inline constexpr int kFutureWindow = 5;  // reference frames ahead in the privileged view
inline constexpr int kHistoryLen = 5;    // proprioception frames in the deployable view

// Privileged view, laid out in blocks (all planar angles as (cos, sin),
// all positions and velocities rotated into the root frame):
//   body positions         7 x 2   relative to root, root frame
//   body orientations      7 x 2   relative to root pitch
//   root linear velocity   2       root frame
//   root angular velocity  1
//   joint positions        6
//   joint velocities       6
//   last action            6
//   object position        2       relative to root, root frame
//   object orientation     2       relative to root pitch
//   object linear velocity 2       root frame
//   object angular velocity 1
//   5 future reference frames (phases phase+1..phase+5, final frame held
//   at the trajectory end), each 23 wide:
//     joint positions 6, joint velocities 6,
//     root position 2 (relative to current root) + orientation 2 (relative
//     to current pitch), object position 2 + orientation 2 (same encoding),
//     object linear velocity 2 (root frame), object angular velocity 1.
int privileged_obs_dim();

// Deployable view, item-major with each item holding kHistoryLen frames
// oldest first (zero-padded before the fifth control step):
//   history root angular velocity 1 x 5
//   history joint positions       6 x 5
//   history joint velocities      6 x 5
//   history actions               6 x 5
//   history projected gravity     2 x 5   gravity direction in the root frame
//   object position               2       relative to root, root frame
//   object orientation            2       relative to root pitch
//   command: joint targets 6, root linear velocity 2 (root frame),
//            root angular velocity 1, contact label 1.
int deployable_obs_dim();

// Compact layout fingerprint stored in tracker checkpoints and verified by
// downstream consumers before driving the policy.
std::string deployable_layout_descriptor();

struct EnvConfig {
  rewards::RewardConfig reward;
  rewards::TerminationConfig term;
  RandomizerConfig rand;
  pool::InitSchedule init;
  double object_obs_noise_pos = 0.0;    // std dev of the object position estimate, m
  double object_obs_noise_angle = 0.0;  // rad
};

struct StepOutcome {
  rewards::RewardBreakdown reward;
  bool done = false;     // violation or trajectory end
  bool timeout = false;  // trajectory end without violation (bootstrap value)
  rewards::TerminationReason reason = rewards::TerminationReason::kNone;
};

// One tracking episode: owns a simulator, a reference assignment, the
// observation histories, air-time accounting and the perturbation timer.
// Refiner and tracker training share this wrapper; they differ only in
// which observation view feeds the actor.
class MimicEnv {
 public:
  MimicEnv(const sim::RobotModel& model, const sim::BoxModel& box, const sim::SimConfig& sim_cfg,
           const EnvConfig& env_cfg, const std::vector<ReferenceTrack>* tracks, uint64_t seed);

  // Uniform trajectory assignment, start-state sampling per the init
  // schedule (optionally from the pool), fresh physics randomization.
  void reset(const pool::StatePool* pool, int iteration);

  // Deterministic start of one trajectory from its first frame.
  void reset_to_start(int track_index);

  StepOutcome step(const Vec& action);  // one control step; action has kNumDof entries

  // Steps the simulator and observation plumbing without reference scoring,
  // phase advance, or perturbations; autonomous rollouts drive this with
  // planner-issued commands via set_command.
  void step_free(const Vec& action);

  Vec privileged_obs() const;
  Vec deployable_obs() const;

  // Root-relative object estimate / goal blocks shared by the deployable
  // view and the rollout dataset: (rel pos x, z, cos, sin).
  std::array<double, 4> object_obs() const;
  std::array<double, 4> goal_obs() const;

  // Command in the deployable view. Replay mode refreshes it from the
  // track each step; an external planner overrides it before stepping.
  void set_command(const data::CommandVector& c);
  const data::CommandVector& command() const { return cmd_; }

  const ReferenceTrack& track() const { return (*tracks_)[track_index_]; }
  int track_index() const { return track_index_; }
  int phase() const { return phase_; }
  int survived_steps() const { return survived_steps_; }
  bool from_pool_init() const { return from_pool_; }
  const sim::Simulator& simulator() const { return sim_; }
  sim::Simulator& simulator() { return sim_; }
  const sim::ContactReport& last_contacts() const { return last_contacts_; }
  const Vec& last_action() const { return last_action_; }
  double control_dt() const { return dt_ctrl_; }
  Rng& rng() { return rng_; }

  // Reference frame the episode is currently scored against.
  const rewards::ReferenceFrame& current_ref() const;

  // Counts down the perturbation timer by one control step; on expiry the
  // robot base is always pushed, the object only when the report carries an
  // active robot-object contact. Public so the gating is testable against a
  // scripted contact schedule.
  void perturbation_tick(const sim::ContactReport& contacts);
  double push_timer() const { return push_timer_; }
  void set_push_timer(double t) { push_timer_ = t; }

  // Flattened run state (simulator snapshot, episode bookkeeping, histories,
  // rng stream); a restored env continues its episode bit-exact. Appends
  // exactly state_size() values.
  static int state_size();
  void serialize(Vec& out) const;
  void deserialize(const Vec& in, size_t& off);

 private:
  void refresh_command();
  void push_history();
  void resample_object_estimate();
  void arm_push_timer();

  sim::Simulator sim_;
  EnvConfig cfg_;
  const std::vector<ReferenceTrack>* tracks_;
  Rng rng_;
  double dt_ctrl_;

  int track_index_ = 0;
  int phase_ = 0;
  int survived_steps_ = 0;
  bool from_pool_ = false;

  Vec last_action_, prev_action_;
  sim::JointVec prev_qd_{};
  std::array<double, 2> air_time_{};
  std::array<bool, 2> foot_contact_{};
  sim::ContactReport last_contacts_{};
  double push_timer_ = 0.0;

  data::CommandVector cmd_;
  Vec2 object_est_pos_{0.0, 0.0};
  double object_est_angle_ = 0.0;

  // Ring of deployable proprioception frames, oldest first.
  std::vector<std::array<double, 21>> history_;
};

}  // namespace locomanip::env
