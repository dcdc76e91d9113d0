#pragma once

#include <string>
#include <vector>

#include "locomanip/rng.hpp"
#include "locomanip/sim.hpp"

namespace locomanip::priors {

// One kinematic reference frame. Velocities are always the central finite
// differences of the pose sequence (one-sided at the ends), refreshed after
// any operation that edits poses.
struct PriorFrame {
  sim::RobotState robot;
  sim::ObjectState object;
  bool label = false;
};

struct KinematicPrior {
  std::vector<PriorFrame> frames;
  double frame_dt = 0.02;
  int trajectory_id = 0;
  std::string task_id = "push_box";
  Vec2 goal_pos{0.0, 0.0};
  double goal_angle = 0.0;
  double tolerance = 0.15;

  int length() const { return static_cast<int>(frames.size()); }
};

enum class TaskKind { kPushBox, kCarryBox };

struct TaskSpec {
  TaskKind kind = TaskKind::kPushBox;
  sim::BoxModel box;
  double start_lo = 0.78, start_hi = 0.92;  // object center x, robot root at 0
  double dist_lo = 0.18, dist_hi = 0.30;    // goal displacement along +x
  double tolerance = 0.15;

  static TaskSpec push_box();
  static TaskSpec carry_box();
  const char* name() const { return kind == TaskKind::kPushBox ? "push_box" : "carry_box"; }
};

TaskSpec task_by_name(const std::string& name);

struct NoiseModel {
  double pose_jitter_pos = 0.0;   // m, per-frame std on positions
  double pose_jitter_ang = 0.0;   // rad, per-frame std on angles
  double drift_rate = 0.0;        // m/s, scene-level drift of a random heading
  double penetration_bias = 0.0;  // m, systematic object offset toward the robot
  double contact_flip_prob = 0.0;
  int contact_lag = 0;            // frames the labels trail the motion
  double dropout_prob = 0.0;      // per-frame chance of a hold-last occlusion gap
  int dropout_len = 4;

  static NoiseModel none() { return NoiseModel{}; }
  static NoiseModel defaults();
  bool is_zero() const;
};

struct NoiseStats {
  double mean_jitter = 0.0;  // mean applied position-jitter magnitude, m
  int label_flips = 0;
  int dropout_gaps = 0;
};

// Scripted, kinematically smooth task motion whose object endpoint hits the
// goal exactly; start pose and push distance are drawn from the TaskSpec
// distributions. Throws ConfigError when the script cannot reach the goal
// geometry (arm circle or face-height limits).
KinematicPrior generate_clean_trajectory(const TaskSpec& task, const sim::RobotModel& model,
                                         uint64_t seed);

KinematicPrior inject_noise(const KinematicPrior& traj, const NoiseModel& noise, uint64_t seed,
                            NoiseStats* stats = nullptr);

// l_t = finite-difference object speed at t above threshold; frame 0 copies 1.
std::vector<bool> infer_contacts_by_velocity(const KinematicPrior& traj, double v_thresh);

// Geometric stand-in for the contact labeler: true iff either hand is within
// epsilon of the box surface (penetration counts as contact).
std::vector<bool> contact_oracle(const KinematicPrior& traj, const sim::RobotModel& model,
                                 const sim::BoxModel& box, double epsilon = 0.03);

// Centered moving average on continuous channels (wrapped mean on angles),
// strict-majority filter on labels; shrunken windows at the ends.
KinematicPrior temporal_filter(const KinematicPrior& traj, int window);

// Recompute velocity channels from poses by central differences.
void finalize_velocities(KinematicPrior& traj);

std::vector<KinematicPrior> build_priors(const TaskSpec& task, const sim::RobotModel& model,
                                         int count, const NoiseModel& noise, int filter_window,
                                         uint64_t seed);

// Planar two-link leg IK in the torso frame (target below the hip); returns
// (hip, knee) with the knee bending backwards.
void leg_ik(double target_x, double target_z, double thigh_len, double shank_len, double& hip,
            double& knee);

}  // namespace locomanip::priors
