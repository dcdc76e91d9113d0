#pragma once

#include <array>
#include <string>
#include <vector>

#include "locomanip/priors.hpp"
#include "locomanip/sim.hpp"

namespace locomanip::data {

// Per-control-step command: PD joint targets, root velocity command in the
// world frame (observation builders rotate it into the root frame), and the
// desired contact label.
struct CommandVector {
  sim::JointVec q_cmd{};
  Vec2 v_cmd{0.0, 0.0};
  double omega_cmd = 0.0;
  bool label = false;
};

inline constexpr int kCommandDim = sim::kNumDof + 4;

struct RefinedFrame {
  sim::RobotState robot;
  sim::ObjectState object;
  CommandVector cmd;
};

// Physically consistent replacement of one kinematic prior, sampled at the
// control rate from a refiner rollout.
struct RefinedTrajectory {
  std::vector<RefinedFrame> frames;
  double frame_dt = 0.02;
  int trajectory_id = 0;
  int source_prior = -1;
  std::string task_id = "push_box";
  Vec2 goal_pos{0.0, 0.0};
  double goal_angle = 0.0;
  double tolerance = 0.15;

  int length() const { return static_cast<int>(frames.size()); }
};

// One generator training sample site: the tracker's object observation and
// root-relative goal at a knot, plus the command it was executing.
struct RolloutKnot {
  std::array<double, 4> object_obs{};  // rel pos (2), orientation (cos, sin)
  std::array<double, 4> goal_rel{};    // rel pos (2), orientation (cos, sin)
  CommandVector cmd;
};

struct RolloutTrajectory {
  std::vector<RolloutKnot> knots;
  int trajectory_id = 0;
  std::string task_id = "push_box";

  int length() const { return static_cast<int>(knots.size()); }
};

void write_priors(const std::string& path, const std::vector<priors::KinematicPrior>& trajs);
std::vector<priors::KinematicPrior> read_priors(const std::string& path);

void write_refined(const std::string& path, const std::vector<RefinedTrajectory>& trajs);
std::vector<RefinedTrajectory> read_refined(const std::string& path);

void write_rollouts(const std::string& path, const std::vector<RolloutTrajectory>& trajs);
std::vector<RolloutTrajectory> read_rollouts(const std::string& path);

// 9-significant-digit decimal rendering used by every dataset writer; a
// second write-read cycle is bit-stable.
std::string fmt_g9(double v);

}  // namespace locomanip::data
