#pragma once

#include <array>
#include <string>

#include "locomanip/sim.hpp"

namespace locomanip::rewards {

// One reference frame at the phase being tracked: kinematic robot/object
// poses plus the expected contact label.
struct ReferenceFrame {
  sim::RobotState robot;
  sim::ObjectState object;
  bool contact_label = false;
};

struct RewardConfig {
  // tracking (weight, kernel scale)
  double w_joint_pos = 0.125, s_joint_pos = 0.6;
  double w_root_pos = 0.25, s_root_pos = 0.3;
  double w_root_orient = 0.25, s_root_orient = 0.4;
  double w_body_pos = 0.25, s_body_pos = 0.3;
  double w_body_orient = 0.25, s_body_orient = 0.4;
  double w_body_linvel = 0.25, s_body_linvel = 1.0;
  double w_body_angvel = 0.25, s_body_angvel = 3.14;
  double w_obj_pos = 0.5, s_obj_pos = 0.3;
  double w_obj_orient = 0.5, s_obj_orient = 0.4;
  double w_obj_linvel = 0.5, s_obj_linvel = 1.0;
  double w_obj_angvel = 0.5, s_obj_angvel = 3.14;
  // interaction
  double w_obj_body_pos = 0.25, s_obj_body_pos = 0.3;
  double w_obj_body_orient = 0.25, s_obj_body_orient = 0.4;
  double w_contact_consistency = 1.0;
  double contact_force_threshold = 1.0;  // N
  // regularization
  double w_feet_air_time = 5.0;
  double feet_air_time_target = 0.5;  // s
  double w_feet_slip = -0.1;
  double w_undesired_contact = -0.1;
  double w_joint_acc = -2.5e-7;
  double w_joint_torque = -1.0e-5;
  double w_action_rate = -0.1;
  double w_joint_limits = -10.0;

  void validate() const;
};

struct RewardBreakdown {
  double joint_pos = 0, root_pos = 0, root_orient = 0, body_pos = 0, body_orient = 0,
         body_linvel = 0, body_angvel = 0, obj_pos = 0, obj_orient = 0, obj_linvel = 0,
         obj_angvel = 0;
  double obj_body_pos = 0, obj_body_orient = 0, contact_consistency = 0;
  double feet_air_time = 0, feet_slip = 0, undesired_contact = 0, joint_acc = 0, joint_torque = 0,
         action_rate = 0, joint_limits = 0;
  double r_track = 0, r_int = 0, r_reg = 0, total = 0;

  void finalize();  // fills category sums and total
};

double exp_kernel(double error_norm, double sigma, double weight);

// Designated interaction end-effectors; hands for both planar tasks (the
// single-link arms have no separate forearm body).
struct InteractionSites {
  std::array<int, 2> sites{sim::kHandL, sim::kHandR};
};

void tracking_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                     const sim::ObjectState& object, const ReferenceFrame& ref,
                     const RewardConfig& cfg, RewardBreakdown& out);

void interaction_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                        const sim::ObjectState& object, const sim::ContactReport& contacts,
                        const ReferenceFrame& ref, const RewardConfig& cfg,
                        const InteractionSites& ee, RewardBreakdown& out);

// Inputs the environment wrapper maintains across steps.
struct RegularizationInputs {
  sim::JointVec torques{};
  sim::JointVec joint_acc{};                      // control-rate finite difference
  sim::JointVec action{}, prev_action{};
  std::array<double, 2> foot_slip_speed{};        // |tangential foot velocity|, m/s
  std::array<bool, 2> foot_contact{};
  std::array<double, 2> touchdown_air_time{-1.0, -1.0};  // seconds; < 0 when no touchdown
  int undesired_contact_count = 0;
  sim::JointVec q{};
};

void regularization_reward(const sim::RobotModel& model, const RegularizationInputs& in,
                           const RewardConfig& cfg, RewardBreakdown& out);

RewardBreakdown compute_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                               const sim::ObjectState& object, const sim::ContactReport& contacts,
                               const ReferenceFrame& ref, const RegularizationInputs& reg,
                               const RewardConfig& cfg, const InteractionSites& ee);

struct TerminationConfig {
  double root_pos = 0.3;      // m
  double root_orient = 0.8;   // rad
  double body_pos = 0.3;      // m
  double object_pos = 0.3;    // m
  double object_orient = 0.8; // rad

  void validate() const;
};

enum class TerminationReason {
  kNone = 0,
  kRootPosition,
  kRootOrientation,
  kBodyPosition,
  kObjectPosition,
  kObjectOrientation,
};

const char* termination_reason_name(TerminationReason r);

// Strict-inequality checks in Table-8 order; returns the first violation.
TerminationReason check_termination(const sim::RobotModel& model, const sim::RobotState& robot,
                                    const sim::ObjectState& object, const ReferenceFrame& ref,
                                    const TerminationConfig& cfg);

}  // namespace locomanip::rewards
