#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "locomanip/math2d.hpp"

namespace locomanip::sim {

// Planar biped in the x-z vertical plane: floating base (x, z, pitch) plus
// six revolute joints. Link frames have their origin at the proximal joint;
// segments extend along the local axis given below at q = 0.
inline constexpr int kNumDof = 6;       // actuated joints
inline constexpr int kNumBodies = 7;    // torso + 2x(thigh, shank) + 2 arms
inline constexpr int kGenDof = 9;       // base (x, z, pitch) + joints

enum BodyId { kTorso = 0, kThighL, kShankL, kThighR, kShankR, kArmL, kArmR };
enum JointId { kHipL = 0, kKneeL, kHipR, kKneeR, kShoulderL, kShoulderR };
enum SiteId {
  kFootL = 0,
  kFootR,
  kKneePtL,
  kKneePtR,
  kHandL,
  kHandR,
  kPelvis,
  kHead,
  kNumSites
};

using JointVec = std::array<double, kNumDof>;

struct RobotModel {
  std::array<double, kNumBodies> mass;
  std::array<double, kNumBodies> inertia;   // about own CoM
  std::array<Vec2, kNumBodies> com;         // in link frame
  std::array<int, kNumBodies> parent;       // parent body index, -1 for torso
  std::array<Vec2, kNumDof> joint_anchor;   // joint origin in parent frame; joint j drives body j+1
  JointVec joint_lo, joint_hi;
  JointVec default_q;
  double default_base_height = 0.62;
  double action_scale = 0.6;                // rad of PD-target authority per unit action
  std::array<int, kNumSites> site_body;
  std::array<Vec2, kNumSites> site_local;

  void validate() const;
};

RobotModel default_robot_model();

struct BoxModel {
  Vec2 half_extents{0.30, 0.30};
  double mass = 2.0;
  double inertia() const {
    const double w = 2.0 * half_extents.x, h = 2.0 * half_extents.z;
    return mass * (w * w + h * h) / 12.0;
  }
};

struct RobotState {
  Vec2 base_pos{0.0, 0.62};
  double pitch = 0.0;
  Vec2 base_vel{0.0, 0.0};
  double pitch_rate = 0.0;
  JointVec q{};
  JointVec qd{};
};

struct ObjectState {
  Vec2 pos{0.0, 0.30};
  double angle = 0.0;
  Vec2 vel{0.0, 0.0};
  double angle_rate = 0.0;
};

struct PhysicalParams {
  double robot_friction_static = 0.95;
  double robot_friction_dynamic = 0.75;
  double robot_restitution = 0.0;
  double object_friction_static = 0.35;
  double object_friction_dynamic = 0.30;
  double object_restitution = 0.0;
  double object_mass_scale = 1.0;
  Vec2 com_offset{0.0, 0.0};               // shift of the torso CoM
  JointVec joint_default_offset{};         // actuator zero-calibration error

  void validate() const;
};

struct SimConfig {
  double physics_dt = 0.005;
  int control_decimation = 4;
  double gravity = 9.81;
  double contact_stiffness = 2.0e4;
  double contact_damping = 200.0;
  double slip_velocity = 0.005;            // friction regularization band, m/s
  double ground_friction_static = 1.0;
  double ground_friction_dynamic = 0.9;
  double ground_restitution = 0.0;
  JointVec pd_kp{120.0, 120.0, 120.0, 120.0, 60.0, 60.0};
  JointVec pd_kd{8.0, 8.0, 8.0, 8.0, 4.0, 4.0};
  JointVec torque_limit{80.0, 80.0, 80.0, 80.0, 40.0, 40.0};
  double limit_stiffness = 2000.0;
  double limit_damping = 10.0;
  double limit_excursion = 0.05;           // hard clamp beyond joint range, rad
  double max_speed = 1.0e3;                // divergence guard

  void validate() const;
};

inline constexpr double kContactForceThreshold = 1.0;  // N, contact flag cutoff

struct PairForce {
  double normal = 0.0;
  double tangent = 0.0;
  bool flag() const { return normal > kContactForceThreshold; }
};

// Per control step, max-normal-force aggregation over substeps. Robot pairs
// are per site against ground and against the box; box-ground sums the
// corner forces within a substep before aggregation.
struct ContactReport {
  std::array<PairForce, kNumSites> ground{};
  std::array<PairForce, kNumSites> object{};
  PairForce box_ground{};

  bool robot_object_contact() const {
    for (const auto& p : object)
      if (p.flag()) return true;
    return false;
  }
};

struct StepResult {
  ContactReport contacts;
  JointVec torques{};  // applied at the last substep, after clamping
};

struct Snapshot {
  RobotState robot;
  ObjectState object;
  PhysicalParams params;
  double time = 0.0;
};

class Simulator {
 public:
  Simulator(const RobotModel& robot, const BoxModel& box, const SimConfig& config);

  void reset(const RobotState& robot, const ObjectState& object);
  void set_state(const RobotState& robot, const ObjectState& object);
  void set_physical_params(const PhysicalParams& params);
  const PhysicalParams& physical_params() const { return params_; }

  // One control step: control_decimation substeps of PD torques toward
  // joint_targets. Throws DivergenceError on non-finite or runaway state.
  StepResult step(const JointVec& joint_targets);

  const RobotState& robot() const { return robot_; }
  const ObjectState& object() const { return object_; }
  double time() const { return time_; }
  const RobotModel& model() const { return model_; }
  const BoxModel& box() const { return box_; }
  const SimConfig& config() const { return config_; }

  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

  void apply_robot_impulse(const Vec2& dv, double domega);
  void apply_object_impulse(const Vec2& dv, double domega);

  // Kinetic + gravitational + contact/limit spring energy (diagnostic).
  double total_energy() const;

  // Deepest interpenetration (robot-ground, robot-box, box-ground), m.
  static double max_penetration(const RobotModel& model, const BoxModel& box,
                                const RobotState& robot, const ObjectState& object);

  static void forward_kinematics(const RobotModel& model, const RobotState& state,
                                 std::array<Vec2, kNumBodies>& pos,
                                 std::array<double, kNumBodies>& angle);
  static void body_velocities(const RobotModel& model, const RobotState& state,
                              std::array<Vec2, kNumBodies>& vel,
                              std::array<double, kNumBodies>& angvel);
  static void site_states(const RobotModel& model, const RobotState& state,
                          std::array<Vec2, kNumSites>& pos, std::array<Vec2, kNumSites>& vel);

  // tau = kp (q_cmd - q) - kd qd, clamped to the torque limits.
  static JointVec pd_torque(const SimConfig& config, const JointVec& q, const JointVec& qd,
                            const JointVec& q_cmd);

 private:
  void substep(const JointVec& targets, StepResult& result, bool last_substep);
  void check_finite() const;

  RobotModel model_;
  BoxModel box_;
  SimConfig config_;
  PhysicalParams params_;
  RobotState robot_;
  ObjectState object_;
  double time_ = 0.0;
};

}  // namespace locomanip::sim
