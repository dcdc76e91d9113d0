#include "locomanip/rewards.hpp"

#include <cmath>

#include "locomanip/errors.hpp"

namespace locomanip::rewards {

using sim::kNumBodies;
using sim::kNumDof;
using sim::kNumSites;

void RewardConfig::validate() const {
  const double sigmas[] = {s_joint_pos,   s_root_pos,   s_root_orient,   s_body_pos,
                           s_body_orient, s_body_linvel, s_body_angvel,  s_obj_pos,
                           s_obj_orient,  s_obj_linvel, s_obj_angvel,    s_obj_body_pos,
                           s_obj_body_orient};
  for (double s : sigmas)
    if (!(s > 0.0)) throw ConfigError("reward config: kernel scales must be positive");
  if (!(contact_force_threshold > 0.0))
    throw ConfigError("reward config: contact force threshold must be positive");
}

void TerminationConfig::validate() const {
  if (!(root_pos > 0.0 && root_orient > 0.0 && body_pos > 0.0 && object_pos > 0.0 &&
        object_orient > 0.0))
    throw ConfigError("termination config: thresholds must be positive");
}

void RewardBreakdown::finalize() {
  r_track = joint_pos + root_pos + root_orient + body_pos + body_orient + body_linvel +
            body_angvel + obj_pos + obj_orient + obj_linvel + obj_angvel;
  r_int = obj_body_pos + obj_body_orient + contact_consistency;
  r_reg = feet_air_time + feet_slip + undesired_contact + joint_acc + joint_torque + action_rate +
          joint_limits;
  total = r_track + r_int + r_reg;
}

double exp_kernel(double error_norm, double sigma, double weight) {
  if (!(sigma > 0.0)) throw ConfigError("exp_kernel: sigma must be positive");
  return weight * std::exp(-(error_norm * error_norm) / (sigma * sigma));
}

namespace {

// Root-mean-square over per-body scalar errors; "mean body error" semantics
// for multi-body tracking rows.
template <typename F>
double rms_over(int n, F&& per_item) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sqr(per_item(i));
  return std::sqrt(s / n);
}

}  // namespace

void tracking_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                     const sim::ObjectState& object, const ReferenceFrame& ref,
                     const RewardConfig& cfg, RewardBreakdown& out) {
  double qe = 0.0;
  for (int j = 0; j < kNumDof; ++j) qe += sqr(robot.q[j] - ref.robot.q[j]);
  out.joint_pos = exp_kernel(std::sqrt(qe), cfg.s_joint_pos, cfg.w_joint_pos);

  out.root_pos = exp_kernel((robot.base_pos - ref.robot.base_pos).norm(), cfg.s_root_pos,
                            cfg.w_root_pos);
  out.root_orient = exp_kernel(std::abs(wrap_angle(robot.pitch - ref.robot.pitch)),
                               cfg.s_root_orient, cfg.w_root_orient);

  std::array<Vec2, kNumBodies> pos, rpos, vel, rvel;
  std::array<double, kNumBodies> ang, rang, angv, rangv;
  sim::Simulator::forward_kinematics(model, robot, pos, ang);
  sim::Simulator::forward_kinematics(model, ref.robot, rpos, rang);
  sim::Simulator::body_velocities(model, robot, vel, angv);
  sim::Simulator::body_velocities(model, ref.robot, rvel, rangv);

  const double body_pos_err = rms_over(kNumBodies, [&](int i) {
    const Vec2 a = rotate_inv(robot.pitch, pos[i] - robot.base_pos);
    const Vec2 b = rotate_inv(ref.robot.pitch, rpos[i] - ref.robot.base_pos);
    return (a - b).norm();
  });
  out.body_pos = exp_kernel(body_pos_err, cfg.s_body_pos, cfg.w_body_pos);

  const double body_orient_err = rms_over(kNumBodies, [&](int i) {
    return wrap_angle((ang[i] - robot.pitch) - (rang[i] - ref.robot.pitch));
  });
  out.body_orient = exp_kernel(body_orient_err, cfg.s_body_orient, cfg.w_body_orient);

  const double body_linvel_err = rms_over(kNumBodies, [&](int i) { return (vel[i] - rvel[i]).norm(); });
  out.body_linvel = exp_kernel(body_linvel_err, cfg.s_body_linvel, cfg.w_body_linvel);

  const double body_angvel_err = rms_over(kNumBodies, [&](int i) { return angv[i] - rangv[i]; });
  out.body_angvel = exp_kernel(body_angvel_err, cfg.s_body_angvel, cfg.w_body_angvel);

  out.obj_pos = exp_kernel((object.pos - ref.object.pos).norm(), cfg.s_obj_pos, cfg.w_obj_pos);
  out.obj_orient = exp_kernel(std::abs(wrap_angle(object.angle - ref.object.angle)),
                              cfg.s_obj_orient, cfg.w_obj_orient);
  out.obj_linvel = exp_kernel((object.vel - ref.object.vel).norm(), cfg.s_obj_linvel,
                              cfg.w_obj_linvel);
  out.obj_angvel = exp_kernel(std::abs(object.angle_rate - ref.object.angle_rate),
                              cfg.s_obj_angvel, cfg.w_obj_angvel);
}

void interaction_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                        const sim::ObjectState& object, const sim::ContactReport& contacts,
                        const ReferenceFrame& ref, const RewardConfig& cfg,
                        const InteractionSites& ee, RewardBreakdown& out) {
  std::array<Vec2, kNumSites> spos, svel, rspos, rsvel;
  sim::Simulator::site_states(model, robot, spos, svel);
  sim::Simulator::site_states(model, ref.robot, rspos, rsvel);
  std::array<double, kNumBodies> ang, rang;
  std::array<Vec2, kNumBodies> bpos, rbpos;
  sim::Simulator::forward_kinematics(model, robot, bpos, ang);
  sim::Simulator::forward_kinematics(model, ref.robot, rbpos, rang);

  const int n = static_cast<int>(ee.sites.size());
  const double pos_err = rms_over(n, [&](int i) {
    const int s = ee.sites[i];
    const Vec2 a = rotate_inv(robot.pitch, object.pos - spos[s]);
    const Vec2 b = rotate_inv(ref.robot.pitch, ref.object.pos - rspos[s]);
    return (a - b).norm();
  });
  out.obj_body_pos = exp_kernel(pos_err, cfg.s_obj_body_pos, cfg.w_obj_body_pos);

  const double orient_err = rms_over(n, [&](int i) {
    const int b = model.site_body[ee.sites[i]];
    return wrap_angle((object.angle - ang[b]) - (ref.object.angle - rang[b]));
  });
  out.obj_body_orient = exp_kernel(orient_err, cfg.s_obj_body_orient, cfg.w_obj_body_orient);

  bool touching = false;
  for (int s : ee.sites)
    if (contacts.object[s].normal > cfg.contact_force_threshold) touching = true;
  out.contact_consistency = (touching == ref.contact_label) ? cfg.w_contact_consistency : 0.0;
}

void regularization_reward(const sim::RobotModel& model, const RegularizationInputs& in,
                           const RewardConfig& cfg, RewardBreakdown& out) {
  out.feet_air_time = 0.0;
  for (int f = 0; f < 2; ++f)
    if (in.touchdown_air_time[f] >= 0.0)
      out.feet_air_time += cfg.w_feet_air_time *
                           std::max(in.touchdown_air_time[f] - cfg.feet_air_time_target,
                                    -cfg.feet_air_time_target);
  out.feet_slip = 0.0;
  for (int f = 0; f < 2; ++f)
    if (in.foot_contact[f]) out.feet_slip += cfg.w_feet_slip * std::abs(in.foot_slip_speed[f]);

  out.undesired_contact = cfg.w_undesired_contact * in.undesired_contact_count;

  double acc2 = 0.0, tau2 = 0.0, rate2 = 0.0;
  int out_of_limits = 0;
  for (int j = 0; j < kNumDof; ++j) {
    acc2 += sqr(in.joint_acc[j]);
    tau2 += sqr(in.torques[j]);
    rate2 += sqr(in.action[j] - in.prev_action[j]);
    if (in.q[j] < model.joint_lo[j] || in.q[j] > model.joint_hi[j]) ++out_of_limits;
  }
  out.joint_acc = cfg.w_joint_acc * acc2;
  out.joint_torque = cfg.w_joint_torque * tau2;
  out.action_rate = cfg.w_action_rate * rate2;
  out.joint_limits = cfg.w_joint_limits * out_of_limits;
}

RewardBreakdown compute_reward(const sim::RobotModel& model, const sim::RobotState& robot,
                               const sim::ObjectState& object, const sim::ContactReport& contacts,
                               const ReferenceFrame& ref, const RegularizationInputs& reg,
                               const RewardConfig& cfg, const InteractionSites& ee) {
  RewardBreakdown out;
  tracking_reward(model, robot, object, ref, cfg, out);
  interaction_reward(model, robot, object, contacts, ref, cfg, ee, out);
  regularization_reward(model, reg, cfg, out);
  out.finalize();
  return out;
}

const char* termination_reason_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::kNone: return "none";
    case TerminationReason::kRootPosition: return "root_position";
    case TerminationReason::kRootOrientation: return "root_orientation";
    case TerminationReason::kBodyPosition: return "body_position";
    case TerminationReason::kObjectPosition: return "object_position";
    case TerminationReason::kObjectOrientation: return "object_orientation";
  }
  return "unknown";
}

TerminationReason check_termination(const sim::RobotModel& model, const sim::RobotState& robot,
                                    const sim::ObjectState& object, const ReferenceFrame& ref,
                                    const TerminationConfig& cfg) {
  if ((robot.base_pos - ref.robot.base_pos).norm() > cfg.root_pos)
    return TerminationReason::kRootPosition;
  if (std::abs(wrap_angle(robot.pitch - ref.robot.pitch)) > cfg.root_orient)
    return TerminationReason::kRootOrientation;

  std::array<Vec2, kNumBodies> pos, rpos;
  std::array<double, kNumBodies> ang, rang;
  sim::Simulator::forward_kinematics(model, robot, pos, ang);
  sim::Simulator::forward_kinematics(model, ref.robot, rpos, rang);
  double worst = 0.0;
  for (int i = 0; i < kNumBodies; ++i) worst = std::max(worst, (pos[i] - rpos[i]).norm());
  if (worst > cfg.body_pos) return TerminationReason::kBodyPosition;

  if ((object.pos - ref.object.pos).norm() > cfg.object_pos)
    return TerminationReason::kObjectPosition;
  if (std::abs(wrap_angle(object.angle - ref.object.angle)) > cfg.object_orient)
    return TerminationReason::kObjectOrientation;
  return TerminationReason::kNone;
}

}  // namespace locomanip::rewards
