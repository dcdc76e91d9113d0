#include "locomanip/priors.hpp"

#include <algorithm>
#include <cmath>

#include "locomanip/errors.hpp"

namespace locomanip::priors {
namespace {

constexpr double kFrameDt = 0.02;

double ease(double u) {
  u = clampd(u, 0.0, 1.0);
  return 0.5 * (1.0 - std::cos(M_PI * u));
}

double lerp(double a, double b, double s) { return a + (b - a) * s; }

struct ScriptPose {
  Vec2 pelvis;
  double pitch = 0.0;
  double foot_x[2] = {0.0, 0.0};  // world x, feet stay on the ground
  double arm_q[2] = {0.0, 0.0};
};

// Geometry shared by both task scripts, derived from the robot model at the
// sampled start configuration.
struct ScriptContext {
  const sim::RobotModel* model;
  double h_stand;        // standing pelvis height with both feet grounded
  double rel_default[2]; // default foot x offsets from the pelvis
  double thigh, shank, arm;
  Vec2 shoulder_local;
};

ScriptContext make_context(const sim::RobotModel& model) {
  ScriptContext c;
  c.model = &model;
  sim::RobotState st;
  st.base_pos = {0.0, 0.0};
  st.q = model.default_q;
  std::array<Vec2, sim::kNumSites> pos, vel;
  sim::Simulator::site_states(model, st, pos, vel);
  const double foot_drop = std::min(pos[sim::kFootL].z, pos[sim::kFootR].z);
  c.h_stand = -foot_drop - 0.01;
  c.rel_default[0] = pos[sim::kFootL].x;
  c.rel_default[1] = pos[sim::kFootR].x;
  c.thigh = model.joint_anchor[sim::kKneeL].norm();
  c.shank = model.site_local[sim::kFootL].norm();
  c.arm = model.site_local[sim::kHandL].norm();
  c.shoulder_local = model.joint_anchor[sim::kShoulderL];
  return c;
}

// Shoulder angle that puts the hand at horizontal offset dx from the shoulder
// with the hand below it; fails when the target leaves the reach circle.
double arm_angle_for(const ScriptContext& c, double dx, double pitch, double* hand_drop) {
  const double arg = dx / c.arm;
  if (std::abs(arg) >= 0.999)
    throw ConfigError("prior script: hand target beyond arm reach");
  const double phi = std::asin(arg);
  if (hand_drop) *hand_drop = c.arm * std::cos(phi);
  return phi - pitch;
}

PriorFrame make_frame(const ScriptContext& c, const ScriptPose& pose, const sim::ObjectState& obj,
                      bool label) {
  PriorFrame f;
  f.robot.base_pos = pose.pelvis;
  f.robot.pitch = pose.pitch;
  for (int s = 0; s < 2; ++s) {
    const Vec2 foot_w{pose.foot_x[s], 0.0};
    const Vec2 w = rotate_inv(pose.pitch, foot_w - pose.pelvis);
    double hip, knee;
    leg_ik(w.x, w.z, c.thigh, c.shank, hip, knee);
    f.robot.q[s == 0 ? sim::kHipL : sim::kHipR] = hip;
    f.robot.q[s == 0 ? sim::kKneeL : sim::kKneeR] = knee;
  }
  f.robot.q[sim::kShoulderL] = pose.arm_q[0];
  f.robot.q[sim::kShoulderR] = pose.arm_q[1];
  for (int j = 0; j < sim::kNumDof; ++j) {
    if (f.robot.q[j] < c.model->joint_lo[j] - 1e-9 || f.robot.q[j] > c.model->joint_hi[j] + 1e-9)
      throw ConfigError("prior script: pose violates joint limits");
  }
  f.object = obj;
  f.label = label;
  return f;
}

// Alternating-foot slide: over each 24-frame period the pelvis advance is
// recovered by one foot at a time at twice the glide rate.
void shuffle_feet(int k_in_phase, double adv, double foot_x[2]) {
  const int u = k_in_phase % 24;
  foot_x[u < 12 ? 0 : 1] += 2.0 * adv;
}

KinematicPrior generate_push(const TaskSpec& task, const ScriptContext& c, Rng& rng) {
  const double hx = task.box.half_extents.x;
  const double hz = task.box.half_extents.z;
  const double x_c = rng.uniform(task.start_lo, task.start_hi);
  const double dist = rng.uniform(task.dist_lo, task.dist_hi);

  const double pitch_p = -0.25;
  const double crouch = 0.10;
  const double grip_z = 2.0 * hz - 0.10;  // upper face, below the top edge
  if (grip_z < 0.05 || grip_z > 2.0 * hz - 0.05)
    throw ConfigError("prior script: push grip height outside the box face");

  const Vec2 sh_off = rotate(pitch_p, c.shoulder_local);
  const double sh_z = (c.h_stand - crouch) + sh_off.z;
  const double drop_needed = sh_z - grip_z;
  if (drop_needed <= 0.0 || drop_needed >= c.arm)
    throw ConfigError("prior script: push grip height beyond arm reach");
  const double dx = std::sqrt(c.arm * c.arm - drop_needed * drop_needed);
  const double q_push = arm_angle_for(c, dx, pitch_p, nullptr);

  const double face_x0 = x_c - hx;
  const double x_r = face_x0 - sh_off.x - dx;

  const int n_settle = 20, n_reach = 40, n_release = 25, n_tail = 15;
  const double v_push = 0.12;
  const int n_push = std::max(1, static_cast<int>(std::llround(dist / (v_push * kFrameDt))));
  const double adv = dist / n_push;

  KinematicPrior out;
  out.frame_dt = kFrameDt;
  out.task_id = task.name();
  out.tolerance = task.tolerance;
  out.goal_pos = {x_c + dist, hz};
  out.goal_angle = 0.0;

  sim::ObjectState obj;
  obj.pos = {x_c, hz};

  ScriptPose pose;
  pose.pelvis = {0.0, c.h_stand};
  pose.foot_x[0] = c.rel_default[0];
  pose.foot_x[1] = c.rel_default[1];
  pose.arm_q[0] = pose.arm_q[1] = c.model->default_q[sim::kShoulderL];

  for (int k = 0; k < n_settle; ++k) out.frames.push_back(make_frame(c, pose, obj, false));

  const double q0 = pose.arm_q[0];
  const double rel_push[2] = {0.18, -0.06};
  for (int k = 1; k <= n_reach; ++k) {
    const double s = ease(static_cast<double>(k) / n_reach);
    pose.pelvis = {lerp(0.0, x_r, s), lerp(c.h_stand, c.h_stand - crouch, s)};
    pose.pitch = lerp(0.0, pitch_p, s);
    pose.arm_q[0] = pose.arm_q[1] = lerp(q0, q_push, s);
    for (int ft = 0; ft < 2; ++ft)
      pose.foot_x[ft] = pose.pelvis.x + lerp(c.rel_default[ft], rel_push[ft], s);
    out.frames.push_back(make_frame(c, pose, obj, k == n_reach));
  }

  for (int k = 0; k < n_push; ++k) {
    pose.pelvis.x += adv;
    obj.pos.x += adv;
    shuffle_feet(k, adv, pose.foot_x);
    out.frames.push_back(make_frame(c, pose, obj, true));
  }

  const ScriptPose at_end = pose;
  for (int k = 1; k <= n_release; ++k) {
    const double s = ease(static_cast<double>(k) / n_release);
    pose.pelvis.z = lerp(c.h_stand - crouch, c.h_stand, s);
    pose.pitch = lerp(pitch_p, 0.0, s);
    pose.arm_q[0] = pose.arm_q[1] = lerp(q_push, c.model->default_q[sim::kShoulderL], s);
    for (int ft = 0; ft < 2; ++ft)
      pose.foot_x[ft] =
          lerp(at_end.foot_x[ft], at_end.pelvis.x + c.rel_default[ft], s);
    out.frames.push_back(make_frame(c, pose, obj, false));
  }
  for (int k = 0; k < n_tail; ++k) out.frames.push_back(make_frame(c, pose, obj, false));

  finalize_velocities(out);
  return out;
}

KinematicPrior generate_carry(const TaskSpec& task, const ScriptContext& c, Rng& rng) {
  const double hx = task.box.half_extents.x;
  const double hz = task.box.half_extents.z;
  const double x_c = rng.uniform(task.start_lo, task.start_hi);
  const double dist = rng.uniform(task.dist_lo, task.dist_hi);

  const double pitch_p = -0.20;
  const double crouch_grasp = 0.16;
  const double lift = 0.12;

  const Vec2 sh_off = rotate(pitch_p, c.shoulder_local);
  const double sh_z = (c.h_stand - crouch_grasp) + sh_off.z;
  const double grip_far_z = hz * 1.2;
  const double drop_far = sh_z - grip_far_z;
  if (drop_far <= 0.0 || drop_far >= c.arm)
    throw ConfigError("prior script: carry grip beyond arm reach");
  const double dx_far = std::sqrt(c.arm * c.arm - drop_far * drop_far);
  const double dx_near = dx_far - 2.0 * hx;
  double drop_near;
  const double q_far = arm_angle_for(c, dx_far, pitch_p, nullptr);
  const double q_near = arm_angle_for(c, dx_near, pitch_p, &drop_near);
  const double grip_near_z = sh_z - drop_near;
  if (grip_near_z < 0.05 || grip_near_z > 2.0 * hz - 0.05 || grip_far_z < 0.05 ||
      grip_far_z > 2.0 * hz - 0.05)
    throw ConfigError("prior script: carry grip height outside the box face");

  const double x_r = (x_c + hx) - sh_off.x - dx_far;

  const int n_settle = 20, n_reach = 40, n_lift = 30, n_lower = 30, n_release = 20, n_tail = 15;
  const double v_carry = 0.10;
  const int n_carry = std::max(1, static_cast<int>(std::llround(dist / (v_carry * kFrameDt))));
  const double adv = dist / n_carry;

  KinematicPrior out;
  out.frame_dt = kFrameDt;
  out.task_id = task.name();
  out.tolerance = task.tolerance;
  out.goal_pos = {x_c + dist, hz};
  out.goal_angle = 0.0;

  sim::ObjectState obj;
  obj.pos = {x_c, hz};

  ScriptPose pose;
  pose.pelvis = {0.0, c.h_stand};
  pose.foot_x[0] = c.rel_default[0];
  pose.foot_x[1] = c.rel_default[1];
  pose.arm_q[0] = pose.arm_q[1] = c.model->default_q[sim::kShoulderL];

  for (int k = 0; k < n_settle; ++k) out.frames.push_back(make_frame(c, pose, obj, false));

  const double q0 = pose.arm_q[0];
  const double rel_carry[2] = {0.18, -0.06};
  for (int k = 1; k <= n_reach; ++k) {
    const double s = ease(static_cast<double>(k) / n_reach);
    pose.pelvis = {lerp(0.0, x_r, s), lerp(c.h_stand, c.h_stand - crouch_grasp, s)};
    pose.pitch = lerp(0.0, pitch_p, s);
    pose.arm_q[0] = lerp(q0, q_near, s);
    pose.arm_q[1] = lerp(q0, q_far, s);
    for (int ft = 0; ft < 2; ++ft)
      pose.foot_x[ft] = pose.pelvis.x + lerp(c.rel_default[ft], rel_carry[ft], s);
    out.frames.push_back(make_frame(c, pose, obj, k == n_reach));
  }

  // The grasp is rigid from here: constant arm angles, the box rides the
  // pelvis through lift, glide, and lower.
  const double z_grasp = c.h_stand - crouch_grasp;
  for (int k = 1; k <= n_lift; ++k) {
    const double s = ease(static_cast<double>(k) / n_lift);
    pose.pelvis.z = z_grasp + lift * s;
    obj.pos.z = hz + lift * s;
    out.frames.push_back(make_frame(c, pose, obj, true));
  }
  for (int k = 0; k < n_carry; ++k) {
    pose.pelvis.x += adv;
    obj.pos.x += adv;
    shuffle_feet(k, adv, pose.foot_x);
    out.frames.push_back(make_frame(c, pose, obj, true));
  }
  for (int k = 1; k <= n_lower; ++k) {
    const double s = ease(static_cast<double>(k) / n_lower);
    pose.pelvis.z = z_grasp + lift * (1.0 - s);
    obj.pos.z = hz + lift * (1.0 - s);
    out.frames.push_back(make_frame(c, pose, obj, true));
  }

  const ScriptPose at_end = pose;
  for (int k = 1; k <= n_release; ++k) {
    const double s = ease(static_cast<double>(k) / n_release);
    pose.pelvis.z = lerp(z_grasp, c.h_stand, s);
    pose.pitch = lerp(pitch_p, 0.0, s);
    pose.arm_q[0] = lerp(q_near, q0, s);
    pose.arm_q[1] = lerp(q_far, q0, s);
    for (int ft = 0; ft < 2; ++ft)
      pose.foot_x[ft] = lerp(at_end.foot_x[ft], at_end.pelvis.x + c.rel_default[ft], s);
    out.frames.push_back(make_frame(c, pose, obj, false));
  }
  for (int k = 0; k < n_tail; ++k) out.frames.push_back(make_frame(c, pose, obj, false));

  finalize_velocities(out);
  return out;
}

double wrapped_window_mean(const std::vector<double>& x, int lo, int hi) {
  double s = 0.0, cp = 0.0;
  for (int i = lo; i <= hi; ++i) {
    s += std::sin(x[i]);
    cp += std::cos(x[i]);
  }
  return std::atan2(s, cp);
}

double window_mean(const std::vector<double>& x, int lo, int hi) {
  double s = 0.0;
  for (int i = lo; i <= hi; ++i) s += x[i];
  return s / (hi - lo + 1);
}

}  // namespace

TaskSpec TaskSpec::push_box() {
  TaskSpec t;
  t.kind = TaskKind::kPushBox;
  t.box.half_extents = {0.30, 0.30};
  t.box.mass = 2.0;
  t.start_lo = 0.72;
  t.start_hi = 0.84;
  t.dist_lo = 0.18;
  t.dist_hi = 0.30;
  t.tolerance = 0.15;
  return t;
}

TaskSpec TaskSpec::carry_box() {
  TaskSpec t;
  t.kind = TaskKind::kCarryBox;
  t.box.half_extents = {0.15, 0.40};
  t.box.mass = 1.0;
  t.start_lo = 0.45;
  t.start_hi = 0.55;
  t.dist_lo = 0.15;
  t.dist_hi = 0.25;
  t.tolerance = 0.15;
  return t;
}

TaskSpec task_by_name(const std::string& name) {
  if (name == "push_box") return TaskSpec::push_box();
  if (name == "carry_box") return TaskSpec::carry_box();
  throw ConfigError("unknown task: " + name);
}

NoiseModel NoiseModel::defaults() {
  NoiseModel n;
  n.pose_jitter_pos = 0.008;
  n.pose_jitter_ang = 0.015;
  n.drift_rate = 0.008;
  n.penetration_bias = 0.02;
  n.contact_flip_prob = 0.05;
  n.contact_lag = 2;
  n.dropout_prob = 0.02;
  n.dropout_len = 4;
  return n;
}

bool NoiseModel::is_zero() const {
  return pose_jitter_pos == 0.0 && pose_jitter_ang == 0.0 && drift_rate == 0.0 &&
         penetration_bias == 0.0 && contact_flip_prob == 0.0 && contact_lag == 0 &&
         dropout_prob == 0.0;
}

void leg_ik(double target_x, double target_z, double thigh_len, double shank_len, double& hip,
            double& knee) {
  double r = std::sqrt(target_x * target_x + target_z * target_z);
  const double r_max = thigh_len + shank_len - 1e-9;
  const double r_min = std::abs(thigh_len - shank_len) + 1e-9;
  r = clampd(r, r_min, r_max);
  const double cos_inner =
      clampd((thigh_len * thigh_len + shank_len * shank_len - r * r) /
                 (2.0 * thigh_len * shank_len),
             -1.0, 1.0);
  const double inner = std::acos(cos_inner);
  knee = inner - M_PI;
  const double phi_t = std::atan2(target_x, -target_z);
  const double cos_g =
      clampd((thigh_len * thigh_len + r * r - shank_len * shank_len) / (2.0 * thigh_len * r), -1.0,
             1.0);
  hip = phi_t + std::acos(cos_g);
}

KinematicPrior generate_clean_trajectory(const TaskSpec& task, const sim::RobotModel& model,
                                         uint64_t seed) {
  Rng rng(seed);
  const ScriptContext c = make_context(model);
  return task.kind == TaskKind::kPushBox ? generate_push(task, c, rng)
                                         : generate_carry(task, c, rng);
}

void finalize_velocities(KinematicPrior& traj) {
  const int T = traj.length();
  if (T == 0) return;
  const double dt = traj.frame_dt;
  auto diff = [&](auto get, auto set) {
    std::vector<double> v(T);
    for (int t = 0; t < T; ++t) v[t] = get(traj.frames[t]);
    for (int t = 0; t < T; ++t) {
      double d;
      if (T == 1)
        d = 0.0;
      else if (t == 0)
        d = (v[1] - v[0]) / dt;
      else if (t == T - 1)
        d = (v[T - 1] - v[T - 2]) / dt;
      else
        d = (v[t + 1] - v[t - 1]) / (2.0 * dt);
      set(traj.frames[t], d);
    }
  };
  auto diff_ang = [&](auto get, auto set) {
    std::vector<double> v(T);
    for (int t = 0; t < T; ++t) v[t] = get(traj.frames[t]);
    for (int t = 0; t < T; ++t) {
      double d;
      if (T == 1)
        d = 0.0;
      else if (t == 0)
        d = wrap_angle(v[1] - v[0]) / dt;
      else if (t == T - 1)
        d = wrap_angle(v[T - 1] - v[T - 2]) / dt;
      else
        d = wrap_angle(v[t + 1] - v[t - 1]) / (2.0 * dt);
      set(traj.frames[t], d);
    }
  };

  diff([](const PriorFrame& f) { return f.robot.base_pos.x; },
       [](PriorFrame& f, double d) { f.robot.base_vel.x = d; });
  diff([](const PriorFrame& f) { return f.robot.base_pos.z; },
       [](PriorFrame& f, double d) { f.robot.base_vel.z = d; });
  diff_ang([](const PriorFrame& f) { return f.robot.pitch; },
           [](PriorFrame& f, double d) { f.robot.pitch_rate = d; });
  for (int j = 0; j < sim::kNumDof; ++j) {
    diff([j](const PriorFrame& f) { return f.robot.q[j]; },
         [j](PriorFrame& f, double d) { f.robot.qd[j] = d; });
  }
  diff([](const PriorFrame& f) { return f.object.pos.x; },
       [](PriorFrame& f, double d) { f.object.vel.x = d; });
  diff([](const PriorFrame& f) { return f.object.pos.z; },
       [](PriorFrame& f, double d) { f.object.vel.z = d; });
  diff_ang([](const PriorFrame& f) { return f.object.angle; },
           [](PriorFrame& f, double d) { f.object.angle_rate = d; });
}

KinematicPrior inject_noise(const KinematicPrior& traj, const NoiseModel& noise, uint64_t seed,
                            NoiseStats* stats) {
  if (stats) *stats = NoiseStats{};
  if (noise.is_zero()) return traj;
  if (noise.dropout_len < 1) throw ConfigError("noise model: dropout_len must be positive");

  KinematicPrior out = traj;
  Rng rng(seed);
  const int T = out.length();
  if (T == 0) return out;

  const double psi = rng.uniform(0.0, 2.0 * M_PI);
  const Vec2 drift_dir{std::cos(psi), std::sin(psi)};
  double jitter_sum = 0.0;

  for (int t = 0; t < T; ++t) {
    PriorFrame& f = out.frames[t];
    const Vec2 drift = drift_dir * (noise.drift_rate * t * out.frame_dt);
    f.robot.base_pos += drift;
    f.object.pos += drift;

    const Vec2 jit{rng.normal() * noise.pose_jitter_pos, rng.normal() * noise.pose_jitter_pos};
    f.robot.base_pos += jit;
    jitter_sum += jit.norm();
    f.robot.pitch += rng.normal() * noise.pose_jitter_ang;
    for (int j = 0; j < sim::kNumDof; ++j) f.robot.q[j] += rng.normal() * noise.pose_jitter_ang;
    f.object.pos.x += rng.normal() * noise.pose_jitter_pos;
    f.object.pos.z += rng.normal() * noise.pose_jitter_pos;
    f.object.angle += rng.normal() * noise.pose_jitter_ang;

    if (noise.penetration_bias != 0.0) {
      const Vec2 to_robot = f.robot.base_pos - f.object.pos;
      const double n = to_robot.norm();
      if (n > 1e-9) f.object.pos += to_robot * (noise.penetration_bias / n);
    }
  }

  for (int t = 1; t < T; ++t) {
    if (rng.uniform01() < noise.dropout_prob) {
      const int gap_end = std::min(T, t + noise.dropout_len);
      for (int k = t; k < gap_end; ++k) {
        const bool label = out.frames[k].label;
        out.frames[k] = out.frames[t - 1];
        out.frames[k].label = label;
      }
      if (stats) stats->dropout_gaps++;
      t = gap_end;
    }
  }

  if (noise.contact_lag > 0) {
    std::vector<bool> lagged(T);
    for (int t = 0; t < T; ++t) lagged[t] = out.frames[std::max(0, t - noise.contact_lag)].label;
    for (int t = 0; t < T; ++t) out.frames[t].label = lagged[t];
  }
  for (int t = 0; t < T; ++t) {
    if (rng.uniform01() < noise.contact_flip_prob) {
      out.frames[t].label = !out.frames[t].label;
      if (stats) stats->label_flips++;
    }
  }

  if (stats) stats->mean_jitter = jitter_sum / T;
  finalize_velocities(out);
  return out;
}

std::vector<bool> infer_contacts_by_velocity(const KinematicPrior& traj, double v_thresh) {
  const int T = traj.length();
  std::vector<bool> labels(T, false);
  if (T < 2) return labels;
  for (int t = 1; t < T; ++t) {
    const Vec2 dp = traj.frames[t].object.pos - traj.frames[t - 1].object.pos;
    labels[t] = dp.norm() / traj.frame_dt > v_thresh;
  }
  labels[0] = labels[1];
  return labels;
}

std::vector<bool> contact_oracle(const KinematicPrior& traj, const sim::RobotModel& model,
                                 const sim::BoxModel& box, double epsilon) {
  const int T = traj.length();
  std::vector<bool> labels(T, false);
  std::array<Vec2, sim::kNumSites> pos, vel;
  for (int t = 0; t < T; ++t) {
    const PriorFrame& f = traj.frames[t];
    sim::Simulator::site_states(model, f.robot, pos, vel);
    for (int hand : {static_cast<int>(sim::kHandL), static_cast<int>(sim::kHandR)}) {
      const Vec2 d = rotate_inv(f.object.angle, pos[hand] - f.object.pos);
      const double ox = std::abs(d.x) - box.half_extents.x;
      const double oz = std::abs(d.z) - box.half_extents.z;
      const double sd = (ox <= 0.0 && oz <= 0.0)
                            ? std::max(ox, oz)
                            : std::sqrt(sqr(std::max(ox, 0.0)) + sqr(std::max(oz, 0.0)));
      if (sd <= epsilon) {
        labels[t] = true;
        break;
      }
    }
  }
  return labels;
}

KinematicPrior temporal_filter(const KinematicPrior& traj, int window) {
  if (window < 1 || window % 2 == 0)
    throw ConfigError("temporal_filter: window must be odd and positive");
  KinematicPrior out = traj;
  const int T = out.length();
  if (T == 0 || window == 1) return out;
  const int h = window / 2;

  auto smooth = [&](auto get, auto set, bool wrapped) {
    std::vector<double> v(T);
    for (int t = 0; t < T; ++t) v[t] = get(traj.frames[t]);
    for (int t = 0; t < T; ++t) {
      const int lo = std::max(0, t - h), hi = std::min(T - 1, t + h);
      set(out.frames[t], wrapped ? wrapped_window_mean(v, lo, hi) : window_mean(v, lo, hi));
    }
  };

  smooth([](const PriorFrame& f) { return f.robot.base_pos.x; },
         [](PriorFrame& f, double v) { f.robot.base_pos.x = v; }, false);
  smooth([](const PriorFrame& f) { return f.robot.base_pos.z; },
         [](PriorFrame& f, double v) { f.robot.base_pos.z = v; }, false);
  smooth([](const PriorFrame& f) { return f.robot.pitch; },
         [](PriorFrame& f, double v) { f.robot.pitch = v; }, true);
  for (int j = 0; j < sim::kNumDof; ++j) {
    smooth([j](const PriorFrame& f) { return f.robot.q[j]; },
           [j](PriorFrame& f, double v) { f.robot.q[j] = v; }, false);
  }
  smooth([](const PriorFrame& f) { return f.object.pos.x; },
         [](PriorFrame& f, double v) { f.object.pos.x = v; }, false);
  smooth([](const PriorFrame& f) { return f.object.pos.z; },
         [](PriorFrame& f, double v) { f.object.pos.z = v; }, false);
  smooth([](const PriorFrame& f) { return f.object.angle; },
         [](PriorFrame& f, double v) { f.object.angle = v; }, true);

  for (int t = 0; t < T; ++t) {
    const int lo = std::max(0, t - h), hi = std::min(T - 1, t + h);
    int count = 0;
    for (int i = lo; i <= hi; ++i) count += traj.frames[i].label ? 1 : 0;
    out.frames[t].label = 2 * count > (hi - lo + 1);
  }

  finalize_velocities(out);
  return out;
}

std::vector<KinematicPrior> build_priors(const TaskSpec& task, const sim::RobotModel& model,
                                         int count, const NoiseModel& noise, int filter_window,
                                         uint64_t seed) {
  if (count < 1) throw ConfigError("build_priors: count must be positive");
  std::vector<KinematicPrior> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    KinematicPrior clean =
        generate_clean_trajectory(task, model, Rng::derive_seed(seed, 2 * i));
    KinematicPrior noisy = inject_noise(clean, noise, Rng::derive_seed(seed, 2 * i + 1));
    KinematicPrior filtered = temporal_filter(noisy, filter_window);
    filtered.trajectory_id = i;
    out.push_back(std::move(filtered));
  }
  return out;
}

}  // namespace locomanip::priors
