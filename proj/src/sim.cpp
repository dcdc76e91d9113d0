#include "locomanip/sim.hpp"

#include <cmath>
#include <sstream>

#include "locomanip/errors.hpp"

namespace locomanip::sim {

namespace {

// Geometry of the default biped, meters.
constexpr double kTorsoLen = 0.40;
constexpr double kThighLen = 0.35;
constexpr double kShankLen = 0.35;
constexpr double kArmLen = 0.55;

struct Kin {
  std::array<double, kNumBodies> angle;
  std::array<Vec2, kNumBodies> pos;      // link frame origins (joint positions)
  std::array<Vec2, kNumBodies> vel;      // origin velocities
  std::array<double, kNumBodies> angvel;
  std::array<Vec2, kNumBodies> r_anchor; // world offset parent origin -> own origin
  std::array<Vec2, kNumBodies> rc;       // world offset own origin -> CoM
};

void compute_kin(const RobotModel& m, const RobotState& s, const std::array<Vec2, kNumBodies>& com,
                 Kin& k) {
  k.angle[0] = s.pitch;
  k.pos[0] = s.base_pos;
  k.vel[0] = s.base_vel;
  k.angvel[0] = s.pitch_rate;
  k.r_anchor[0] = {0.0, 0.0};
  for (int i = 1; i < kNumBodies; ++i) {
    const int p = m.parent[i];
    const int j = i - 1;
    k.r_anchor[i] = rotate(k.angle[p], m.joint_anchor[j]);
    k.angle[i] = k.angle[p] + s.q[j];
    k.pos[i] = k.pos[p] + k.r_anchor[i];
    k.vel[i] = k.vel[p] + k.angvel[p] * perp(k.r_anchor[i]);
    k.angvel[i] = k.angvel[p] + s.qd[j];
  }
  for (int i = 0; i < kNumBodies; ++i) k.rc[i] = rotate(k.angle[i], com[i]);
}

// Required generalized actuation for the given generalized acceleration,
// including gravity and (optionally) velocity-product terms. Passing zero
// accelerations yields the bias vector; unit accelerations with velocities
// ignored and gravity off yield mass-matrix columns.
void inverse_dynamics(const RobotModel& m, const Kin& k, const std::array<double, kGenDof>& qdd,
                      bool use_velocity, double gravity, std::array<double, kGenDof>& tau) {
  std::array<Vec2, kNumBodies> acc;
  std::array<double, kNumBodies> angacc;
  acc[0] = Vec2{qdd[0], qdd[1] + gravity};
  angacc[0] = qdd[2];
  for (int i = 1; i < kNumBodies; ++i) {
    const int p = m.parent[i];
    const Vec2& r = k.r_anchor[i];
    acc[i] = acc[p] + angacc[p] * perp(r);
    if (use_velocity) acc[i] -= (k.angvel[p] * k.angvel[p]) * r;
    angacc[i] = angacc[p] + qdd[3 + (i - 1)];
  }
  std::array<Vec2, kNumBodies> f;
  std::array<double, kNumBodies> n;
  for (int i = 0; i < kNumBodies; ++i) {
    Vec2 ac = acc[i] + angacc[i] * perp(k.rc[i]);
    if (use_velocity) ac -= (k.angvel[i] * k.angvel[i]) * k.rc[i];
    f[i] = m.mass[i] * ac;
    n[i] = m.inertia[i] * angacc[i] + cross(k.rc[i], f[i]);
  }
  for (int i = kNumBodies - 1; i >= 1; --i) {
    tau[3 + (i - 1)] = n[i];
    const int p = m.parent[i];
    f[p] += f[i];
    n[p] += n[i] + cross(k.pos[i] - k.pos[p], f[i]);
  }
  tau[0] = f[0].x;
  tau[1] = f[0].z;
  tau[2] = n[0];
}

// In-place Cholesky factorization of symmetric positive definite A.
void cholesky_factor(std::array<double, kGenDof * kGenDof>& A) {
  constexpr int n = kGenDof;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * n + j];
      for (int p = 0; p < j; ++p) s -= A[i * n + p] * A[j * n + p];
      if (i == j) {
        if (s <= 0.0) throw DivergenceError("mass matrix not positive definite");
        A[i * n + i] = std::sqrt(s);
      } else {
        A[i * n + j] = s / A[j * n + j];
      }
    }
  }
}

// Solve A x = b in place given the factorization produced above.
void cholesky_backsolve(const std::array<double, kGenDof * kGenDof>& A,
                        std::array<double, kGenDof>& b) {
  constexpr int n = kGenDof;
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int p = 0; p < i; ++p) s -= A[i * n + p] * b[p];
    b[i] = s / A[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int p = i + 1; p < n; ++p) s -= A[p * n + i] * b[p];
    b[i] = s / A[i * n + i];
  }
}

// Jacobian row mapping generalized velocities to the velocity of a body-fixed
// point projected on a world direction.
void point_dir_jacobian(const RobotModel& m, const Kin& k, int body, const Vec2& point,
                        const Vec2& dir, std::array<double, kGenDof>& J) {
  J.fill(0.0);
  int b = body;
  while (b != 0) {
    J[3 + (b - 1)] = cross(point - k.pos[b], dir);
    b = m.parent[b];
  }
  J[0] = dir.x;
  J[1] = dir.z;
  J[2] = cross(point - k.pos[0], dir);
}

// Inverse of the apparent inertia the robot presents along one Jacobian row.
double robot_inv_mass(const std::array<double, kGenDof * kGenDof>& mfac,
                      const std::array<double, kGenDof>& J) {
  std::array<double, kGenDof> x = J;
  cholesky_backsolve(mfac, x);
  double w = 0.0;
  for (int i = 0; i < kGenDof; ++i) w += J[i] * x[i];
  return w;
}

double pair_friction(double a, double b) { return std::sqrt(a * b); }
double pair_restitution(double a, double b) { return 0.5 * (a + b); }

struct ContactAccum {
  std::array<double, kGenDof> robot_tau{};
  Vec2 box_force{0.0, 0.0};
  double box_torque = 0.0;
  std::array<PairForce, kNumSites> ground{};
  std::array<PairForce, kNumSites> object{};
  PairForce box_ground{};
  double spring_energy = 0.0;
};

struct Materials {
  double mu_s_rg, mu_d_rg, ce_rg;  // robot-ground
  double mu_s_ro, mu_d_ro, ce_ro;  // robot-object
  double mu_s_og, mu_d_og, ce_og;  // object-ground
};

Materials make_materials(const SimConfig& c, const PhysicalParams& p) {
  Materials m;
  m.mu_s_rg = pair_friction(p.robot_friction_static, c.ground_friction_static);
  m.mu_d_rg = pair_friction(p.robot_friction_dynamic, c.ground_friction_dynamic);
  m.ce_rg = c.contact_damping * (1.0 - pair_restitution(p.robot_restitution, c.ground_restitution));
  m.mu_s_ro = pair_friction(p.robot_friction_static, p.object_friction_static);
  m.mu_d_ro = pair_friction(p.robot_friction_dynamic, p.object_friction_dynamic);
  m.ce_ro = c.contact_damping * (1.0 - pair_restitution(p.robot_restitution, p.object_restitution));
  m.mu_s_og = pair_friction(p.object_friction_static, c.ground_friction_static);
  m.mu_d_og = pair_friction(p.object_friction_dynamic, c.ground_friction_dynamic);
  m.ce_og = c.contact_damping * (1.0 - pair_restitution(p.object_restitution, c.ground_restitution));
  return m;
}

// Penalty force at one contact: normal max(0, k*depth + c_eff*approach_speed),
// tangential Coulomb with linear stick regularization inside slip_velocity.
// w_n and w_t are the inverse apparent masses of the contact pair along the
// normal and tangent. The spring rate is held below m_eff/dt^2 and the damping
// and friction forces below the level that would reverse the relative velocity
// within one substep; past those bounds the explicit update overshoots and a
// penalty contact turns into an energy source. When the friction bound binds
// the tangential velocity is brought exactly to rest, which doubles as stick.
PairForce point_force(const SimConfig& cfg, double depth, const Vec2& rel_vel, const Vec2& normal,
                      double mu_s, double mu_d, double c_eff, double w_n, double w_t,
                      Vec2& force_out, double& spring_energy) {
  const double dt = cfg.physics_dt;
  PairForce pf;
  const double approach = -rel_vel.dot(normal);
  const double k_n = std::min(cfg.contact_stiffness, 1.0 / (w_n * dt * dt));
  const double c_n = std::min(c_eff, 1.0 / (w_n * dt));
  pf.normal = std::max(0.0, k_n * depth + c_n * approach);
  const Vec2 tangent = perp(normal);
  const double vt = rel_vel.dot(tangent);
  const double mu = std::abs(vt) <= cfg.slip_velocity ? mu_s : mu_d;
  const double ft_cap = std::abs(vt) / (w_t * dt);
  pf.tangent = clampd(-mu * pf.normal * clampd(vt / cfg.slip_velocity, -1.0, 1.0), -ft_cap, ft_cap);
  force_out = pf.normal * normal + pf.tangent * tangent;
  pf.tangent = std::abs(pf.tangent);
  spring_energy += 0.5 * k_n * depth * depth;
  return pf;
}

void robot_point_tau(const RobotModel& m, const Kin& k, int body, const Vec2& point,
                     const Vec2& force, std::array<double, kGenDof>& tau) {
  int b = body;
  while (b != 0) {
    tau[3 + (b - 1)] += cross(point - k.pos[b], force);
    b = m.parent[b];
  }
  tau[0] += force.x;
  tau[1] += force.z;
  tau[2] += cross(point - k.pos[0], force);
}

// Point expressed in box frame; returns true with depth/normal when inside.
bool point_in_box(const BoxModel& box, const ObjectState& o, const Vec2& p, double& depth,
                  Vec2& normal_world) {
  const Vec2 d = rotate_inv(o.angle, p - o.pos);
  const double px = box.half_extents.x - std::abs(d.x);
  const double pz = box.half_extents.z - std::abs(d.z);
  if (px <= 0.0 || pz <= 0.0) return false;
  Vec2 n_local;
  if (px < pz) {
    depth = px;
    n_local = {d.x >= 0.0 ? 1.0 : -1.0, 0.0};
  } else {
    depth = pz;
    n_local = {0.0, d.z >= 0.0 ? 1.0 : -1.0};
  }
  normal_world = rotate(o.angle, n_local);
  return true;
}

void collect_contacts(const RobotModel& model, const BoxModel& box, const SimConfig& cfg,
                      const Materials& mat, const Kin& k, const ObjectState& os,
                      const std::array<double, kGenDof * kGenDof>& mfac, double m_box,
                      double i_box, ContactAccum& acc) {
  std::array<Vec2, kNumSites> spos, svel;
  for (int s = 0; s < kNumSites; ++s) {
    const int b = model.site_body[s];
    const Vec2 r = rotate(k.angle[b], model.site_local[s]);
    spos[s] = k.pos[b] + r;
    svel[s] = k.vel[b] + k.angvel[b] * perp(r);
  }
  std::array<double, kGenDof> J;
  for (int s = 0; s < kNumSites; ++s) {
    const int body = model.site_body[s];
    // site vs ground
    const double depth_g = -spos[s].z;
    if (depth_g > 0.0) {
      const Vec2 normal{0.0, 1.0};
      point_dir_jacobian(model, k, body, spos[s], normal, J);
      const double w_n = robot_inv_mass(mfac, J);
      point_dir_jacobian(model, k, body, spos[s], perp(normal), J);
      const double w_t = robot_inv_mass(mfac, J);
      Vec2 force;
      const PairForce pf = point_force(cfg, depth_g, svel[s], normal, mat.mu_s_rg, mat.mu_d_rg,
                                       mat.ce_rg, w_n, w_t, force, acc.spring_energy);
      robot_point_tau(model, k, body, spos[s], force, acc.robot_tau);
      acc.ground[s].normal += pf.normal;
      acc.ground[s].tangent += pf.tangent;
    }
    // site vs box
    double depth_b;
    Vec2 normal;
    if (point_in_box(box, os, spos[s], depth_b, normal)) {
      const Vec2 r_box = spos[s] - os.pos;
      const Vec2 vbox = os.vel + os.angle_rate * perp(r_box);
      point_dir_jacobian(model, k, body, spos[s], normal, J);
      const double w_n = robot_inv_mass(mfac, J) + 1.0 / m_box + sqr(cross(r_box, normal)) / i_box;
      const Vec2 tangent = perp(normal);
      point_dir_jacobian(model, k, body, spos[s], tangent, J);
      const double w_t = robot_inv_mass(mfac, J) + 1.0 / m_box + sqr(cross(r_box, tangent)) / i_box;
      Vec2 force;
      const PairForce pf = point_force(cfg, depth_b, svel[s] - vbox, normal, mat.mu_s_ro,
                                       mat.mu_d_ro, mat.ce_ro, w_n, w_t, force, acc.spring_energy);
      robot_point_tau(model, k, body, spos[s], force, acc.robot_tau);
      acc.box_force -= force;
      acc.box_torque -= cross(r_box, force);
      acc.object[s].normal += pf.normal;
      acc.object[s].tangent += pf.tangent;
    }
  }
  // box corners vs ground
  for (int cx = -1; cx <= 1; cx += 2) {
    for (int cz = -1; cz <= 1; cz += 2) {
      const Vec2 local{cx * box.half_extents.x, cz * box.half_extents.z};
      const Vec2 r = rotate(os.angle, local);
      const Vec2 p = os.pos + r;
      const double depth = -p.z;
      if (depth <= 0.0) continue;
      const Vec2 v = os.vel + os.angle_rate * perp(r);
      const Vec2 normal{0.0, 1.0};
      const double w_n = 1.0 / m_box + sqr(cross(r, normal)) / i_box;
      const double w_t = 1.0 / m_box + sqr(cross(r, perp(normal))) / i_box;
      Vec2 force;
      const PairForce pf = point_force(cfg, depth, v, normal, mat.mu_s_og, mat.mu_d_og, mat.ce_og,
                                       w_n, w_t, force, acc.spring_energy);
      acc.box_force += force;
      acc.box_torque += cross(r, force);
      acc.box_ground.normal += pf.normal;
      acc.box_ground.tangent += pf.tangent;
    }
  }
}

void aggregate_pair(PairForce& agg, const PairForce& sub) {
  agg.normal = std::max(agg.normal, sub.normal);
  agg.tangent = std::max(agg.tangent, sub.tangent);
}

}  // namespace

void RobotModel::validate() const {
  if (parent[0] != -1) throw ConfigError("robot model: torso must be the root");
  for (int i = 1; i < kNumBodies; ++i)
    if (parent[i] < 0 || parent[i] >= i) throw ConfigError("robot model: parents must precede children");
  for (int i = 0; i < kNumBodies; ++i)
    if (!(mass[i] > 0.0) || !(inertia[i] > 0.0)) throw ConfigError("robot model: masses and inertias must be positive");
  for (int j = 0; j < kNumDof; ++j) {
    if (!(joint_lo[j] < joint_hi[j])) throw ConfigError("robot model: joint limits inverted");
    if (default_q[j] < joint_lo[j] || default_q[j] > joint_hi[j])
      throw ConfigError("robot model: default pose outside joint limits");
  }
  if (!(action_scale > 0.0)) throw ConfigError("robot model: action scale must be positive");
}

void PhysicalParams::validate() const {
  auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(robot_friction_static) || !nonneg(robot_friction_dynamic) ||
      !nonneg(object_friction_static) || !nonneg(object_friction_dynamic))
    throw ConfigError("physical params: frictions must be non-negative");
  if (robot_restitution < 0.0 || robot_restitution > 1.0 || object_restitution < 0.0 ||
      object_restitution > 1.0)
    throw ConfigError("physical params: restitutions must lie in [0, 1]");
  if (!(object_mass_scale > 0.0)) throw ConfigError("physical params: mass scale must be positive");
}

void SimConfig::validate() const {
  if (!(physics_dt > 0.0)) throw ConfigError("sim config: physics_dt must be positive");
  if (control_decimation < 1) throw ConfigError("sim config: control_decimation must be >= 1");
  for (int j = 0; j < kNumDof; ++j)
    if (!(pd_kp[j] > 0.0) || !(pd_kd[j] > 0.0) || !(torque_limit[j] > 0.0))
      throw ConfigError("sim config: PD gains and torque limits must be positive");
  if (!(contact_stiffness > 0.0) || contact_damping < 0.0)
    throw ConfigError("sim config: contact parameters invalid");
}

RobotModel default_robot_model() {
  RobotModel m;
  m.mass = {6.0, 2.0, 1.5, 2.0, 1.5, 1.0, 1.0};
  m.inertia = {6.0 * kTorsoLen * kTorsoLen / 12.0,  2.0 * kThighLen * kThighLen / 12.0,
               1.5 * kShankLen * kShankLen / 12.0,  2.0 * kThighLen * kThighLen / 12.0,
               1.5 * kShankLen * kShankLen / 12.0,  1.0 * kArmLen * kArmLen / 12.0,
               1.0 * kArmLen * kArmLen / 12.0};
  m.com = {Vec2{0.0, 0.5 * kTorsoLen}, Vec2{0.0, -0.5 * kThighLen}, Vec2{0.0, -0.5 * kShankLen},
           Vec2{0.0, -0.5 * kThighLen}, Vec2{0.0, -0.5 * kShankLen}, Vec2{0.0, -0.5 * kArmLen},
           Vec2{0.0, -0.5 * kArmLen}};
  m.parent = {-1, 0, 1, 0, 3, 0, 0};
  m.joint_anchor = {Vec2{0.0, 0.0},        Vec2{0.0, -kThighLen}, Vec2{0.0, 0.0},
                    Vec2{0.0, -kThighLen}, Vec2{0.0, kTorsoLen},  Vec2{0.0, kTorsoLen}};
  m.joint_lo = {-1.6, -2.4, -1.6, -2.4, -2.6, -2.6};
  m.joint_hi = {1.6, 0.0, 1.6, 0.0, 2.6, 2.6};
  m.default_q = {0.40, -0.55, -0.30, 0.00, 0.25, 0.25};
  m.default_base_height = 0.6686;
  m.action_scale = 0.6;
  m.site_body = {kShankL, kShankR, kShankL, kShankR, kArmL, kArmR, kTorso, kTorso};
  m.site_local = {Vec2{0.0, -kShankLen}, Vec2{0.0, -kShankLen}, Vec2{0.0, 0.0}, Vec2{0.0, 0.0},
                  Vec2{0.0, -kArmLen},   Vec2{0.0, -kArmLen},   Vec2{0.0, 0.0}, Vec2{0.0, kTorsoLen}};
  return m;
}

Simulator::Simulator(const RobotModel& robot, const BoxModel& box, const SimConfig& config)
    : model_(robot), box_(box), config_(config) {
  model_.validate();
  config_.validate();
  params_.validate();
  robot_.base_pos = {0.0, model_.default_base_height};
  robot_.q = model_.default_q;
  object_.pos = {10.0, box_.half_extents.z};
}

void Simulator::reset(const RobotState& robot, const ObjectState& object) {
  set_state(robot, object);
  time_ = 0.0;
}

void Simulator::set_state(const RobotState& robot, const ObjectState& object) {
  robot_ = robot;
  object_ = object;
  check_finite();
}

void Simulator::set_physical_params(const PhysicalParams& params) {
  params.validate();
  params_ = params;
}

Snapshot Simulator::snapshot() const { return Snapshot{robot_, object_, params_, time_}; }

void Simulator::restore(const Snapshot& snap) {
  robot_ = snap.robot;
  object_ = snap.object;
  params_ = snap.params;
  time_ = snap.time;
}

void Simulator::apply_robot_impulse(const Vec2& dv, double domega) {
  robot_.base_vel += dv;
  robot_.pitch_rate += domega;
}

void Simulator::apply_object_impulse(const Vec2& dv, double domega) {
  object_.vel += dv;
  object_.angle_rate += domega;
}

JointVec Simulator::pd_torque(const SimConfig& config, const JointVec& q, const JointVec& qd,
                              const JointVec& q_cmd) {
  JointVec tau;
  for (int j = 0; j < kNumDof; ++j) {
    const double t = config.pd_kp[j] * (q_cmd[j] - q[j]) - config.pd_kd[j] * qd[j];
    tau[j] = clampd(t, -config.torque_limit[j], config.torque_limit[j]);
  }
  return tau;
}

StepResult Simulator::step(const JointVec& joint_targets) {
  StepResult result;
  // Actuator zero-calibration error: the controller believes it commands
  // joint_targets but the servo tracks a shifted setpoint.
  JointVec biased = joint_targets;
  for (int j = 0; j < kNumDof; ++j) biased[j] += params_.joint_default_offset[j];
  for (int s = 0; s < config_.control_decimation; ++s)
    substep(biased, result, s + 1 == config_.control_decimation);
  time_ += config_.physics_dt * config_.control_decimation;
  return result;
}

void Simulator::substep(const JointVec& targets, StepResult& result, bool last_substep) {
  const double dt = config_.physics_dt;
  std::array<Vec2, kNumBodies> com_eff = model_.com;
  com_eff[kTorso] += params_.com_offset;

  Kin k;
  compute_kin(model_, robot_, com_eff, k);

  // Mass matrix first: the factorization is reused for the per-contact and
  // per-joint apparent-inertia queries and for the acceleration solve.
  std::array<double, kGenDof * kGenDof> M;
  std::array<double, kGenDof> unit{}, col;
  for (int i = 0; i < kGenDof; ++i) {
    unit[i] = 1.0;
    inverse_dynamics(model_, k, unit, false, 0.0, col);
    unit[i] = 0.0;
    for (int r = 0; r < kGenDof; ++r) M[r * kGenDof + i] = col[r];
  }
  cholesky_factor(M);

  const double m_box = box_.mass * params_.object_mass_scale;
  const double i_box = box_.inertia() * params_.object_mass_scale;

  ContactAccum acc;
  const Materials mat = make_materials(config_, params_);
  collect_contacts(model_, box_, config_, mat, k, object_, M, m_box, i_box, acc);

  const JointVec pd = pd_torque(config_, robot_.q, robot_.qd, targets);
  JointVec tau_total = pd;
  for (int j = 0; j < kNumDof; ++j) {
    double excess = 0.0;
    if (robot_.q[j] > model_.joint_hi[j]) excess = robot_.q[j] - model_.joint_hi[j];
    else if (robot_.q[j] < model_.joint_lo[j]) excess = robot_.q[j] - model_.joint_lo[j];
    if (excess != 0.0) {
      // Soften the limit spring where the joint's apparent inertia is too
      // small for the base gains, mirroring the contact treatment.
      std::array<double, kGenDof> e{};
      e[3 + j] = 1.0;
      const double w = robot_inv_mass(M, e);
      const double k_lim = std::min(config_.limit_stiffness, 1.0 / (w * dt * dt));
      const double c_lim = std::min(config_.limit_damping, 1.0 / (w * dt));
      tau_total[j] += -k_lim * excess - c_lim * robot_.qd[j];
    }
  }

  std::array<double, kGenDof> zero{};
  std::array<double, kGenDof> bias;
  inverse_dynamics(model_, k, zero, true, config_.gravity, bias);

  std::array<double, kGenDof> rhs;
  for (int i = 0; i < kGenDof; ++i) rhs[i] = acc.robot_tau[i] - bias[i];
  for (int j = 0; j < kNumDof; ++j) rhs[3 + j] += tau_total[j];
  cholesky_backsolve(M, rhs);  // rhs becomes qdd

  robot_.base_vel += Vec2{rhs[0], rhs[1]} * dt;
  robot_.pitch_rate += rhs[2] * dt;
  for (int j = 0; j < kNumDof; ++j) robot_.qd[j] += rhs[3 + j] * dt;
  robot_.base_pos += robot_.base_vel * dt;
  robot_.pitch += robot_.pitch_rate * dt;
  for (int j = 0; j < kNumDof; ++j) robot_.q[j] += robot_.qd[j] * dt;

  for (int j = 0; j < kNumDof; ++j) {
    const double lo = model_.joint_lo[j] - config_.limit_excursion;
    const double hi = model_.joint_hi[j] + config_.limit_excursion;
    bool outward;
    if (robot_.q[j] < lo) {
      robot_.q[j] = lo;
      outward = robot_.qd[j] < 0.0;
    } else if (robot_.q[j] > hi) {
      robot_.q[j] = hi;
      outward = robot_.qd[j] > 0.0;
    } else {
      continue;
    }
    if (!outward) continue;
    // Stop the joint with a generalized impulse rather than by zeroing its
    // rate in place: zeroing one coordinate of a coupled chain can raise the
    // kinetic energy, while the impulse solution always removes energy.
    std::array<double, kGenDof> col{};
    col[3 + j] = 1.0;
    cholesky_backsolve(M, col);  // column j of the inverse mass matrix
    const double lam = -robot_.qd[j] / col[3 + j];
    robot_.base_vel.x += col[0] * lam;
    robot_.base_vel.z += col[1] * lam;
    robot_.pitch_rate += col[2] * lam;
    for (int jj = 0; jj < kNumDof; ++jj) robot_.qd[jj] += col[3 + jj] * lam;
  }

  object_.vel += (acc.box_force * (1.0 / m_box) + Vec2{0.0, -config_.gravity}) * dt;
  object_.angle_rate += acc.box_torque / i_box * dt;
  object_.pos += object_.vel * dt;
  object_.angle += object_.angle_rate * dt;

  for (int s = 0; s < kNumSites; ++s) {
    aggregate_pair(result.contacts.ground[s], acc.ground[s]);
    aggregate_pair(result.contacts.object[s], acc.object[s]);
  }
  aggregate_pair(result.contacts.box_ground, acc.box_ground);
  if (last_substep) result.torques = pd;

  check_finite();
}

void Simulator::check_finite() const {
  auto bad = [this](double v) { return !std::isfinite(v) || std::abs(v) > config_.max_speed * 10.0; };
  auto badv = [this](double v) { return !std::isfinite(v) || std::abs(v) > config_.max_speed; };
  if (bad(robot_.base_pos.x) || bad(robot_.base_pos.z) || bad(robot_.pitch) ||
      badv(robot_.base_vel.x) || badv(robot_.base_vel.z) || badv(robot_.pitch_rate) ||
      bad(object_.pos.x) || bad(object_.pos.z) || badv(object_.vel.x) || badv(object_.vel.z) ||
      badv(object_.angle_rate))
    throw DivergenceError("simulator state diverged at t=" + std::to_string(time_));
  for (int j = 0; j < kNumDof; ++j)
    if (bad(robot_.q[j]) || badv(robot_.qd[j]))
      throw DivergenceError("joint state diverged at t=" + std::to_string(time_));
}

void Simulator::forward_kinematics(const RobotModel& model, const RobotState& state,
                                   std::array<Vec2, kNumBodies>& pos,
                                   std::array<double, kNumBodies>& angle) {
  Kin k;
  compute_kin(model, state, model.com, k);
  pos = k.pos;
  angle = k.angle;
}

void Simulator::body_velocities(const RobotModel& model, const RobotState& state,
                                std::array<Vec2, kNumBodies>& vel,
                                std::array<double, kNumBodies>& angvel) {
  Kin k;
  compute_kin(model, state, model.com, k);
  vel = k.vel;
  angvel = k.angvel;
}

void Simulator::site_states(const RobotModel& model, const RobotState& state,
                            std::array<Vec2, kNumSites>& pos, std::array<Vec2, kNumSites>& vel) {
  Kin k;
  compute_kin(model, state, model.com, k);
  for (int s = 0; s < kNumSites; ++s) {
    const int b = model.site_body[s];
    const Vec2 r = rotate(k.angle[b], model.site_local[s]);
    pos[s] = k.pos[b] + r;
    vel[s] = k.vel[b] + k.angvel[b] * perp(r);
  }
}

double Simulator::total_energy() const {
  std::array<Vec2, kNumBodies> com_eff = model_.com;
  com_eff[kTorso] += params_.com_offset;
  Kin k;
  compute_kin(model_, robot_, com_eff, k);

  double e = 0.0;
  for (int i = 0; i < kNumBodies; ++i) {
    const Vec2 vcom = k.vel[i] + k.angvel[i] * perp(k.rc[i]);
    e += 0.5 * model_.mass[i] * vcom.norm2() + 0.5 * model_.inertia[i] * sqr(k.angvel[i]);
    e += model_.mass[i] * config_.gravity * (k.pos[i].z + k.rc[i].z);
  }
  const double m_box = box_.mass * params_.object_mass_scale;
  const double i_box = box_.inertia() * params_.object_mass_scale;
  e += 0.5 * m_box * object_.vel.norm2() + 0.5 * i_box * sqr(object_.angle_rate);
  e += m_box * config_.gravity * object_.pos.z;

  // Stored penalty-spring terms, using the same softened rates the stepper
  // applies so the ledger matches the forces actually exerted.
  std::array<double, kGenDof * kGenDof> M;
  std::array<double, kGenDof> unit{}, col;
  for (int i = 0; i < kGenDof; ++i) {
    unit[i] = 1.0;
    inverse_dynamics(model_, k, unit, false, 0.0, col);
    unit[i] = 0.0;
    for (int r = 0; r < kGenDof; ++r) M[r * kGenDof + i] = col[r];
  }
  cholesky_factor(M);

  ContactAccum acc;
  const Materials mat = make_materials(config_, params_);
  collect_contacts(model_, box_, config_, mat, k, object_, M, m_box, i_box, acc);
  e += acc.spring_energy;
  const double dt = config_.physics_dt;
  for (int j = 0; j < kNumDof; ++j) {
    double excess = 0.0;
    if (robot_.q[j] > model_.joint_hi[j]) excess = robot_.q[j] - model_.joint_hi[j];
    if (robot_.q[j] < model_.joint_lo[j]) excess = model_.joint_lo[j] - robot_.q[j];
    if (excess != 0.0) {
      std::array<double, kGenDof> ej{};
      ej[3 + j] = 1.0;
      const double w = robot_inv_mass(M, ej);
      const double k_lim = std::min(config_.limit_stiffness, 1.0 / (w * dt * dt));
      e += 0.5 * k_lim * excess * excess;
    }
  }
  return e;
}

double Simulator::max_penetration(const RobotModel& model, const BoxModel& box,
                                  const RobotState& robot, const ObjectState& object) {
  std::array<Vec2, kNumSites> spos, svel;
  site_states(model, robot, spos, svel);
  double worst = 0.0;
  for (int s = 0; s < kNumSites; ++s) {
    worst = std::max(worst, -spos[s].z);
    double depth;
    Vec2 normal;
    if (point_in_box(box, object, spos[s], depth, normal)) worst = std::max(worst, depth);
  }
  for (int cx = -1; cx <= 1; cx += 2)
    for (int cz = -1; cz <= 1; cz += 2) {
      const Vec2 corner =
          object.pos + rotate(object.angle, Vec2{cx * box.half_extents.x, cz * box.half_extents.z});
      worst = std::max(worst, -corner.z);
    }
  return worst;
}

}  // namespace locomanip::sim
