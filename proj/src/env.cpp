#include "locomanip/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "locomanip/errors.hpp"

namespace locomanip::env {

namespace {

constexpr int kCurrentBlock = 56;
constexpr int kFutureBlock = 23;
constexpr int kHistFrame = 21;

void append(Vec& v, double a) { v.push_back(a); }
void append(Vec& v, const Vec2& a) {
  v.push_back(a.x);
  v.push_back(a.z);
}
void append_angle(Vec& v, double a) {
  v.push_back(std::cos(a));
  v.push_back(std::sin(a));
}

sim::JointVec to_jointvec(const Vec& a) {
  sim::JointVec out{};
  for (int j = 0; j < sim::kNumDof; ++j) out[j] = a[static_cast<size_t>(j)];
  return out;
}

}  // namespace

void RandomizerConfig::validate() const {
  auto range_ok = [](const Range& r) { return r.lo <= r.hi && std::isfinite(r.lo) && std::isfinite(r.hi); };
  if (!range_ok(robot_friction_static) || !range_ok(robot_friction_dynamic) ||
      !range_ok(robot_restitution) || !range_ok(object_friction_static) ||
      !range_ok(object_friction_dynamic) || !range_ok(object_restitution) ||
      !range_ok(object_mass_scale) || !range_ok(push_interval))
    throw ConfigError("randomizer: range lo > hi or non-finite");
  if (object_mass_scale.lo <= 0.0) throw ConfigError("randomizer: mass scale must stay positive");
  if (com_offset_x < 0.0 || com_offset_z < 0.0 || joint_default_offset < 0.0 ||
      robot_push_linvel < 0.0 || robot_push_angvel < 0.0 || object_push_linvel < 0.0 ||
      object_push_angvel < 0.0)
    throw ConfigError("randomizer: magnitude bounds must be non-negative");
  if (push_interval.lo <= 0.0) throw ConfigError("randomizer: push interval must be positive");
}

sim::PhysicalParams randomize_episode(sim::Simulator& sim, const RandomizerConfig& cfg, Rng& rng) {
  cfg.validate();
  sim::PhysicalParams p;  // nominal defaults
  if (cfg.randomize_params) {
    p.robot_friction_static = cfg.robot_friction_static.sample(rng);
    p.robot_friction_dynamic =
        std::min(cfg.robot_friction_dynamic.sample(rng), p.robot_friction_static);
    p.robot_restitution = cfg.robot_restitution.sample(rng);
    p.object_friction_static = cfg.object_friction_static.sample(rng);
    p.object_friction_dynamic =
        std::min(cfg.object_friction_dynamic.sample(rng), p.object_friction_static);
    p.object_restitution = cfg.object_restitution.sample(rng);
    p.object_mass_scale = cfg.object_mass_scale.sample(rng);
    p.com_offset.x = rng.uniform(-cfg.com_offset_x, cfg.com_offset_x);
    p.com_offset.z = rng.uniform(-cfg.com_offset_z, cfg.com_offset_z);
    for (int j = 0; j < sim::kNumDof; ++j)
      p.joint_default_offset[j] = rng.uniform(-cfg.joint_default_offset, cfg.joint_default_offset);
  }
  sim.set_physical_params(p);
  return p;
}

ReferenceTrack track_from_prior(const priors::KinematicPrior& p) {
  ReferenceTrack t;
  t.frames.reserve(p.frames.size());
  for (const auto& f : p.frames) t.frames.push_back({f.robot, f.object, f.label});
  t.frame_dt = p.frame_dt;
  t.trajectory_id = p.trajectory_id;
  t.task_id = p.task_id;
  t.goal_pos = p.goal_pos;
  t.goal_angle = p.goal_angle;
  t.tolerance = p.tolerance;
  return t;
}

ReferenceTrack track_from_refined(const data::RefinedTrajectory& r) {
  ReferenceTrack t;
  t.frames.reserve(r.frames.size());
  t.commands.reserve(r.frames.size());
  for (const auto& f : r.frames) {
    t.frames.push_back({f.robot, f.object, f.cmd.label});
    t.commands.push_back(f.cmd);
  }
  t.frame_dt = r.frame_dt;
  t.trajectory_id = r.trajectory_id;
  t.task_id = r.task_id;
  t.goal_pos = r.goal_pos;
  t.goal_angle = r.goal_angle;
  t.tolerance = r.tolerance;
  return t;
}

std::vector<ReferenceTrack> tracks_from_priors(const std::vector<priors::KinematicPrior>& ps) {
  std::vector<ReferenceTrack> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(track_from_prior(p));
  return out;
}

std::vector<ReferenceTrack> tracks_from_refined(const std::vector<data::RefinedTrajectory>& rs) {
  std::vector<ReferenceTrack> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(track_from_refined(r));
  return out;
}

int privileged_obs_dim() { return kCurrentBlock + kFutureWindow * kFutureBlock; }

int deployable_obs_dim() { return kHistoryLen * kHistFrame + 4 + data::kCommandDim; }

std::string deployable_layout_descriptor() {
  return "hist5[angvel1,q6,qd6,act6,grav2]+object4+command" + std::to_string(data::kCommandDim);
}

MimicEnv::MimicEnv(const sim::RobotModel& model, const sim::BoxModel& box,
                   const sim::SimConfig& sim_cfg, const EnvConfig& env_cfg,
                   const std::vector<ReferenceTrack>* tracks, uint64_t seed)
    : sim_(model, box, sim_cfg),
      cfg_(env_cfg),
      tracks_(tracks),
      rng_(seed),
      dt_ctrl_(sim_cfg.physics_dt * sim_cfg.control_decimation),
      last_action_(sim::kNumDof, 0.0),
      prev_action_(sim::kNumDof, 0.0),
      history_(kHistoryLen) {
  if (!tracks_ || tracks_->empty()) throw ConfigError("env: no reference tracks");
  for (const auto& t : *tracks_)
    if (t.length() < 2) throw ConfigError("env: reference track shorter than 2 frames");
  cfg_.rand.validate();
  for (auto& h : history_) h.fill(0.0);
  reset_to_start(0);
}

const rewards::ReferenceFrame& MimicEnv::current_ref() const {
  return track().frames[static_cast<size_t>(phase_)];
}

void MimicEnv::refresh_command() {
  const ReferenceTrack& t = track();
  if (t.has_commands()) {
    const int next = std::min(phase_ + 1, t.length() - 1);
    cmd_ = t.commands[static_cast<size_t>(next)];
  } else {
    cmd_ = data::CommandVector{};
  }
}

void MimicEnv::resample_object_estimate() {
  const sim::ObjectState& o = sim_.object();
  object_est_pos_ = o.pos;
  object_est_angle_ = o.angle;
  if (cfg_.object_obs_noise_pos > 0.0) {
    object_est_pos_.x += rng_.normal(0.0, cfg_.object_obs_noise_pos);
    object_est_pos_.z += rng_.normal(0.0, cfg_.object_obs_noise_pos);
  }
  if (cfg_.object_obs_noise_angle > 0.0)
    object_est_angle_ += rng_.normal(0.0, cfg_.object_obs_noise_angle);
}

void MimicEnv::arm_push_timer() { push_timer_ = cfg_.rand.push_interval.sample(rng_); }

void MimicEnv::push_history() {
  const sim::RobotState& r = sim_.robot();
  std::array<double, kHistFrame> f{};
  f[0] = r.pitch_rate;
  for (int j = 0; j < sim::kNumDof; ++j) {
    f[static_cast<size_t>(1 + j)] = r.q[j];
    f[static_cast<size_t>(7 + j)] = r.qd[j];
    f[static_cast<size_t>(13 + j)] = last_action_[static_cast<size_t>(j)];
  }
  const Vec2 grav = rotate_inv(r.pitch, Vec2{0.0, -1.0});
  f[19] = grav.x;
  f[20] = grav.z;
  history_.erase(history_.begin());
  history_.push_back(f);
}

void MimicEnv::reset(const pool::StatePool* pool, int iteration) {
  static const pool::StatePool kEmptyPool;
  const pool::StatePool& p = pool ? *pool : kEmptyPool;

  track_index_ = static_cast<int>(rng_.uniform_int(static_cast<uint64_t>(tracks_->size())));
  const ReferenceTrack& t = track();
  const sim::PhysicalParams params = randomize_episode(sim_, cfg_.rand, rng_);

  pool::InitResult init =
      pool::sample_init(p, cfg_.init, t.frames, sim_.model(), sim_.box(), sim_.config(), params,
                        t.trajectory_id, iteration, rng_);
  sim_.reset(init.robot, init.object);
  phase_ = std::min(init.phase, t.length() - 2);
  from_pool_ = init.from_pool;

  survived_steps_ = 0;
  std::fill(last_action_.begin(), last_action_.end(), 0.0);
  std::fill(prev_action_.begin(), prev_action_.end(), 0.0);
  prev_qd_ = init.robot.qd;
  air_time_ = {0.0, 0.0};
  foot_contact_ = {true, true};
  last_contacts_ = sim::ContactReport{};
  arm_push_timer();

  for (auto& h : history_) h.fill(0.0);
  push_history();
  resample_object_estimate();
  refresh_command();
}

void MimicEnv::reset_to_start(int track_index) {
  if (track_index < 0 || track_index >= static_cast<int>(tracks_->size()))
    throw ConfigError("env: track index out of range");
  track_index_ = track_index;
  const ReferenceTrack& t = track();
  const sim::PhysicalParams params = randomize_episode(sim_, cfg_.rand, rng_);

  sim::RobotState robot = t.frames[0].robot;
  sim::ObjectState object = t.frames[0].object;
  if (!pool::project_to_feasible(sim_.model(), sim_.box(), sim_.config(), params, robot, object))
    throw DivergenceError("env: start frame cannot be projected to a feasible state");
  sim_.reset(robot, object);
  phase_ = 0;
  from_pool_ = false;

  survived_steps_ = 0;
  std::fill(last_action_.begin(), last_action_.end(), 0.0);
  std::fill(prev_action_.begin(), prev_action_.end(), 0.0);
  prev_qd_ = robot.qd;
  air_time_ = {0.0, 0.0};
  foot_contact_ = {true, true};
  last_contacts_ = sim::ContactReport{};
  arm_push_timer();

  for (auto& h : history_) h.fill(0.0);
  push_history();
  resample_object_estimate();
  refresh_command();
}

void MimicEnv::perturbation_tick(const sim::ContactReport& contacts) {
  if (!cfg_.rand.apply_pushes) return;
  push_timer_ -= dt_ctrl_;
  if (push_timer_ > 0.0) return;
  const RandomizerConfig& rc = cfg_.rand;
  sim_.apply_robot_impulse({rng_.uniform(-rc.robot_push_linvel, rc.robot_push_linvel),
                            rng_.uniform(-rc.robot_push_linvel, rc.robot_push_linvel)},
                           rng_.uniform(-rc.robot_push_angvel, rc.robot_push_angvel));
  if (contacts.robot_object_contact())
    sim_.apply_object_impulse({rng_.uniform(-rc.object_push_linvel, rc.object_push_linvel),
                               rng_.uniform(-rc.object_push_linvel, rc.object_push_linvel)},
                              rng_.uniform(-rc.object_push_angvel, rc.object_push_angvel));
  arm_push_timer();
}

StepOutcome MimicEnv::step(const Vec& action) {
  if (static_cast<int>(action.size()) != sim::kNumDof)
    throw ConfigError("env: action width mismatch");
  const ReferenceTrack& t = track();
  if (phase_ >= t.length() - 1) throw ConfigError("env: step past trajectory end");

  prev_action_ = last_action_;
  last_action_ = action;

  const sim::RobotModel& model = sim_.model();
  sim::JointVec targets;
  for (int j = 0; j < sim::kNumDof; ++j)
    targets[j] = model.default_q[j] + model.action_scale * action[static_cast<size_t>(j)];

  const sim::StepResult res = sim_.step(targets);
  phase_ += 1;
  survived_steps_ += 1;

  const sim::RobotState& robot = sim_.robot();
  const sim::ObjectState& object = sim_.object();

  rewards::RegularizationInputs reg;
  reg.torques = res.torques;
  for (int j = 0; j < sim::kNumDof; ++j)
    reg.joint_acc[j] = (robot.qd[j] - prev_qd_[j]) / dt_ctrl_;
  reg.action = to_jointvec(last_action_);
  reg.prev_action = to_jointvec(prev_action_);
  reg.q = robot.q;

  std::array<Vec2, sim::kNumSites> site_pos, site_vel;
  sim::Simulator::site_states(model, robot, site_pos, site_vel);
  const std::array<int, 2> feet{sim::kFootL, sim::kFootR};
  for (int i = 0; i < 2; ++i) {
    const bool contact = res.contacts.ground[static_cast<size_t>(feet[static_cast<size_t>(i)])].flag();
    reg.foot_contact[static_cast<size_t>(i)] = contact;
    reg.foot_slip_speed[static_cast<size_t>(i)] =
        contact ? std::abs(site_vel[static_cast<size_t>(feet[static_cast<size_t>(i)])].x) : 0.0;
    if (contact && !foot_contact_[static_cast<size_t>(i)]) {
      reg.touchdown_air_time[static_cast<size_t>(i)] = air_time_[static_cast<size_t>(i)];
      air_time_[static_cast<size_t>(i)] = 0.0;
    } else {
      reg.touchdown_air_time[static_cast<size_t>(i)] = -1.0;
      if (!contact) air_time_[static_cast<size_t>(i)] += dt_ctrl_;
    }
    foot_contact_[static_cast<size_t>(i)] = contact;
  }

  const std::array<int, 4> undesired{sim::kKneePtL, sim::kKneePtR, sim::kPelvis, sim::kHead};
  for (int s : undesired) {
    if (res.contacts.ground[static_cast<size_t>(s)].flag()) ++reg.undesired_contact_count;
    if (res.contacts.object[static_cast<size_t>(s)].flag()) ++reg.undesired_contact_count;
  }

  const rewards::ReferenceFrame& ref = t.frames[static_cast<size_t>(phase_)];
  StepOutcome out;
  out.reward = rewards::compute_reward(model, robot, object, res.contacts, ref, reg, cfg_.reward,
                                       rewards::InteractionSites{});
  out.reason = rewards::check_termination(model, robot, object, ref, cfg_.term);
  if (out.reason != rewards::TerminationReason::kNone) {
    out.done = true;
  } else if (phase_ >= t.length() - 1) {
    out.done = true;
    out.timeout = true;
  }

  prev_qd_ = robot.qd;
  last_contacts_ = res.contacts;
  perturbation_tick(res.contacts);
  push_history();
  resample_object_estimate();
  refresh_command();
  return out;
}

void MimicEnv::step_free(const Vec& action) {
  if (static_cast<int>(action.size()) != sim::kNumDof)
    throw ConfigError("env: action width mismatch");
  prev_action_ = last_action_;
  last_action_ = action;

  const sim::RobotModel& model = sim_.model();
  sim::JointVec targets;
  for (int j = 0; j < sim::kNumDof; ++j)
    targets[j] = model.default_q[j] + model.action_scale * action[static_cast<size_t>(j)];

  const sim::StepResult res = sim_.step(targets);
  survived_steps_ += 1;
  prev_qd_ = sim_.robot().qd;
  last_contacts_ = res.contacts;
  push_history();
  resample_object_estimate();
}

Vec MimicEnv::privileged_obs() const {
  const sim::RobotModel& model = sim_.model();
  const sim::RobotState& robot = sim_.robot();
  const sim::ObjectState& object = sim_.object();
  const ReferenceTrack& t = track();

  Vec o;
  o.reserve(static_cast<size_t>(privileged_obs_dim()));

  std::array<Vec2, sim::kNumBodies> body_pos;
  std::array<double, sim::kNumBodies> body_angle;
  sim::Simulator::forward_kinematics(model, robot, body_pos, body_angle);

  for (int b = 0; b < sim::kNumBodies; ++b)
    append(o, rotate_inv(robot.pitch, body_pos[static_cast<size_t>(b)] - robot.base_pos));
  for (int b = 0; b < sim::kNumBodies; ++b)
    append_angle(o, body_angle[static_cast<size_t>(b)] - robot.pitch);
  append(o, rotate_inv(robot.pitch, robot.base_vel));
  append(o, robot.pitch_rate);
  for (int j = 0; j < sim::kNumDof; ++j) append(o, robot.q[j]);
  for (int j = 0; j < sim::kNumDof; ++j) append(o, robot.qd[j]);
  for (int j = 0; j < sim::kNumDof; ++j) append(o, last_action_[static_cast<size_t>(j)]);
  append(o, rotate_inv(robot.pitch, object.pos - robot.base_pos));
  append_angle(o, object.angle - robot.pitch);
  append(o, rotate_inv(robot.pitch, object.vel));
  append(o, object.angle_rate);

  for (int k = 1; k <= kFutureWindow; ++k) {
    const int idx = std::min(phase_ + k, t.length() - 1);
    const rewards::ReferenceFrame& f = t.frames[static_cast<size_t>(idx)];
    for (int j = 0; j < sim::kNumDof; ++j) append(o, f.robot.q[j]);
    for (int j = 0; j < sim::kNumDof; ++j) append(o, f.robot.qd[j]);
    append(o, rotate_inv(robot.pitch, f.robot.base_pos - robot.base_pos));
    append_angle(o, f.robot.pitch - robot.pitch);
    append(o, rotate_inv(robot.pitch, f.object.pos - robot.base_pos));
    append_angle(o, f.object.angle - robot.pitch);
    append(o, rotate_inv(robot.pitch, f.object.vel));
    append(o, f.object.angle_rate);
  }

  if (static_cast<int>(o.size()) != privileged_obs_dim())
    throw ConfigError("env: privileged observation width mismatch");
  return o;
}

std::array<double, 4> MimicEnv::object_obs() const {
  const sim::RobotState& robot = sim_.robot();
  const Vec2 rel = rotate_inv(robot.pitch, object_est_pos_ - robot.base_pos);
  const double da = object_est_angle_ - robot.pitch;
  return {rel.x, rel.z, std::cos(da), std::sin(da)};
}

std::array<double, 4> MimicEnv::goal_obs() const {
  const sim::RobotState& robot = sim_.robot();
  const ReferenceTrack& t = track();
  const Vec2 rel = rotate_inv(robot.pitch, t.goal_pos - robot.base_pos);
  const double da = t.goal_angle - robot.pitch;
  return {rel.x, rel.z, std::cos(da), std::sin(da)};
}

void MimicEnv::set_command(const data::CommandVector& c) { cmd_ = c; }

Vec MimicEnv::deployable_obs() const {
  const sim::RobotState& robot = sim_.robot();
  Vec o;
  o.reserve(static_cast<size_t>(deployable_obs_dim()));

  // Item-major history blocks, oldest frame first within each item.
  for (const auto& h : history_) append(o, h[0]);
  for (const auto& h : history_)
    for (int j = 0; j < sim::kNumDof; ++j) append(o, h[static_cast<size_t>(1 + j)]);
  for (const auto& h : history_)
    for (int j = 0; j < sim::kNumDof; ++j) append(o, h[static_cast<size_t>(7 + j)]);
  for (const auto& h : history_)
    for (int j = 0; j < sim::kNumDof; ++j) append(o, h[static_cast<size_t>(13 + j)]);
  for (const auto& h : history_) {
    append(o, h[19]);
    append(o, h[20]);
  }

  const std::array<double, 4> obj = object_obs();
  for (double v : obj) append(o, v);

  for (int j = 0; j < sim::kNumDof; ++j) append(o, cmd_.q_cmd[j]);
  append(o, rotate_inv(robot.pitch, cmd_.v_cmd));
  append(o, cmd_.omega_cmd);
  append(o, cmd_.label ? 1.0 : 0.0);

  if (static_cast<int>(o.size()) != deployable_obs_dim())
    throw ConfigError("env: deployable observation width mismatch");
  return o;
}

int MimicEnv::state_size() {
  // snapshot 40, bookkeeping 4, action/velocity carries 18, foot state 4,
  // contact report 34, push timer 1, command 10, object estimate 3,
  // history frames, rng 3
  return 40 + 4 + 18 + 4 + 34 + 1 + 10 + 3 + kHistoryLen * 21 + 3;
}

void MimicEnv::serialize(Vec& out) const {
  const size_t start = out.size();
  auto put = [&out](double v) { out.push_back(v); };
  auto put2 = [&put](const Vec2& v) {
    put(v.x);
    put(v.z);
  };
  auto putj = [&put](const sim::JointVec& j) {
    for (double v : j) put(v);
  };
  auto putp = [&put](const sim::PairForce& p) {
    put(p.normal);
    put(p.tangent);
  };

  const sim::Snapshot snap = sim_.snapshot();
  put2(snap.robot.base_pos);
  put(snap.robot.pitch);
  put2(snap.robot.base_vel);
  put(snap.robot.pitch_rate);
  putj(snap.robot.q);
  putj(snap.robot.qd);
  put2(snap.object.pos);
  put(snap.object.angle);
  put2(snap.object.vel);
  put(snap.object.angle_rate);
  put(snap.params.robot_friction_static);
  put(snap.params.robot_friction_dynamic);
  put(snap.params.robot_restitution);
  put(snap.params.object_friction_static);
  put(snap.params.object_friction_dynamic);
  put(snap.params.object_restitution);
  put(snap.params.object_mass_scale);
  put2(snap.params.com_offset);
  putj(snap.params.joint_default_offset);
  put(snap.time);

  put(track_index_);
  put(phase_);
  put(survived_steps_);
  put(from_pool_ ? 1.0 : 0.0);

  for (double v : last_action_) put(v);
  for (double v : prev_action_) put(v);
  putj(prev_qd_);
  put(air_time_[0]);
  put(air_time_[1]);
  put(foot_contact_[0] ? 1.0 : 0.0);
  put(foot_contact_[1] ? 1.0 : 0.0);

  for (const auto& p : last_contacts_.ground) putp(p);
  for (const auto& p : last_contacts_.object) putp(p);
  putp(last_contacts_.box_ground);

  put(push_timer_);
  putj(cmd_.q_cmd);
  put2(cmd_.v_cmd);
  put(cmd_.omega_cmd);
  put(cmd_.label ? 1.0 : 0.0);
  put2(object_est_pos_);
  put(object_est_angle_);

  for (const auto& h : history_)
    for (double v : h) put(v);

  uint64_t rs;
  double rc;
  bool rh;
  rng_.save_state(rs, rc, rh);
  put(std::bit_cast<double>(rs));
  put(rc);
  put(rh ? 1.0 : 0.0);

  if (out.size() - start != static_cast<size_t>(state_size()))
    throw ConfigError("env: serialized state width mismatch");
}

void MimicEnv::deserialize(const Vec& in, size_t& off) {
  if (off + static_cast<size_t>(state_size()) > in.size())
    throw DataError("env: truncated run state");
  auto take = [&in, &off]() { return in[off++]; };
  auto take2 = [&take]() {
    const double x = take();
    return Vec2{x, take()};
  };
  auto takej = [&take]() {
    sim::JointVec j;
    for (double& v : j) v = take();
    return j;
  };
  auto takep = [&take]() {
    sim::PairForce p;
    p.normal = take();
    p.tangent = take();
    return p;
  };

  sim::Snapshot snap;
  snap.robot.base_pos = take2();
  snap.robot.pitch = take();
  snap.robot.base_vel = take2();
  snap.robot.pitch_rate = take();
  snap.robot.q = takej();
  snap.robot.qd = takej();
  snap.object.pos = take2();
  snap.object.angle = take();
  snap.object.vel = take2();
  snap.object.angle_rate = take();
  snap.params.robot_friction_static = take();
  snap.params.robot_friction_dynamic = take();
  snap.params.robot_restitution = take();
  snap.params.object_friction_static = take();
  snap.params.object_friction_dynamic = take();
  snap.params.object_restitution = take();
  snap.params.object_mass_scale = take();
  snap.params.com_offset = take2();
  snap.params.joint_default_offset = takej();
  snap.time = take();
  sim_.restore(snap);

  track_index_ = static_cast<int>(take());
  if (track_index_ < 0 || track_index_ >= static_cast<int>(tracks_->size()))
    throw DataError("env: run state references a missing track");
  phase_ = static_cast<int>(take());
  survived_steps_ = static_cast<int>(take());
  from_pool_ = take() != 0.0;

  for (double& v : last_action_) v = take();
  for (double& v : prev_action_) v = take();
  prev_qd_ = takej();
  air_time_[0] = take();
  air_time_[1] = take();
  foot_contact_[0] = take() != 0.0;
  foot_contact_[1] = take() != 0.0;

  for (auto& p : last_contacts_.ground) p = takep();
  for (auto& p : last_contacts_.object) p = takep();
  last_contacts_.box_ground = takep();

  push_timer_ = take();
  cmd_.q_cmd = takej();
  cmd_.v_cmd = take2();
  cmd_.omega_cmd = take();
  cmd_.label = take() != 0.0;
  object_est_pos_ = take2();
  object_est_angle_ = take();

  for (auto& h : history_)
    for (double& v : h) v = take();

  const uint64_t rs = std::bit_cast<uint64_t>(take());
  const double rc = take();
  const bool rh = take() != 0.0;
  rng_.load_state(rs, rc, rh);
}

}  // namespace locomanip::env
