#include "locomanip/state_pool.hpp"

#include <algorithm>
#include <cmath>

#include "locomanip/errors.hpp"

namespace locomanip::pool {
namespace {

constexpr double kMaxProjection = 0.2;   // m
constexpr double kForceFactor = 10.0;    // stability bound: 10x system weight
constexpr int kSampleAttempts = 32;
}  // namespace

StatePool::StatePool(int capacity, int num_trajectories, int survive_steps)
    : capacity_(capacity), survive_steps_(survive_steps), num_trajectories_(num_trajectories) {
  if (capacity < 1 || num_trajectories < 1)
    throw ConfigError("state pool: capacity and trajectory count must be positive");
  quota_ = (capacity + num_trajectories - 1) / num_trajectories;
}

int StatePool::count(int trajectory_id) const {
  int n = 0;
  for (const auto& e : entries_) n += e.trajectory_id == trajectory_id ? 1 : 0;
  return n;
}

double StatePool::mean_phase() const {
  if (entries_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : entries_) s += e.phase;
  return s / entries_.size();
}

void StatePool::evict_oldest_of(int trajectory_id) {
  int victim = -1;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].trajectory_id != trajectory_id) continue;
    if (victim < 0 || entry_order_[i] < entry_order_[victim]) victim = static_cast<int>(i);
  }
  if (victim >= 0) {
    entries_.erase(entries_.begin() + victim);
    entry_order_.erase(entry_order_.begin() + victim);
  }
}

bool StatePool::try_insert(const sim::RobotModel& model, const sim::Snapshot& snap,
                           int trajectory_id, int phase, const rewards::ReferenceFrame& ref,
                           const rewards::TerminationConfig& term, int survived_steps,
                           int iteration) {
  if (capacity_ == 0) throw ConfigError("state pool: not configured");
  if (survived_steps < survive_steps_) return false;
  if (rewards::check_termination(model, snap.robot, snap.object, ref, term) !=
      rewards::TerminationReason::kNone)
    return false;

  if (count(trajectory_id) >= quota_) {
    evict_oldest_of(trajectory_id);
  } else if (size() >= capacity_) {
    int busiest = -1, busiest_count = -1;
    for (const auto& e : entries_) {
      const int c = count(e.trajectory_id);
      if (c > busiest_count) {
        busiest_count = c;
        busiest = e.trajectory_id;
      }
    }
    evict_oldest_of(busiest);
  }

  PoolEntry e;
  e.snap = snap;
  e.trajectory_id = trajectory_id;
  e.phase = phase;
  e.iteration = iteration;
  entries_.push_back(e);
  entry_order_.push_back(insert_counter_++);
  return true;
}

const PoolEntry* StatePool::sample(int trajectory_id, Rng& rng) const {
  if (entries_.empty()) return nullptr;
  std::vector<int> own;
  for (size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].trajectory_id == trajectory_id) own.push_back(static_cast<int>(i));
  if (!own.empty()) return &entries_[own[rng.uniform_int(own.size())]];
  return &entries_[rng.uniform_int(entries_.size())];
}

void StatePool::serialize(nn::Vec& out) const {
  out.clear();
  out.reserve(static_cast<size_t>(size()) * entry_stride());
  for (const auto& e : entries_) {
    const sim::RobotState& r = e.snap.robot;
    const sim::ObjectState& o = e.snap.object;
    const sim::PhysicalParams& p = e.snap.params;
    const double vals[] = {r.base_pos.x,
                           r.base_pos.z,
                           r.pitch,
                           r.base_vel.x,
                           r.base_vel.z,
                           r.pitch_rate,
                           r.q[0], r.q[1], r.q[2], r.q[3], r.q[4], r.q[5],
                           r.qd[0], r.qd[1], r.qd[2], r.qd[3], r.qd[4], r.qd[5],
                           o.pos.x, o.pos.z, o.angle, o.vel.x, o.vel.z, o.angle_rate,
                           p.robot_friction_static, p.robot_friction_dynamic,
                           p.robot_restitution, p.object_friction_static,
                           p.object_friction_dynamic, p.object_restitution,
                           p.object_mass_scale, p.com_offset.x, p.com_offset.z,
                           e.snap.time,
                           static_cast<double>(e.trajectory_id),
                           static_cast<double>(e.phase),
                           static_cast<double>(e.iteration)};
    out.insert(out.end(), std::begin(vals), std::end(vals));
  }
}

void StatePool::deserialize(const nn::Vec& data, int count) {
  if (static_cast<int>(data.size()) < count * entry_stride())
    throw DataError("state pool: serialized blob too short");
  entries_.clear();
  entry_order_.clear();
  insert_counter_ = 0;
  for (int i = 0; i < count; ++i) {
    const double* v = data.data() + static_cast<size_t>(i) * entry_stride();
    PoolEntry e;
    sim::RobotState& r = e.snap.robot;
    sim::ObjectState& o = e.snap.object;
    sim::PhysicalParams& p = e.snap.params;
    r.base_pos = {v[0], v[1]};
    r.pitch = v[2];
    r.base_vel = {v[3], v[4]};
    r.pitch_rate = v[5];
    for (int j = 0; j < sim::kNumDof; ++j) r.q[j] = v[6 + j];
    for (int j = 0; j < sim::kNumDof; ++j) r.qd[j] = v[12 + j];
    o.pos = {v[18], v[19]};
    o.angle = v[20];
    o.vel = {v[21], v[22]};
    o.angle_rate = v[23];
    p.robot_friction_static = v[24];
    p.robot_friction_dynamic = v[25];
    p.robot_restitution = v[26];
    p.object_friction_static = v[27];
    p.object_friction_dynamic = v[28];
    p.object_restitution = v[29];
    p.object_mass_scale = v[30];
    p.com_offset = {v[31], v[32]};
    e.snap.time = v[33];
    e.trajectory_id = static_cast<int>(v[34]);
    e.phase = static_cast<int>(v[35]);
    e.iteration = static_cast<int>(v[36]);
    entries_.push_back(e);
    entry_order_.push_back(insert_counter_++);
  }
}

InitMode init_mode_by_name(const std::string& name) {
  if (name == "ssi") return InitMode::kSSI;
  if (name == "rsi") return InitMode::kRSI;
  if (name == "pspi") return InitMode::kPSPI;
  if (name == "rsi_pspi") return InitMode::kRSIToPSPI;
  throw ConfigError("unknown init mode: " + name);
}

const char* init_mode_name(InitMode m) {
  switch (m) {
    case InitMode::kSSI: return "ssi";
    case InitMode::kRSI: return "rsi";
    case InitMode::kPSPI: return "pspi";
    case InitMode::kRSIToPSPI: return "rsi_pspi";
  }
  return "?";
}

void InitSchedule::validate() const {
  if (!(p_max >= 0.0 && p_max <= 1.0)) throw ConfigError("init schedule: p_max outside [0,1]");
  if (ramp_iters < 1) throw ConfigError("init schedule: ramp_iters must be positive");
}

double InitSchedule::pool_prob(int iteration) const {
  switch (mode) {
    case InitMode::kSSI:
    case InitMode::kRSI:
      return 0.0;
    case InitMode::kPSPI:
      return 1.0;
    case InitMode::kRSIToPSPI:
      return p_max * clampd(static_cast<double>(iteration) / ramp_iters, 0.0, 1.0);
  }
  return 0.0;
}

bool project_to_feasible(const sim::RobotModel& model, const sim::BoxModel& box,
                         const sim::SimConfig& config, const sim::PhysicalParams& params,
                         sim::RobotState& robot, sim::ObjectState& object) {
  std::array<Vec2, sim::kNumSites> pos, vel;

  // Robot-ground: lift the whole robot by the deepest site penetration.
  sim::Simulator::site_states(model, robot, pos, vel);
  double deficit = 0.0;
  for (const auto& p : pos) deficit = std::max(deficit, -p.z);
  if (deficit > kMaxProjection) return false;
  if (deficit > 0.0) {
    robot.base_pos.z += deficit;
    robot.base_vel.z = std::max(robot.base_vel.z, 0.0);
  }

  // Robot-box: push the box out along the face normal of the deepest site.
  for (int iter = 0; iter < 8; ++iter) {
    sim::Simulator::site_states(model, robot, pos, vel);
    double worst = 0.0;
    Vec2 push{0.0, 0.0};
    for (const auto& p : pos) {
      const Vec2 d = rotate_inv(object.angle, p - object.pos);
      const double ox = box.half_extents.x - std::abs(d.x);
      const double oz = box.half_extents.z - std::abs(d.z);
      if (ox <= 0.0 || oz <= 0.0) continue;  // outside
      // Nearest face and the outward push (of the box, away from the site).
      if (ox < oz) {
        const Vec2 n = rotate(object.angle, Vec2{d.x >= 0.0 ? -1.0 : 1.0, 0.0});
        if (ox > worst) {
          worst = ox;
          push = n * ox;
        }
      } else {
        const Vec2 n = rotate(object.angle, Vec2{0.0, d.z >= 0.0 ? -1.0 : 1.0});
        if (oz > worst) {
          worst = oz;
          push = n * oz;
        }
      }
    }
    if (worst <= 0.0) break;
    if (worst > kMaxProjection) return false;
    object.pos += push;
    const double pn = push.norm();
    if (pn > 1e-12) {
      const Vec2 n = push * (1.0 / pn);
      const double approach = -object.vel.dot(n);
      if (approach > 0.0) object.vel += n * approach;
    }
  }

  // Box-ground: lift by the deepest corner penetration.
  double corner_min = 1e300;
  for (int sx : {-1, 1})
    for (int sz : {-1, 1}) {
      const Vec2 corner =
          object.pos + rotate(object.angle, Vec2{sx * box.half_extents.x, sz * box.half_extents.z});
      corner_min = std::min(corner_min, corner.z);
    }
  if (-corner_min > kMaxProjection) return false;
  if (corner_min < 0.0) {
    object.pos.z -= corner_min;
    object.vel.z = std::max(object.vel.z, 0.0);
  }

  // One-substep stability check with position-holding targets.
  sim::SimConfig probe_cfg = config;
  probe_cfg.control_decimation = 1;
  sim::Simulator probe(model, box, probe_cfg);
  probe.set_physical_params(params);
  probe.set_state(robot, object);
  sim::StepResult res;
  try {
    res = probe.step(robot.q);
  } catch (const DivergenceError&) {
    return false;
  }
  double total_mass = box.mass * params.object_mass_scale;
  for (double m : model.mass) total_mass += m;
  const double bound = kForceFactor * total_mass * config.gravity;
  double peak = 0.0;
  for (const auto& p : res.contacts.ground) peak = std::max(peak, p.normal);
  for (const auto& p : res.contacts.object) peak = std::max(peak, p.normal);
  peak = std::max(peak, res.contacts.box_ground.normal);
  return peak <= bound;
}

InitResult sample_init(const StatePool& pool, const InitSchedule& sched,
                       const std::vector<rewards::ReferenceFrame>& ref,
                       const sim::RobotModel& model, const sim::BoxModel& box,
                       const sim::SimConfig& config, const sim::PhysicalParams& params,
                       int trajectory_id, int iteration, Rng& rng) {
  sched.validate();
  if (ref.empty()) throw ConfigError("sample_init: empty reference trajectory");

  const double p_pool = sched.pool_prob(iteration);
  if (p_pool > 0.0 && rng.uniform01() < p_pool) {
    const PoolEntry* e = pool.sample(trajectory_id, rng);
    if (e) {
      InitResult r;
      r.robot = e->snap.robot;
      r.object = e->snap.object;
      r.phase = e->phase;
      r.from_pool = true;
      return r;
    }
  }

  for (int attempt = 0; attempt < kSampleAttempts; ++attempt) {
    const int phase = sched.mode == InitMode::kSSI
                          ? 0
                          : static_cast<int>(rng.uniform_int(ref.size()));
    InitResult r;
    r.robot = ref[phase].robot;
    r.object = ref[phase].object;
    r.phase = phase;
    r.from_pool = false;
    if (project_to_feasible(model, box, config, params, r.robot, r.object)) return r;
    if (sched.mode == InitMode::kSSI) break;  // frame 0 is deterministic
  }
  throw DivergenceError("sample_init: no feasible start found");
}

}  // namespace locomanip::pool
