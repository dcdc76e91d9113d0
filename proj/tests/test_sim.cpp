#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locomanip/errors.hpp"
#include "locomanip/rng.hpp"
#include "locomanip/sim.hpp"

using namespace locomanip;
using namespace locomanip::sim;

namespace {

Simulator make_sim(const SimConfig& cfg) {
  return Simulator(default_robot_model(), BoxModel{}, cfg);
}

bool robot_equal(const RobotState& a, const RobotState& b) {
  if (a.base_pos.x != b.base_pos.x || a.base_pos.z != b.base_pos.z) return false;
  if (a.pitch != b.pitch || a.pitch_rate != b.pitch_rate) return false;
  if (a.base_vel.x != b.base_vel.x || a.base_vel.z != b.base_vel.z) return false;
  for (int j = 0; j < kNumDof; ++j)
    if (a.q[j] != b.q[j] || a.qd[j] != b.qd[j]) return false;
  return true;
}

bool object_equal(const ObjectState& a, const ObjectState& b) {
  return a.pos.x == b.pos.x && a.pos.z == b.pos.z && a.angle == b.angle &&
         a.vel.x == b.vel.x && a.vel.z == b.vel.z && a.angle_rate == b.angle_rate;
}

// Robot parked high in the air and far to the side so box tests see no
// robot-ground or robot-box contact. High enough that it is still falling
// after six simulated seconds.
RobotState parked_robot() {
  RobotState r;
  r.base_pos = {-50.0, 300.0};
  r.q = default_robot_model().default_q;
  return r;
}

}  // namespace

TEST_CASE("pd torque: zero error zero rate gives zero") {
  SimConfig cfg;
  JointVec q{0.3, -0.2, 0.1, -0.4, 0.5, -0.5};
  JointVec qd{};
  const JointVec tau = Simulator::pd_torque(cfg, q, qd, q);
  for (int j = 0; j < kNumDof; ++j) CHECK(tau[j] == 0.0);
}

TEST_CASE("pd torque: direct formula") {
  SimConfig cfg;
  cfg.pd_kp.fill(10.0);
  cfg.pd_kd.fill(1.0e-12);
  JointVec q{}, qd{}, cmd{};
  cmd[0] = 0.1;
  const JointVec tau = Simulator::pd_torque(cfg, q, qd, cmd);
  CHECK(tau[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pd torque: clamped to the limit") {
  SimConfig cfg;
  cfg.pd_kp.fill(50.0);
  cfg.pd_kd.fill(2.0);
  cfg.torque_limit.fill(10.0);
  JointVec q{}, qd{}, cmd{};
  cmd[0] = 0.3;
  qd[0] = -1.0;  // kp*0.3 + kd*1.0 = 17 before the clamp
  const JointVec tau = Simulator::pd_torque(cfg, q, qd, cmd);
  CHECK(tau[0] == 10.0);
  qd[0] = 1.0;  // 15 - 2 = 13, still above
  CHECK(Simulator::pd_torque(cfg, q, qd, cmd)[0] == 10.0);
}

TEST_CASE("zero gravity equilibrium holds to integrator tolerance") {
  SimConfig cfg;
  cfg.gravity = 0.0;
  Simulator s = make_sim(cfg);
  RobotState r;
  r.base_pos = {0.0, 5.0};  // airborne, no contacts
  ObjectState o;
  o.pos = {3.0, 5.0};
  s.reset(r, o);
  JointVec zero{};
  for (int i = 0; i < 10; ++i) s.step(zero);
  CHECK(std::abs(s.robot().base_pos.x - 0.0) <= 1e-12);
  CHECK(std::abs(s.robot().base_pos.z - 5.0) <= 1e-12);
  CHECK(std::abs(s.robot().pitch) <= 1e-12);
  for (int j = 0; j < kNumDof; ++j) {
    CHECK(std::abs(s.robot().q[j]) <= 1e-12);
    CHECK(std::abs(s.robot().qd[j]) <= 1e-12);
  }
  CHECK(std::abs(s.object().pos.x - 3.0) <= 1e-12);
  CHECK(std::abs(s.object().pos.z - 5.0) <= 1e-12);
}

TEST_CASE("ballistic box: one substep drops the vertical rate by exactly g dt") {
  SimConfig cfg;
  cfg.control_decimation = 1;
  Simulator s = make_sim(cfg);
  ObjectState o;
  o.pos = {5.0, 8.0};
  o.vel = {0.7, 0.2};
  s.reset(parked_robot(), o);
  const double vz0 = s.object().vel.z;
  s.step(default_robot_model().default_q);
  CHECK(s.object().vel.z == doctest::Approx(vz0 - cfg.gravity * cfg.physics_dt).epsilon(1e-15));
}

TEST_CASE("ballistic box conserves horizontal momentum to 1e-9 per step") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  ObjectState o;
  o.pos = {5.0, 500.0};
  o.vel = {1.3, 0.0};
  o.angle_rate = 0.4;
  s.reset(parked_robot(), o);
  const JointVec hold = default_robot_model().default_q;
  for (int i = 0; i < 200; ++i) {
    const double vx_before = s.object().vel.x;
    const double w_before = s.object().angle_rate;
    s.step(hold);
    CHECK(std::abs(s.object().vel.x - vx_before) <= 1e-9);
    CHECK(std::abs(s.object().angle_rate - w_before) <= 1e-9);
  }
}

TEST_CASE("contact flag matches the 1 N threshold exactly") {
  PairForce p;
  p.normal = 1.0;
  CHECK_FALSE(p.flag());
  p.normal = 1.0 + 1e-12;
  CHECK(p.flag());
  p.normal = 0.0;
  CHECK_FALSE(p.flag());
  p.normal = 57.3;
  CHECK(p.flag());
}

TEST_CASE("box resting on the ground reports its weight within 5 percent") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  BoxModel box;
  ObjectState o;
  o.pos = {5.0, box.half_extents.z};
  s.reset(parked_robot(), o);
  const JointVec hold = default_robot_model().default_q;
  StepResult res;
  for (int i = 0; i < 100; ++i) res = s.step(hold);  // 2 s of settling
  const double weight = box.mass * cfg.gravity;
  CHECK(res.contacts.box_ground.normal == doctest::Approx(weight).epsilon(0.05));

  SUBCASE("doubling the mass scale doubles the resting force") {
    PhysicalParams pp;
    pp.object_mass_scale = 2.0;
    s.set_physical_params(pp);
    for (int i = 0; i < 100; ++i) res = s.step(hold);
    CHECK(res.contacts.box_ground.normal == doctest::Approx(2.0 * weight).epsilon(0.05));
  }
}

TEST_CASE("identity physical params leave trajectories bit-identical") {
  SimConfig cfg;
  Simulator a = make_sim(cfg), b = make_sim(cfg);
  RobotState r;
  r.base_pos = {0.0, default_robot_model().default_base_height};
  r.q = default_robot_model().default_q;
  ObjectState o;
  o.pos = {0.8, 0.30};
  a.reset(r, o);
  b.reset(r, o);
  b.set_physical_params(PhysicalParams{});  // explicit defaults
  const JointVec hold = default_robot_model().default_q;
  for (int i = 0; i < 50; ++i) {
    a.step(hold);
    b.step(hold);
  }
  CHECK(robot_equal(a.robot(), b.robot()));
  CHECK(object_equal(a.object(), b.object()));
}

TEST_CASE("impulses add velocity deltas exactly and sum linearly") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  ObjectState o;
  o.pos = {5.0, 20.0};
  s.reset(parked_robot(), o);

  const double vx0 = s.object().vel.x;
  s.apply_object_impulse({0.5, 0.0}, 0.0);
  CHECK(s.object().vel.x == vx0 + 0.5);

  const ObjectState before = s.object();
  s.apply_object_impulse({0.0, 0.0}, 0.0);
  CHECK(object_equal(s.object(), before));

  s.apply_object_impulse({0.2, -0.1}, 0.3);
  s.apply_object_impulse({0.1, 0.1}, -0.1);
  CHECK(s.object().vel.x == doctest::Approx(vx0 + 0.5 + 0.3).epsilon(1e-15));
  CHECK(s.object().vel.z == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.object().angle_rate == doctest::Approx(0.2).epsilon(1e-15));

  const double rvx = s.robot().base_vel.x;
  s.apply_robot_impulse({0.3, 0.0}, 0.25);
  CHECK(s.robot().base_vel.x == rvx + 0.3);
  CHECK(s.robot().pitch_rate == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("snapshot restore round-trip is bit-exact over 1000 steps") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  RobotState r;
  r.base_pos = {0.0, default_robot_model().default_base_height};
  r.q = default_robot_model().default_q;
  ObjectState o;
  o.pos = {0.85, 0.30};
  s.reset(r, o);

  Rng rng(7);
  JointVec targets = default_robot_model().default_q;
  auto wiggle = [&](int i) {
    JointVec t = targets;
    for (int j = 0; j < kNumDof; ++j) t[j] += 0.05 * std::sin(0.05 * i + j);
    return t;
  };

  for (int i = 0; i < 100; ++i) s.step(wiggle(i));
  const Snapshot snap = s.snapshot();

  // branch A: continue directly
  Simulator a = make_sim(cfg);
  a.restore(snap);
  for (int i = 100; i < 1100; ++i) a.step(wiggle(i));

  // branch B: restore, run garbage, restore again, then continue
  s.restore(snap);
  for (int i = 0; i < 37; ++i) s.step(default_robot_model().default_q);
  s.restore(snap);
  for (int i = 100; i < 1100; ++i) s.step(wiggle(i));

  CHECK(robot_equal(a.robot(), s.robot()));
  CHECK(object_equal(a.object(), s.object()));
  CHECK(a.time() == s.time());
}

TEST_CASE("energy never increases without actuation") {
  SimConfig cfg;
  cfg.pd_kp.fill(1.0e-12);  // strictly positive per validation, effectively off
  cfg.pd_kd.fill(1.0e-12);
  Simulator s = make_sim(cfg);
  RobotState r;
  r.base_pos = {0.0, default_robot_model().default_base_height + 0.10};
  r.q = default_robot_model().default_q;
  ObjectState o;
  o.pos = {0.9, 0.45};  // dropped slightly above the ground
  s.reset(r, o);
  JointVec zero{};
  double prev = s.total_energy();
  for (int i = 0; i < 300; ++i) {
    s.step(zero);
    const double e = s.total_energy();
    CHECK(e <= prev + 1e-6);
    prev = e;
  }
}

TEST_CASE("joint positions never leave the soft-limit excursion band") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  RobotState r;
  r.base_pos = {0.0, default_robot_model().default_base_height};
  r.q = default_robot_model().default_q;
  ObjectState o;
  o.pos = {5.0, 0.30};
  s.reset(r, o);
  const RobotModel m = default_robot_model();
  JointVec hi_cmd, lo_cmd;
  for (int j = 0; j < kNumDof; ++j) {
    hi_cmd[j] = m.joint_hi[j] + 10.0;
    lo_cmd[j] = m.joint_lo[j] - 10.0;
  }
  for (int i = 0; i < 500; ++i) {
    s.step((i / 25) % 2 == 0 ? hi_cmd : lo_cmd);
    for (int j = 0; j < kNumDof; ++j) {
      CHECK(s.robot().q[j] >= m.joint_lo[j] - cfg.limit_excursion - 1e-12);
      CHECK(s.robot().q[j] <= m.joint_hi[j] + cfg.limit_excursion + 1e-12);
    }
  }
}

TEST_CASE("divergent state raises an error instead of propagating NaN") {
  SimConfig cfg;
  Simulator s = make_sim(cfg);
  ObjectState o;
  o.pos = {5.0, 0.3};

  RobotState bad;
  bad.base_pos = {0.0, 1.0};
  bad.base_vel = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(s.set_state(bad, o), DivergenceError);

  // A finite state just inside the speed guard blows past it while falling.
  RobotState fast;
  fast.base_pos = {0.0, 3000.0};
  fast.base_vel = {0.0, -999.5};
  fast.q = default_robot_model().default_q;
  s.set_state(fast, o);
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 10; ++i) s.step(JointVec{});
      }(),
      DivergenceError);
}
