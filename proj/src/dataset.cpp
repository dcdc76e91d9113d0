#include "locomanip/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "locomanip/errors.hpp"

namespace locomanip::data {
namespace {

constexpr const char* kPriorsMagic = "locomanip-priors v1";
constexpr const char* kRefinedMagic = "locomanip-refined v1";
constexpr const char* kRolloutsMagic = "locomanip-rollouts v1";

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open for reading: " + path);
  return f;
}

std::string next_line(std::ifstream& f, const std::string& path) {
  std::string line;
  if (!std::getline(f, line)) throw DataError("unexpected end of file: " + path);
  return line;
}

void expect_tag(std::istringstream& ss, const char* tag, const std::string& path) {
  std::string got;
  ss >> got;
  if (got != tag) throw DataError("expected '" + std::string(tag) + "' in " + path);
}

double read_num(std::istringstream& ss, const std::string& path) {
  double v;
  if (!(ss >> v)) throw DataError("malformed number in " + path);
  return v;
}

int read_int(std::istringstream& ss, const std::string& path) {
  int v;
  if (!(ss >> v)) throw DataError("malformed integer in " + path);
  return v;
}

void put(std::string& line, double v) {
  line += ' ';
  line += fmt_g9(v);
}

void write_robot(std::string& line, const sim::RobotState& r) {
  put(line, r.base_pos.x);
  put(line, r.base_pos.z);
  put(line, r.pitch);
  for (double q : r.q) put(line, q);
  put(line, r.base_vel.x);
  put(line, r.base_vel.z);
  put(line, r.pitch_rate);
  for (double qd : r.qd) put(line, qd);
}

void write_object(std::string& line, const sim::ObjectState& o) {
  put(line, o.pos.x);
  put(line, o.pos.z);
  put(line, o.angle);
  put(line, o.vel.x);
  put(line, o.vel.z);
  put(line, o.angle_rate);
}

void read_robot(std::istringstream& ss, sim::RobotState& r, const std::string& path) {
  r.base_pos.x = read_num(ss, path);
  r.base_pos.z = read_num(ss, path);
  r.pitch = read_num(ss, path);
  for (double& q : r.q) q = read_num(ss, path);
  r.base_vel.x = read_num(ss, path);
  r.base_vel.z = read_num(ss, path);
  r.pitch_rate = read_num(ss, path);
  for (double& qd : r.qd) qd = read_num(ss, path);
}

void read_object(std::istringstream& ss, sim::ObjectState& o, const std::string& path) {
  o.pos.x = read_num(ss, path);
  o.pos.z = read_num(ss, path);
  o.angle = read_num(ss, path);
  o.vel.x = read_num(ss, path);
  o.vel.z = read_num(ss, path);
  o.angle_rate = read_num(ss, path);
}

void write_command(std::string& line, const CommandVector& c) {
  for (double q : c.q_cmd) put(line, q);
  put(line, c.v_cmd.x);
  put(line, c.v_cmd.z);
  put(line, c.omega_cmd);
  line += c.label ? " 1" : " 0";
}

void read_command(std::istringstream& ss, CommandVector& c, const std::string& path) {
  for (double& q : c.q_cmd) q = read_num(ss, path);
  c.v_cmd.x = read_num(ss, path);
  c.v_cmd.z = read_num(ss, path);
  c.omega_cmd = read_num(ss, path);
  c.label = read_int(ss, path) != 0;
}

}  // namespace

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_priors(const std::string& path, const std::vector<priors::KinematicPrior>& trajs) {
  std::ofstream f = open_out(path);
  f << kPriorsMagic << "\n";
  f << "count " << trajs.size() << "\n";
  for (const auto& traj : trajs) {
    std::string hdr = "trajectory";
    hdr += ' ' + std::to_string(traj.trajectory_id);
    hdr += ' ' + traj.task_id;
    hdr += ' ' + std::to_string(traj.length());
    put(hdr, traj.frame_dt);
    put(hdr, traj.goal_pos.x);
    put(hdr, traj.goal_pos.z);
    put(hdr, traj.goal_angle);
    put(hdr, traj.tolerance);
    f << hdr << "\n";
    for (const auto& fr : traj.frames) {
      std::string line;
      write_robot(line, fr.robot);
      write_object(line, fr.object);
      line += fr.label ? " 1" : " 0";
      f << line.substr(1) << "\n";
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

std::vector<priors::KinematicPrior> read_priors(const std::string& path) {
  std::ifstream f = open_in(path);
  if (next_line(f, path) != kPriorsMagic) throw DataError("bad magic in " + path);
  std::istringstream hd(next_line(f, path));
  expect_tag(hd, "count", path);
  const int count = read_int(hd, path);
  if (count < 0) throw DataError("negative trajectory count in " + path);
  std::vector<priors::KinematicPrior> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::istringstream hs(next_line(f, path));
    expect_tag(hs, "trajectory", path);
    priors::KinematicPrior traj;
    traj.trajectory_id = read_int(hs, path);
    hs >> traj.task_id;
    const int T = read_int(hs, path);
    traj.frame_dt = read_num(hs, path);
    traj.goal_pos.x = read_num(hs, path);
    traj.goal_pos.z = read_num(hs, path);
    traj.goal_angle = read_num(hs, path);
    traj.tolerance = read_num(hs, path);
    if (T < 0 || traj.frame_dt <= 0.0) throw DataError("bad trajectory header in " + path);
    traj.frames.resize(T);
    for (int t = 0; t < T; ++t) {
      std::istringstream ls(next_line(f, path));
      read_robot(ls, traj.frames[t].robot, path);
      read_object(ls, traj.frames[t].object, path);
      traj.frames[t].label = read_int(ls, path) != 0;
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void write_refined(const std::string& path, const std::vector<RefinedTrajectory>& trajs) {
  std::ofstream f = open_out(path);
  f << kRefinedMagic << "\n";
  f << "count " << trajs.size() << "\n";
  for (const auto& traj : trajs) {
    std::string hdr = "trajectory";
    hdr += ' ' + std::to_string(traj.trajectory_id);
    hdr += ' ' + std::to_string(traj.source_prior);
    hdr += ' ' + traj.task_id;
    hdr += ' ' + std::to_string(traj.length());
    put(hdr, traj.frame_dt);
    put(hdr, traj.goal_pos.x);
    put(hdr, traj.goal_pos.z);
    put(hdr, traj.goal_angle);
    put(hdr, traj.tolerance);
    f << hdr << "\n";
    for (const auto& fr : traj.frames) {
      std::string line;
      write_robot(line, fr.robot);
      write_object(line, fr.object);
      write_command(line, fr.cmd);
      f << line.substr(1) << "\n";
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

std::vector<RefinedTrajectory> read_refined(const std::string& path) {
  std::ifstream f = open_in(path);
  if (next_line(f, path) != kRefinedMagic) throw DataError("bad magic in " + path);
  std::istringstream hd(next_line(f, path));
  expect_tag(hd, "count", path);
  const int count = read_int(hd, path);
  if (count < 0) throw DataError("negative trajectory count in " + path);
  std::vector<RefinedTrajectory> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::istringstream hs(next_line(f, path));
    expect_tag(hs, "trajectory", path);
    RefinedTrajectory traj;
    traj.trajectory_id = read_int(hs, path);
    traj.source_prior = read_int(hs, path);
    hs >> traj.task_id;
    const int T = read_int(hs, path);
    traj.frame_dt = read_num(hs, path);
    traj.goal_pos.x = read_num(hs, path);
    traj.goal_pos.z = read_num(hs, path);
    traj.goal_angle = read_num(hs, path);
    traj.tolerance = read_num(hs, path);
    if (T < 0 || traj.frame_dt <= 0.0) throw DataError("bad trajectory header in " + path);
    traj.frames.resize(T);
    for (int t = 0; t < T; ++t) {
      std::istringstream ls(next_line(f, path));
      read_robot(ls, traj.frames[t].robot, path);
      read_object(ls, traj.frames[t].object, path);
      read_command(ls, traj.frames[t].cmd, path);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void write_rollouts(const std::string& path, const std::vector<RolloutTrajectory>& trajs) {
  std::ofstream f = open_out(path);
  f << kRolloutsMagic << "\n";
  f << "count " << trajs.size() << "\n";
  for (const auto& traj : trajs) {
    f << "trajectory " << traj.trajectory_id << ' ' << traj.task_id << ' ' << traj.length()
      << "\n";
    for (const auto& k : traj.knots) {
      std::string line;
      for (double v : k.object_obs) put(line, v);
      for (double v : k.goal_rel) put(line, v);
      write_command(line, k.cmd);
      f << line.substr(1) << "\n";
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

std::vector<RolloutTrajectory> read_rollouts(const std::string& path) {
  std::ifstream f = open_in(path);
  if (next_line(f, path) != kRolloutsMagic) throw DataError("bad magic in " + path);
  std::istringstream hd(next_line(f, path));
  expect_tag(hd, "count", path);
  const int count = read_int(hd, path);
  if (count < 0) throw DataError("negative trajectory count in " + path);
  std::vector<RolloutTrajectory> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::istringstream hs(next_line(f, path));
    expect_tag(hs, "trajectory", path);
    RolloutTrajectory traj;
    traj.trajectory_id = read_int(hs, path);
    hs >> traj.task_id;
    const int K = read_int(hs, path);
    if (K < 0) throw DataError("bad trajectory header in " + path);
    traj.knots.resize(K);
    for (int k = 0; k < K; ++k) {
      std::istringstream ls(next_line(f, path));
      for (double& v : traj.knots[k].object_obs) v = read_num(ls, path);
      for (double& v : traj.knots[k].goal_rel) v = read_num(ls, path);
      read_command(ls, traj.knots[k].cmd, path);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace locomanip::data
