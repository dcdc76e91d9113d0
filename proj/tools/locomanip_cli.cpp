// Pipeline driver: every stage of the loco-manipulation training recipe as a
// subcommand over reproducible run directories. Configuration precedence is
// compiled-in defaults < --config file < command-line; the fully resolved
// values land in the run manifest next to input/output hashes.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "locomanip/config.hpp"
#include "locomanip/dataset.hpp"
#include "locomanip/env.hpp"
#include "locomanip/errors.hpp"
#include "locomanip/eval.hpp"
#include "locomanip/generator.hpp"
#include "locomanip/manifest.hpp"
#include "locomanip/priors.hpp"
#include "locomanip/refiner.hpp"
#include "locomanip/tracker.hpp"

namespace {

using namespace locomanip;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config binding

// Reads each option from the merged Config (falling back to the field's
// current value) and records the final choice, so one pass both applies
// overrides and produces the resolved-config log.
class Binder {
 public:
  Binder(const Config& c, std::map<std::string, std::string>& resolved)
      : c_(c), resolved_(resolved) {}

  void d(const std::string& k, double& v) {
    v = c_.get_double(k, v);
    resolved_[k] = data::fmt_g9(v);
  }
  void i(const std::string& k, int& v) {
    v = c_.get_int(k, v);
    resolved_[k] = std::to_string(v);
  }
  void b(const std::string& k, bool& v) {
    v = c_.get_bool(k, v);
    resolved_[k] = v ? "true" : "false";
  }
  void u64(const std::string& k, uint64_t& v) {
    v = static_cast<uint64_t>(c_.get_int64(k, static_cast<long long>(v)));
    resolved_[k] = std::to_string(v);
  }
  void s(const std::string& k, std::string& v) {
    v = c_.get_string(k, v);
    resolved_[k] = v;
  }
  void vi(const std::string& k, std::vector<int>& v) {
    v = c_.get_vec_int(k, v);
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(v[i]);
    }
    resolved_[k] = out;
  }
  void range(const std::string& k, env::Range& v) {
    d(k + "_lo", v.lo);
    d(k + "_hi", v.hi);
  }

 private:
  const Config& c_;
  std::map<std::string, std::string>& resolved_;
};

void bind_noise(Binder& b, priors::NoiseModel& n) {
  b.d("noise.pose_jitter_pos", n.pose_jitter_pos);
  b.d("noise.pose_jitter_ang", n.pose_jitter_ang);
  b.d("noise.drift_rate", n.drift_rate);
  b.d("noise.penetration_bias", n.penetration_bias);
  b.d("noise.contact_flip_prob", n.contact_flip_prob);
  b.i("noise.contact_lag", n.contact_lag);
  b.d("noise.dropout_prob", n.dropout_prob);
  b.i("noise.dropout_len", n.dropout_len);
}

void bind_reward(Binder& b, rewards::RewardConfig& r) {
  b.d("reward.w_joint_pos", r.w_joint_pos);
  b.d("reward.s_joint_pos", r.s_joint_pos);
  b.d("reward.w_root_pos", r.w_root_pos);
  b.d("reward.s_root_pos", r.s_root_pos);
  b.d("reward.w_root_orient", r.w_root_orient);
  b.d("reward.s_root_orient", r.s_root_orient);
  b.d("reward.w_body_pos", r.w_body_pos);
  b.d("reward.s_body_pos", r.s_body_pos);
  b.d("reward.w_body_orient", r.w_body_orient);
  b.d("reward.s_body_orient", r.s_body_orient);
  b.d("reward.w_body_linvel", r.w_body_linvel);
  b.d("reward.s_body_linvel", r.s_body_linvel);
  b.d("reward.w_body_angvel", r.w_body_angvel);
  b.d("reward.s_body_angvel", r.s_body_angvel);
  b.d("reward.w_obj_pos", r.w_obj_pos);
  b.d("reward.s_obj_pos", r.s_obj_pos);
  b.d("reward.w_obj_orient", r.w_obj_orient);
  b.d("reward.s_obj_orient", r.s_obj_orient);
  b.d("reward.w_obj_linvel", r.w_obj_linvel);
  b.d("reward.s_obj_linvel", r.s_obj_linvel);
  b.d("reward.w_obj_angvel", r.w_obj_angvel);
  b.d("reward.s_obj_angvel", r.s_obj_angvel);
  b.d("reward.w_obj_body_pos", r.w_obj_body_pos);
  b.d("reward.s_obj_body_pos", r.s_obj_body_pos);
  b.d("reward.w_obj_body_orient", r.w_obj_body_orient);
  b.d("reward.s_obj_body_orient", r.s_obj_body_orient);
  b.d("reward.w_contact_consistency", r.w_contact_consistency);
  b.d("reward.contact_force_threshold", r.contact_force_threshold);
  b.d("reward.w_feet_air_time", r.w_feet_air_time);
  b.d("reward.feet_air_time_target", r.feet_air_time_target);
  b.d("reward.w_feet_slip", r.w_feet_slip);
  b.d("reward.w_undesired_contact", r.w_undesired_contact);
  b.d("reward.w_joint_acc", r.w_joint_acc);
  b.d("reward.w_joint_torque", r.w_joint_torque);
  b.d("reward.w_action_rate", r.w_action_rate);
  b.d("reward.w_joint_limits", r.w_joint_limits);
}

void bind_term(Binder& b, rewards::TerminationConfig& t) {
  b.d("term.root_pos", t.root_pos);
  b.d("term.root_orient", t.root_orient);
  b.d("term.body_pos", t.body_pos);
  b.d("term.object_pos", t.object_pos);
  b.d("term.object_orient", t.object_orient);
}

void bind_rand(Binder& b, env::RandomizerConfig& r) {
  b.b("rand.randomize_params", r.randomize_params);
  b.b("rand.apply_pushes", r.apply_pushes);
  b.range("rand.robot_friction_static", r.robot_friction_static);
  b.range("rand.robot_friction_dynamic", r.robot_friction_dynamic);
  b.range("rand.robot_restitution", r.robot_restitution);
  b.range("rand.object_friction_static", r.object_friction_static);
  b.range("rand.object_friction_dynamic", r.object_friction_dynamic);
  b.range("rand.object_restitution", r.object_restitution);
  b.range("rand.object_mass_scale", r.object_mass_scale);
  b.d("rand.com_offset_x", r.com_offset_x);
  b.d("rand.com_offset_z", r.com_offset_z);
  b.d("rand.joint_default_offset", r.joint_default_offset);
  b.d("rand.robot_push_linvel", r.robot_push_linvel);
  b.d("rand.robot_push_angvel", r.robot_push_angvel);
  b.d("rand.object_push_linvel", r.object_push_linvel);
  b.d("rand.object_push_angvel", r.object_push_angvel);
  b.range("rand.push_interval", r.push_interval);
}

void bind_init(Binder& b, pool::InitSchedule& s) {
  std::string mode = pool::init_mode_name(s.mode);
  b.s("init.mode", mode);
  s.mode = pool::init_mode_by_name(mode);
  b.d("init.p_max", s.p_max);
  b.i("init.ramp_iters", s.ramp_iters);
}

void bind_env(Binder& b, env::EnvConfig& e) {
  bind_reward(b, e.reward);
  bind_term(b, e.term);
  bind_rand(b, e.rand);
  bind_init(b, e.init);
  b.d("env.object_obs_noise_pos", e.object_obs_noise_pos);
  b.d("env.object_obs_noise_angle", e.object_obs_noise_angle);
}

void bind_ppo(Binder& b, ppo::PpoConfig& p) {
  b.d("ppo.gamma", p.gamma);
  b.d("ppo.lam", p.lam);
  b.d("ppo.clip", p.clip);
  b.d("ppo.entropy_coef", p.entropy_coef);
  b.d("ppo.value_coef", p.value_coef);
  b.d("ppo.desired_kl", p.desired_kl);
  b.i("ppo.epochs", p.epochs);
  b.i("ppo.minibatches", p.minibatches);
  b.i("ppo.steps_per_env", p.steps_per_env);
  b.i("ppo.num_envs", p.num_envs);
  b.d("ppo.init_noise_std", p.init_noise_std);
  b.d("ppo.max_grad_norm", p.max_grad_norm);
  b.d("ppo.lr", p.lr);
}

void bind_refiner(Binder& b, refiner::TrainConfig& r) {
  bind_ppo(b, r.ppo);
  bind_env(b, r.env);
  b.vi("refiner.actor_hidden", r.actor_hidden);
  b.vi("refiner.critic_hidden", r.critic_hidden);
  b.i("refiner.iterations", r.iterations);
  b.i("refiner.pool_capacity", r.pool_capacity);
  b.i("refiner.pool_survive_steps", r.pool_survive_steps);
  b.i("refiner.checkpoint_every", r.checkpoint_every);
}

// The tracker shares the environment and optimizer blocks with the refiner;
// only its exploration level and phase schedule get dedicated keys.
void bind_tracker(Binder& b, const refiner::TrainConfig& shared, tracker::TrainConfig& t) {
  t.ppo = shared.ppo;
  t.env = shared.env;
  t.actor_hidden = shared.actor_hidden;
  t.critic_hidden = shared.critic_hidden;
  t.pool_capacity = shared.pool_capacity;
  t.pool_survive_steps = shared.pool_survive_steps;
  t.checkpoint_every = shared.checkpoint_every;
  t.ppo.init_noise_std = 0.5;
  b.d("tracker.init_noise_std", t.ppo.init_noise_std);
  b.i("tracker.bc_iters", t.schedule.bc_iters);
  b.i("tracker.warmup_iters", t.schedule.warmup_iters);
  b.i("tracker.rl_iters", t.schedule.rl_iters);
  b.d("tracker.bc_lr", t.bc_lr);
}

void bind_generator(Binder& b, gen::GeneratorConfig& g) {
  b.i("generator.horizon", g.horizon);
  b.i("generator.exec_steps", g.exec_steps);
  b.i("generator.blocks", g.blocks);
  b.i("generator.token_dim", g.token_dim);
  b.i("generator.heads", g.heads);
  b.i("generator.denoise_steps", g.denoise_steps);
  b.i("generator.stride", g.stride);
  b.i("generator.batch", g.batch);
  b.i("generator.iterations", g.iterations);
  b.d("generator.lr", g.lr);
  b.d("generator.max_grad_norm", g.max_grad_norm);
  b.i("generator.checkpoint_every", g.checkpoint_every);
}

void bind_switches(Binder& b, eval::AblationSwitches& s) {
  b.b("ablation.refiner", s.refiner);
  std::string mode = pool::init_mode_name(s.init_mode);
  b.s("ablation.init_mode", mode);
  s.init_mode = pool::init_mode_by_name(mode);
  b.b("ablation.interaction_rewards", s.interaction_rewards);
  b.b("ablation.robustness", s.robustness);
}

void bind_pipeline(Binder& b, eval::PipelineConfig& p) {
  std::string task_name = p.task.name();
  b.s("task", task_name);
  p.task = priors::task_by_name(task_name);
  b.u64("seed", p.seed);
  b.i("prior_count", p.prior_count);
  b.i("filter_window", p.filter_window);
  b.i("refine_attempts", p.refine_attempts);
  bind_noise(b, p.noise);
  bind_refiner(b, p.refiner_cfg);
  bind_tracker(b, p.refiner_cfg, p.tracker_cfg);
  bind_generator(b, p.generator_cfg);
  bind_switches(b, p.switches);
}

// ---------------------------------------------------------------------------
// run directory plumbing

std::string data_root() {
  const char* v = std::getenv("LOCOMANIP_DATA_ROOT");
  return (v && *v) ? std::string(v) : std::string("runs");
}

std::string default_out(const std::string& sub) { return data_root() + "/" + sub; }

// Manifest + lock + wall clock for one subcommand run. Inputs are verified
// against the producing run's manifest when one sits next to them.
struct RunContext {
  std::string dir;
  manifest::RunManifest man;
  std::unique_ptr<manifest::RunLock> lock;
  std::chrono::steady_clock::time_point t0;

  RunContext(std::string d, std::string command) : dir(std::move(d)) {
    fs::create_directories(dir);
    lock = std::make_unique<manifest::RunLock>(dir);
    man.command = std::move(command);
    man.version = manifest::tool_version();
    t0 = std::chrono::steady_clock::now();
  }

  void input(const std::string& path) {
    if (!fs::exists(path))
      throw DataError("missing input: " + path +
                      " (pass the right path or rerun the producing stage)");
    const fs::path sib = fs::path(path).parent_path() / "run_manifest.json";
    if (fs::exists(sib)) {
      const auto prev = manifest::read_manifest(sib.string());
      const std::string fname = fs::path(path).filename().string();
      for (const auto& [op, hash] : prev.outputs)
        if (fs::path(op).filename().string() == fname) {
          manifest::verify_hash(path, hash);
          break;
        }
    }
    man.add_input(path);
  }

  void output(const std::string& path) { man.add_output(path); }

  void finish(const std::map<std::string, std::string>& resolved, uint64_t seed) {
    man.config = resolved;
    man.seed = seed;
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest::write_manifest(dir + "/run_manifest.json", man);
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write: " + path);
  f << text;
}

// ---------------------------------------------------------------------------
// plotting: batch SVG line charts, no interactive surface

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // NaN for non-numeric cells
};

Csv read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open csv: " + path);
  Csv out;
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty csv: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) out.columns.push_back(cell);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        row.push_back(used > 0 ? v : std::nan(""));
      } catch (...) {
        row.push_back(std::nan(""));
      }
    }
    row.resize(out.columns.size(), std::nan(""));
    out.rows.push_back(std::move(row));
  }
  return out;
}

int column_index(const Csv& c, const std::string& name) {
  for (size_t i = 0; i < c.columns.size(); ++i)
    if (c.columns[i] == name) return static_cast<int>(i);
  throw ConfigError("csv has no column '" + name + "'");
}

void svg_line_chart(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::vector<double>& xs,
                    const std::vector<std::string>& names,
                    const std::vector<std::vector<double>>& series) {
  const int W = 720, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (double x : xs) {
    if (std::isfinite(x)) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  }
  for (const auto& ys : series)
    for (double y : ys)
      if (std::isfinite(y)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
  if (xmin > xmax || ymin > ymax) throw DataError("plot: no finite data points");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  const auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  s << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
    << "</text>\n";
  s << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
    << "' stroke='black'/>\n";
  s << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
    << "' stroke='black'/>\n";
  char buf[128];
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    std::snprintf(buf, sizeof(buf), "%.4g", xv);
    s << "<text x='" << px(xv) << "' y='" << H - mb + 18
      << "' text-anchor='middle' font-size='11'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", yv);
    s << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
      << "' text-anchor='end' font-size='11'>" << buf << "</text>\n";
  }
  s << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 12
    << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  for (size_t j = 0; j < series.size(); ++j) {
    const char* color = kColors[j % 5];
    s << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < xs.size() && i < series[j].size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(series[j][i])) continue;
      s << px(xs[i]) << ',' << py(series[j][i]) << ' ';
    }
    s << "'/>\n";
    s << "<text x='" << W - mr - 6 << "' y='" << mt + 16 * (j + 1)
      << "' text-anchor='end' font-size='12' fill='" << color << "'>" << names[j]
      << "</text>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

// ---------------------------------------------------------------------------
// shared option scaffolding

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  uint64_t seed = 1;
  std::string task = "push_box";
  int envs = 0;
  int iters = 0;
  bool resume = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool trains) {
  sub->add_option("--config", o.config_path, "key=value config file");
  sub->add_option("--set", o.sets, "override KEY=VALUE (repeatable, wins over --config)");
  sub->add_option("--out", o.out, "run directory (default $LOCOMANIP_DATA_ROOT/<subcommand>)");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--task", o.task, "task name: push_box | carry_box");
  if (trains) {
    sub->add_option("--envs", o.envs, "parallel environment count");
    sub->add_option("--iters", o.iters, "iteration count for this stage");
    sub->add_flag("--resume", o.resume, "continue from this run directory's checkpoint");
  }
}

// Merge file + --set + dedicated flags into one Config. Dedicated flags map
// onto the same keys the binder reads, so precedence stays file < CLI.
Config merge_config(const CLI::App* sub, const CommonOpts& o, const std::string& iters_key,
                    const std::string& resume_key) {
  Config c = o.config_path.empty() ? Config() : Config::from_file(o.config_path);
  for (const auto& kv : o.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (sub->count("--seed")) c.set("seed", std::to_string(o.seed));
  if (sub->count("--task")) c.set("task", o.task);
  if (sub->count("--envs")) c.set("ppo.num_envs", std::to_string(o.envs));
  if (sub->count("--iters") && !iters_key.empty()) c.set(iters_key, std::to_string(o.iters));
  if (o.resume && !resume_key.empty()) c.set(resume_key, "true");
  return c;
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale humanoid loco-manipulation training pipeline"};
  app.require_subcommand(1);
  const std::string cmdline = join_args(argc, argv);

  CommonOpts gp_o, tr_o, rf_o, tt_o, cr_o, tg_o, ev_o, sw_o;
  std::string in_priors, in_refined, in_rollouts, in_refiner, in_tracker, in_generator;
  int eval_episodes = 20, eval_max_steps = 0;
  std::vector<int> sweep_sizes{5, 10, 20};
  std::vector<uint64_t> sweep_seeds{1, 2, 3};
  int sweep_episodes = 20;
  std::string plot_in, plot_x = "iteration", plot_out_name = "plot.svg", plot_title;
  std::string plot_out_dir;
  std::vector<std::string> plot_y{"mean_reward"};
  

  CLI::App* c_gp = app.add_subcommand("gen-priors", "draw a noisy kinematic prior corpus");
  add_common(c_gp, gp_o, false);

  CLI::App* c_tr = app.add_subcommand("train-refiner", "train the privileged tracking policy");
  add_common(c_tr, tr_o, true);
  c_tr->add_option("--priors", in_priors, "prior corpus file")->required();

  CLI::App* c_rf = app.add_subcommand("refine", "replay the refiner into a physical dataset");
  add_common(c_rf, rf_o, false);
  c_rf->add_option("--priors", in_priors, "prior corpus file")->required();
  c_rf->add_option("--refiner-ckpt", in_refiner, "refiner checkpoint")->required();

  CLI::App* c_tt = app.add_subcommand("train-tracker", "distill the deployable tracker");
  add_common(c_tt, tt_o, true);
  c_tt->add_option("--refined", in_refined, "refined dataset file")->required();
  c_tt->add_option("--refiner-ckpt", in_refiner, "teacher checkpoint")->required();

  CLI::App* c_cr = app.add_subcommand("collect-rollouts", "record tracker rollouts as knots");
  add_common(c_cr, cr_o, false);
  c_cr->add_option("--refined", in_refined, "refined dataset file")->required();
  c_cr->add_option("--tracker-ckpt", in_tracker, "tracker checkpoint")->required();

  CLI::App* c_tg = app.add_subcommand("train-generator", "train the command-chunk generator");
  add_common(c_tg, tg_o, true);
  c_tg->add_option("--rollouts", in_rollouts, "rollout dataset file")->required();

  CLI::App* c_ev = app.add_subcommand("eval", "closed-loop autonomous evaluation");
  add_common(c_ev, ev_o, false);
  c_ev->add_option("--tracker-ckpt", in_tracker, "tracker checkpoint")->required();
  c_ev->add_option("--generator-ckpt", in_generator, "generator checkpoint")->required();
  c_ev->add_option("--refined", in_refined, "refined dataset (sets the episode step budget)");
  c_ev->add_option("--episodes", eval_episodes, "episode count");
  c_ev->add_option("--max-steps", eval_max_steps, "episode step budget override");

  CLI::App* c_sw = app.add_subcommand("scale-sweep", "data-volume sweep over prior counts");
  add_common(c_sw, sw_o, false);
  c_sw->add_option("--sizes", sweep_sizes, "prior counts to sweep");
  c_sw->add_option("--train-seeds", sweep_seeds, "training seeds per size");
  c_sw->add_option("--episodes", sweep_episodes, "eval episodes per run");

  CLI::App* c_pl = app.add_subcommand("plot", "render csv columns as an svg line chart");
  c_pl->add_option("--in", plot_in, "input csv")->required();
  c_pl->add_option("--x", plot_x, "x column name");
  c_pl->add_option("--y", plot_y, "y column names");
  c_pl->add_option("--out", plot_out_dir, "output directory")->required();
  c_pl->add_option("--name", plot_out_name, "output file name");
  c_pl->add_option("--title", plot_title, "chart title");

  app.add_subcommand("print-defaults",
                     "dump every tunable with its compiled-in default and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("print-defaults")) {
      Config empty;
      std::map<std::string, std::string> resolved;
      Binder b(empty, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      for (const auto& [k, v] : resolved) std::printf("%s=%s\n", k.c_str(), v.c_str());
      return 0;
    }

    if (app.got_subcommand(c_gp)) {
      const std::string out = gp_o.out.empty() ? default_out("gen-priors") : gp_o.out;
      RunContext ctx(out, cmdline);
      Config c = merge_config(c_gp, gp_o, "", "");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      c.check_fully_consumed();
      const auto corpus =
          priors::build_priors(pc.task, pc.model, pc.prior_count, pc.noise, pc.filter_window,
                               Rng::derive_seed(pc.seed, 0));
      const std::string f = out + "/priors.txt";
      data::write_priors(f, corpus);
      ctx.output(f);
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s (%d trajectories)\n", f.c_str(), static_cast<int>(corpus.size()));
      return 0;
    }

    if (app.got_subcommand(c_tr)) {
      const std::string out = tr_o.out.empty() ? default_out("train-refiner") : tr_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_priors);
      Config c = merge_config(c_tr, tr_o, "refiner.iterations", "refiner.resume");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      bool resume = false;
      b.b("refiner.resume", resume);
      c.check_fully_consumed();

      refiner::TrainConfig rcfg = pc.refiner_cfg;
      eval::apply_switches(pc.switches, rcfg.env);
      rcfg.seed = Rng::derive_seed(pc.seed, 1);
      rcfg.out_dir = out;
      rcfg.resume = resume;
      const auto priors_in = data::read_priors(in_priors);
      const auto tracks = env::tracks_from_priors(priors_in);
      refiner::train_refiner(tracks, pc.model, pc.task.box, pc.sim_cfg, rcfg);
      ctx.output(out + "/refiner.ckpt");
      ctx.output(out + "/refiner_metrics.csv");
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s/refiner.ckpt\n", out.c_str());
      return 0;
    }

    if (app.got_subcommand(c_rf)) {
      const std::string out = rf_o.out.empty() ? default_out("refine") : rf_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_priors);
      ctx.input(in_refiner);
      Config c = merge_config(c_rf, rf_o, "", "");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      c.check_fully_consumed();

      refiner::ActorCritic ac;
      refiner::load_policy(in_refiner, ac);
      const auto priors_in = data::read_priors(in_priors);
      env::EnvConfig ecfg = pc.refiner_cfg.env;
      eval::apply_switches(pc.switches, ecfg);
      refiner::RefineAccounting acct;
      const auto refined =
          refiner::refine_dataset(ac, priors_in, pc.model, pc.task.box, pc.sim_cfg, ecfg,
                                  pc.refine_attempts, Rng::derive_seed(pc.seed, 2), &acct);
      const std::string f = out + "/refined.txt";
      data::write_refined(f, refined);
      ctx.output(f);
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s (%d of %d priors kept)\n", f.c_str(),
                  static_cast<int>(refined.size()), static_cast<int>(priors_in.size()));
      return 0;
    }

    if (app.got_subcommand(c_tt)) {
      const std::string out = tt_o.out.empty() ? default_out("train-tracker") : tt_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_refined);
      ctx.input(in_refiner);
      Config c = merge_config(c_tt, tt_o, "tracker.rl_iters", "tracker.resume");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      bool resume = false;
      b.b("tracker.resume", resume);
      c.check_fully_consumed();

      refiner::ActorCritic teacher;
      refiner::load_policy(in_refiner, teacher);
      const auto refined = data::read_refined(in_refined);
      const auto tracks = env::tracks_from_refined(refined);
      tracker::TrainConfig tcfg = pc.tracker_cfg;
      eval::apply_switches(pc.switches, tcfg.env);
      tcfg.seed = Rng::derive_seed(pc.seed, 3);
      tcfg.out_dir = out;
      tcfg.resume = resume;
      tracker::train_tracker(teacher, tracks, pc.model, pc.task.box, pc.sim_cfg, tcfg);
      ctx.output(out + "/tracker.ckpt");
      ctx.output(out + "/tracker_metrics.csv");
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s/tracker.ckpt\n", out.c_str());
      return 0;
    }

    if (app.got_subcommand(c_cr)) {
      const std::string out = cr_o.out.empty() ? default_out("collect-rollouts") : cr_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_refined);
      ctx.input(in_tracker);
      Config c = merge_config(c_cr, cr_o, "", "");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      c.check_fully_consumed();

      refiner::ActorCritic tracker_ac;
      refiner::load_policy(in_tracker, tracker_ac);
      const auto refined = data::read_refined(in_refined);
      const auto tracks = env::tracks_from_refined(refined);
      env::EnvConfig ecfg = pc.tracker_cfg.env;
      ecfg.rand.randomize_params = false;
      ecfg.rand.apply_pushes = false;
      ecfg.object_obs_noise_pos = 0.0;
      ecfg.object_obs_noise_angle = 0.0;
      std::vector<int> dropped;
      const auto rollouts =
          gen::collect_rollouts(tracker_ac, tracks, pc.model, pc.task.box, pc.sim_cfg, ecfg,
                                Rng::derive_seed(pc.seed, 4), pc.generator_cfg.stride, &dropped);
      const std::string f = out + "/rollouts.txt";
      data::write_rollouts(f, rollouts);
      ctx.output(f);
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s (%d kept, %d dropped)\n", f.c_str(),
                  static_cast<int>(rollouts.size()), static_cast<int>(dropped.size()));
      return 0;
    }

    if (app.got_subcommand(c_tg)) {
      const std::string out = tg_o.out.empty() ? default_out("train-generator") : tg_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_rollouts);
      Config c = merge_config(c_tg, tg_o, "generator.iterations", "generator.resume");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      bool resume = false;
      b.b("generator.resume", resume);
      c.check_fully_consumed();

      const auto rollouts = data::read_rollouts(in_rollouts);
      gen::GeneratorConfig gcfg = pc.generator_cfg;
      gcfg.resume = resume;
      gen::train_generator(rollouts, pc.model, gcfg, Rng::derive_seed(pc.seed, 5), out);
      ctx.output(out + "/generator.ckpt");
      ctx.output(out + "/generator_metrics.csv");
      ctx.finish(resolved, pc.seed);
      std::printf("wrote %s/generator.ckpt\n", out.c_str());
      return 0;
    }

    if (app.got_subcommand(c_ev)) {
      const std::string out = ev_o.out.empty() ? default_out("eval") : ev_o.out;
      RunContext ctx(out, cmdline);
      ctx.input(in_tracker);
      ctx.input(in_generator);
      Config c = merge_config(c_ev, ev_o, "", "");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      c.check_fully_consumed();

      refiner::ActorCritic tracker_ac;
      refiner::load_policy(in_tracker, tracker_ac);
      gen::Generator g;
      gen::load_generator(in_generator, g);
      int max_steps = eval_max_steps;
      if (max_steps <= 0) {
        if (in_refined.empty())
          throw ConfigError("eval: pass --refined or a positive --max-steps");
        ctx.input(in_refined);
        max_steps = eval::episode_step_limit(data::read_refined(in_refined));
      }
      env::EnvConfig ecfg = pc.tracker_cfg.env;
      ecfg.rand.randomize_params = false;
      ecfg.rand.apply_pushes = false;
      ecfg.object_obs_noise_pos = 0.0;
      ecfg.object_obs_noise_angle = 0.0;
      const eval::EvalReport rep =
          eval::evaluate(g, tracker_ac, pc.task, pc.model, pc.sim_cfg, ecfg, eval_episodes,
                         max_steps, Rng::derive_seed(0xE7A1u, pc.seed));
      const std::string ftxt = out + "/eval_report.txt";
      const std::string fcsv = out + "/eval_report.csv";
      write_text(ftxt, eval::report_text(rep));
      write_text(fcsv, eval::report_csv_header() + "\n" + eval::report_csv_row(rep) + "\n");
      ctx.output(ftxt);
      ctx.output(fcsv);
      ctx.finish(resolved, pc.seed);
      std::fputs(eval::report_text(rep).c_str(), stdout);
      return 0;
    }

    if (app.got_subcommand(c_sw)) {
      const std::string out = sw_o.out.empty() ? default_out("scale-sweep") : sw_o.out;
      RunContext ctx(out, cmdline);
      Config c = merge_config(c_sw, sw_o, "", "");
      std::map<std::string, std::string> resolved;
      Binder b(c, resolved);
      eval::PipelineConfig pc;
      bind_pipeline(b, pc);
      c.check_fully_consumed();
      pc.out_dir = out;

      std::string plot_data;
      const auto rows =
          eval::data_scaling_run(sweep_sizes, pc, sweep_seeds, sweep_episodes, &plot_data);
      const std::string fcsv = out + "/scaling.csv";
      write_text(fcsv, plot_data);
      ctx.output(fcsv);

      std::vector<double> xs, ys;
      for (const auto& r : rows) {
        xs.push_back(r.size);
        ys.push_back(r.mean_success);
      }
      const std::string fsvg = out + "/scaling.svg";
      svg_line_chart(fsvg, "test success vs prior count", "prior count", xs, {"mean_success"},
                     {ys});
      ctx.output(fsvg);
      ctx.finish(resolved, pc.seed);
      std::fputs(plot_data.c_str(), stdout);
      return 0;
    }

    if (app.got_subcommand(c_pl)) {
      RunContext ctx(plot_out_dir, cmdline);
      ctx.input(plot_in);
      const Csv csv = read_csv(plot_in);
      const int xi = column_index(csv, plot_x);
      std::vector<double> xs;
      for (const auto& r : csv.rows) xs.push_back(r[static_cast<size_t>(xi)]);
      std::vector<std::vector<double>> series;
      for (const auto& name : plot_y) {
        const int yi = column_index(csv, name);
        std::vector<double> ys;
        for (const auto& r : csv.rows) ys.push_back(r[static_cast<size_t>(yi)]);
        series.push_back(std::move(ys));
      }
      const std::string f = plot_out_dir + "/" + plot_out_name;
      svg_line_chart(f, plot_title.empty() ? fs::path(plot_in).filename().string() : plot_title,
                     plot_x, xs, plot_y, series);
      ctx.output(f);
      ctx.finish({}, 0);
      std::printf("wrote %s\n", f.c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
