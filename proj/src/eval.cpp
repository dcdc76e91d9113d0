#include "locomanip/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "locomanip/errors.hpp"
#include "locomanip/manifest.hpp"

namespace locomanip::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void apply_switches(const AblationSwitches& s, env::EnvConfig& e) {
  e.init.mode = s.init_mode;
  if (!s.interaction_rewards) {
    e.reward.w_obj_pos = 0.0;
    e.reward.w_obj_orient = 0.0;
    e.reward.w_obj_linvel = 0.0;
    e.reward.w_obj_angvel = 0.0;
    e.reward.w_obj_body_pos = 0.0;
    e.reward.w_obj_body_orient = 0.0;
    e.reward.w_contact_consistency = 0.0;
  }
  if (!s.robustness) {
    e.rand.randomize_params = false;
    e.rand.apply_pushes = false;
    e.object_obs_noise_pos = 0.0;
    e.object_obs_noise_angle = 0.0;
  }
}

EvalReport evaluate(const gen::Generator& g, const refiner::ActorCritic& tracker_policy,
                    const priors::TaskSpec& task, const sim::RobotModel& model,
                    const sim::SimConfig& sim_cfg, const env::EnvConfig& env_cfg, int episodes,
                    int max_steps, uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluation: episode count must be >= 1");
  if (max_steps < 1) throw ConfigError("evaluation: step limit must be >= 1");

  EvalReport r;
  r.task_id = task.name();
  r.episodes = episodes;
  double err_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    const uint64_t es = Rng::derive_seed(seed, ep);
    r.episode_seeds.push_back(es);
    const gen::EpisodeTrace tr =
        gen::autonomous_episode(g, tracker_policy, task, model, sim_cfg, env_cfg, max_steps, es);
    if (tr.success) ++r.successes;
    if (tr.fell) {
      ++r.falls;
    } else {
      ++r.completed;
      err_sum += tr.final_error;
    }
  }
  r.success_rate = static_cast<double>(r.successes) / episodes;
  r.mean_final_error = r.completed > 0 ? err_sum / r.completed : 0.0;

  char fp[256];
  std::snprintf(fp, sizeof(fp), "%s|ep%d|ms%d|seed%llu|H%d|A%d|K%d|D%d|B%d|obs%d", task.name(),
                episodes, max_steps, static_cast<unsigned long long>(seed), g.cfg.horizon,
                g.cfg.exec_steps, g.cfg.denoise_steps, g.cfg.token_dim, g.cfg.blocks,
                tracker_policy.actor_obs);
  r.config_fingerprint = manifest::hash_hex(manifest::fnv1a_string(fp));
  return r;
}

int episode_step_limit(const std::vector<data::RefinedTrajectory>& refined) {
  if (refined.empty()) throw DataError("episode limit: empty refined dataset");
  int longest = 0;
  for (const auto& t : refined) longest = std::max(longest, t.length());
  return 2 * longest;
}

std::string report_text(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "task %s: success %d/%d (%.1f%%), mean final error %.4f m over %d completed, "
                "%d falls, fingerprint %s\n",
                r.task_id.c_str(), r.successes, r.episodes, 100.0 * r.success_rate,
                r.mean_final_error, r.completed, r.falls, r.config_fingerprint.c_str());
  return buf;
}

std::string report_csv_header() {
  return "task,episodes,successes,success_rate,completed,falls,mean_final_error,fingerprint";
}

std::string report_csv_row(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%d,%d,%.6f,%s", r.task_id.c_str(), r.episodes,
                r.successes, r.success_rate, r.completed, r.falls, r.mean_final_error,
                r.config_fingerprint.c_str());
  return buf;
}

void PipelineConfig::validate() const {
  if (prior_count < 1) throw ConfigError("pipeline: prior count must be >= 1");
  if (filter_window < 1) throw ConfigError("pipeline: filter window must be >= 1");
  if (refine_attempts < 1) throw ConfigError("pipeline: refine attempts must be >= 1");
  refiner_cfg.validate();
  tracker_cfg.validate();
  generator_cfg.validate();
}

PipelineResult run_pipeline_from_priors(const std::vector<priors::KinematicPrior>& priors_in,
                                        const PipelineConfig& cfg) {
  cfg.validate();
  if (priors_in.empty()) throw DataError("pipeline: no prior trajectories");

  namespace fs = std::filesystem;
  const bool persist = !cfg.out_dir.empty();
  if (persist) fs::create_directories(cfg.out_dir);

  PipelineResult out;
  out.priors = priors_in;
  if (persist) data::write_priors(cfg.out_dir + "/priors.txt", priors_in);

  // stage 1: privileged refiner on the kinematic tracks
  refiner::TrainConfig rcfg = cfg.refiner_cfg;
  apply_switches(cfg.switches, rcfg.env);
  rcfg.seed = Rng::derive_seed(cfg.seed, 1);
  if (persist) {
    rcfg.out_dir = cfg.out_dir + "/refiner";
    fs::create_directories(rcfg.out_dir);
  }
  const auto prior_tracks = env::tracks_from_priors(priors_in);
  out.refiner_result =
      refiner::train_refiner(prior_tracks, cfg.model, cfg.task.box, cfg.sim_cfg, rcfg);

  // stage 2: replace each prior with a physically consistent rollout
  out.refined = refiner::refine_dataset(out.refiner_result.ac, priors_in, cfg.model, cfg.task.box,
                                        cfg.sim_cfg, rcfg.env, cfg.refine_attempts,
                                        Rng::derive_seed(cfg.seed, 2));
  if (persist) data::write_refined(cfg.out_dir + "/refined.txt", out.refined);
  out.episode_limit = episode_step_limit(out.refined);

  // stage 3a: deployable tracker distilled against the frozen refiner
  tracker::TrainConfig tcfg = cfg.tracker_cfg;
  apply_switches(cfg.switches, tcfg.env);
  tcfg.seed = Rng::derive_seed(cfg.seed, 3);
  if (persist) {
    tcfg.out_dir = cfg.out_dir + "/tracker";
    fs::create_directories(tcfg.out_dir);
  }
  const auto refined_tracks = env::tracks_from_refined(out.refined);
  out.tracker_result = tracker::train_tracker(out.refiner_result.ac, refined_tracks, cfg.model,
                                              cfg.task.box, cfg.sim_cfg, tcfg);

  // stage 3b data: closed-loop rollouts, or raw prior commands when the
  // refiner is ablated away
  if (cfg.switches.refiner) {
    env::EnvConfig collect_env = tcfg.env;
    collect_env.rand.randomize_params = false;
    collect_env.rand.apply_pushes = false;
    collect_env.object_obs_noise_pos = 0.0;
    collect_env.object_obs_noise_angle = 0.0;
    out.rollouts = gen::collect_rollouts(out.tracker_result.ac, refined_tracks, cfg.model,
                                         cfg.task.box, cfg.sim_cfg, collect_env,
                                         Rng::derive_seed(cfg.seed, 4), cfg.generator_cfg.stride);
  } else {
    out.rollouts = gen::rollouts_from_priors(priors_in, cfg.generator_cfg.stride);
  }
  if (persist) data::write_rollouts(cfg.out_dir + "/rollouts.txt", out.rollouts);

  // stage 3b: command-chunk generator
  std::string gen_dir;
  if (persist) {
    gen_dir = cfg.out_dir + "/generator";
    fs::create_directories(gen_dir);
  }
  out.generator = gen::train_generator(out.rollouts, cfg.model, cfg.generator_cfg,
                                       Rng::derive_seed(cfg.seed, 5), gen_dir);
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const auto corpus = priors::build_priors(cfg.task, cfg.model, cfg.prior_count, cfg.noise,
                                           cfg.filter_window, Rng::derive_seed(cfg.seed, 0));
  return run_pipeline_from_priors(corpus, cfg);
}

std::vector<ScalingRow> data_scaling_run(const std::vector<int>& sizes,
                                         const PipelineConfig& base,
                                         const std::vector<uint64_t>& seeds, int eval_episodes,
                                         std::string* plot_data) {
  if (sizes.empty()) throw ConfigError("scaling run: no sizes given");
  if (seeds.empty()) throw ConfigError("scaling run: no seeds given");
  if (eval_episodes < 1) throw ConfigError("scaling run: eval episode count must be >= 1");
  for (int s : sizes)
    if (s < 1) throw ConfigError("scaling run: sizes must be >= 1");
  const int max_size = *std::max_element(sizes.begin(), sizes.end());

  // one master corpus drawn once; each run trains on a prefix, so smaller
  // corpora are strict subsets of larger ones
  const auto master = priors::build_priors(base.task, base.model, max_size, base.noise,
                                           base.filter_window, Rng::derive_seed(base.seed, 0));

  std::vector<ScalingRow> rows;
  for (int size : sizes) {
    ScalingRow row;
    row.size = size;
    const std::vector<priors::KinematicPrior> subset(master.begin(), master.begin() + size);
    for (uint64_t seed : seeds) {
      PipelineConfig cfg = base;
      cfg.seed = seed;
      cfg.prior_count = size;
      if (!base.out_dir.empty())
        cfg.out_dir =
            base.out_dir + "/size" + std::to_string(size) + "_seed" + std::to_string(seed);
      const PipelineResult pr = run_pipeline_from_priors(subset, cfg);

      env::EnvConfig eval_env = cfg.tracker_cfg.env;
      eval_env.rand.randomize_params = false;
      eval_env.rand.apply_pushes = false;
      eval_env.object_obs_noise_pos = 0.0;
      eval_env.object_obs_noise_angle = 0.0;
      // the test draw depends only on the training seed, so every size sees
      // the same held-out episodes
      const EvalReport rep =
          evaluate(pr.generator, pr.tracker_result.ac, cfg.task, cfg.model, cfg.sim_cfg, eval_env,
                   eval_episodes, pr.episode_limit, Rng::derive_seed(0xE7A1u, seed));
      row.per_seed_success.push_back(rep.success_rate);
      row.per_seed_error.push_back(rep.mean_final_error);
    }
    row.mean_success = mean_of(row.per_seed_success);
    row.mean_error = mean_of(row.per_seed_error);
    rows.push_back(row);
  }
  if (plot_data) *plot_data = scaling_csv(rows);
  return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::string s = "size,mean_success,mean_error,per_seed_success\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,", r.size, r.mean_success, r.mean_error);
    s += buf;
    for (size_t i = 0; i < r.per_seed_success.size(); ++i) {
      if (i) s += ';';
      std::snprintf(buf, sizeof(buf), "%.6f", r.per_seed_success[i]);
      s += buf;
    }
    s += '\n';
  }
  return s;
}

}  // namespace locomanip::eval
