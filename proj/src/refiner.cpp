#include "locomanip/refiner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "locomanip/errors.hpp"

namespace locomanip::refiner {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

std::string meta_at(const std::map<std::string, std::string>& meta, const std::string& key,
                    const std::string& path) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint missing metadata '" + key + "': " + path);
  return it->second;
}

}  // namespace

void build_actor_critic(ActorCritic& ac, int actor_obs, int critic_obs, int act_dim,
                        const std::vector<int>& actor_hidden, const std::vector<int>& critic_hidden,
                        double init_noise_std, uint64_t seed) {
  if (actor_obs <= 0 || critic_obs <= 0 || act_dim <= 0)
    throw ConfigError("actor-critic: non-positive dimensions");
  if (actor_hidden.empty() || critic_hidden.empty())
    throw ConfigError("actor-critic: hidden layer list empty");
  ac = ActorCritic{};
  ac.actor_obs = actor_obs;
  ac.critic_obs = critic_obs;
  ac.act_dim = act_dim;
  ac.actor_hidden = actor_hidden;
  ac.critic_hidden = critic_hidden;
  ac.init_noise_std = init_noise_std;
  ac.actor = ppo::GaussianPolicy(ac.store, "actor", actor_obs, actor_hidden, act_dim,
                                 init_noise_std);
  ac.critic = nn::Mlp(ac.store, "critic", critic_obs, critic_hidden, 1);
  Rng rng(seed);
  ac.actor.init(ac.store, rng);
  ac.critic.init_orthogonal(ac.store, rng, 1.0);
}

void save_policy(const std::string& path, const ActorCritic& ac,
                 const std::map<std::string, std::string>& extra_meta) {
  std::map<std::string, std::string> meta = extra_meta;
  meta["actor_obs"] = std::to_string(ac.actor_obs);
  meta["critic_obs"] = std::to_string(ac.critic_obs);
  meta["act_dim"] = std::to_string(ac.act_dim);
  meta["actor_hidden"] = join_ints(ac.actor_hidden);
  meta["critic_hidden"] = join_ints(ac.critic_hidden);
  meta["init_noise_std"] = data::fmt_g9(ac.init_noise_std);
  meta["adam_t"] = std::to_string(ac.adam_t);
  nn::save_checkpoint(path, ac.store, meta);
}

std::map<std::string, std::string> load_policy(const std::string& path, ActorCritic& ac) {
  const auto meta = nn::read_checkpoint_meta(path);
  const int actor_obs = std::stoi(meta_at(meta, "actor_obs", path));
  const int critic_obs = std::stoi(meta_at(meta, "critic_obs", path));
  const int act_dim = std::stoi(meta_at(meta, "act_dim", path));
  build_actor_critic(ac, actor_obs, critic_obs, act_dim,
                     split_ints(meta_at(meta, "actor_hidden", path)),
                     split_ints(meta_at(meta, "critic_hidden", path)),
                     std::stod(meta_at(meta, "init_noise_std", path)), 0);
  nn::load_checkpoint(path, ac.store);
  ac.adam_t = std::stoi(meta_at(meta, "adam_t", path));
  return meta;
}

void save_run_state(const std::string& path, const ActorCritic& ac,
                    const std::vector<env::MimicEnv>& envs, const pool::StatePool& pool,
                    const Rng& update_rng, const RunState& rs) {
  nn::ParamStore snap;
  for (const auto& p : ac.store.params()) {
    nn::Param& q = snap.at(snap.add(p.name, p.shape));
    q.value = p.value;
    q.m = p.m;
    q.v = p.v;
  }
  nn::Vec env_blob;
  env_blob.reserve(envs.size() * static_cast<size_t>(env::MimicEnv::state_size()));
  for (const auto& e : envs) e.serialize(env_blob);
  nn::Vec pool_blob;
  pool.serialize(pool_blob);
  snap.at(snap.add("run.envs", {static_cast<int>(env_blob.size())})).value = std::move(env_blob);
  snap.at(snap.add("run.pool", {static_cast<int>(pool_blob.size())})).value = std::move(pool_blob);

  uint64_t rstate = 0;
  double rcache = 0.0;
  bool rhas = false;
  update_rng.save_state(rstate, rcache, rhas);

  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : rs.extra) meta["x:" + k] = v;
  meta["kind"] = "run_state";
  meta["next_iteration"] = std::to_string(rs.next_iteration);
  meta["lr_bits"] = std::to_string(std::bit_cast<uint64_t>(rs.lr));
  meta["adam_t"] = std::to_string(ac.adam_t);
  meta["num_envs"] = std::to_string(envs.size());
  meta["pool_count"] = std::to_string(pool.size());
  meta["rng_state"] = std::to_string(rstate);
  meta["rng_cache_bits"] = std::to_string(std::bit_cast<uint64_t>(rcache));
  meta["rng_has_cache"] = rhas ? "1" : "0";

  // Write-then-rename so an interrupted save never clobbers the previous
  // resumable state.
  const std::string tmp = path + ".tmp";
  nn::save_checkpoint(tmp, snap, meta);
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move run state into place: " + path);
}

bool load_run_state(const std::string& path, ActorCritic& ac, std::vector<env::MimicEnv>& envs,
                    pool::StatePool& pool, Rng& update_rng, RunState& rs) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) return false;
  }
  const auto meta = nn::read_checkpoint_meta(path);
  if (meta_at(meta, "kind", path) != "run_state")
    throw DataError("not a run state file: " + path);
  const int n_envs = std::stoi(meta_at(meta, "num_envs", path));
  if (n_envs != static_cast<int>(envs.size()))
    throw DataError("run state env count mismatch (" + std::to_string(n_envs) + " vs " +
                    std::to_string(envs.size()) + "): " + path);
  const int pool_count = std::stoi(meta_at(meta, "pool_count", path));
  if (pool_count < 0 || pool_count > pool.capacity())
    throw DataError("run state pool count out of range: " + path);

  // Blob sizes are fixed by the env count and pool entry stride, so the
  // parameter table can be declared up front and shape-checked on load.
  nn::ParamStore snap;
  for (const auto& p : ac.store.params()) snap.add(p.name, p.shape);
  const int he = snap.add("run.envs", {n_envs * env::MimicEnv::state_size()});
  const int hp = snap.add("run.pool", {pool_count * pool::StatePool::entry_stride()});
  nn::load_checkpoint(path, snap);

  for (auto& p : ac.store.params()) {
    const nn::Param& q = *snap.find(p.name);
    p.value = q.value;
    p.m = q.m;
    p.v = q.v;
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
  const nn::Vec& eb = snap.at(he).value;
  size_t off = 0;
  for (auto& e : envs) e.deserialize(eb, off);
  if (off != eb.size()) throw DataError("run state env blob size mismatch: " + path);
  pool.deserialize(snap.at(hp).value, pool_count);

  ac.adam_t = std::stoi(meta_at(meta, "adam_t", path));
  rs.next_iteration = std::stoi(meta_at(meta, "next_iteration", path));
  rs.lr = std::bit_cast<double>(
      static_cast<uint64_t>(std::stoull(meta_at(meta, "lr_bits", path))));
  update_rng.load_state(std::stoull(meta_at(meta, "rng_state", path)),
                        std::bit_cast<double>(static_cast<uint64_t>(
                            std::stoull(meta_at(meta, "rng_cache_bits", path)))),
                        meta_at(meta, "rng_has_cache", path) == "1");
  rs.extra.clear();
  for (const auto& [k, v] : meta)
    if (k.rfind("x:", 0) == 0) rs.extra[k.substr(2)] = v;
  return true;
}

void TrainConfig::validate() const {
  ppo.validate();
  env.reward.validate();
  env.term.validate();
  env.rand.validate();
  env.init.validate();
  if (iterations < 1) throw ConfigError("train: iterations must be positive");
  if (pool_capacity < 1) throw ConfigError("train: pool capacity must be positive");
  if (pool_survive_steps < 0) throw ConfigError("train: survive steps must be non-negative");
  if (checkpoint_every < 1) throw ConfigError("train: checkpoint cadence must be positive");
  if (actor_hidden.empty() || critic_hidden.empty())
    throw ConfigError("train: hidden layer list empty");
}

TrainResult train_refiner(const std::vector<env::ReferenceTrack>& tracks,
                          const sim::RobotModel& model, const sim::BoxModel& box,
                          const sim::SimConfig& sim_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (tracks.empty()) throw ConfigError("train_refiner: no reference tracks");

  const int obs_dim = env::privileged_obs_dim();
  const int act_dim = sim::kNumDof;
  const int num_envs = cfg.ppo.num_envs;
  const int steps = cfg.ppo.steps_per_env;

  TrainResult res;
  build_actor_critic(res.ac, obs_dim, obs_dim, act_dim, cfg.actor_hidden, cfg.critic_hidden,
                     cfg.ppo.init_noise_std, Rng::derive_seed(cfg.seed, 0));
  res.pool = pool::StatePool(cfg.pool_capacity, static_cast<int>(tracks.size()),
                             cfg.pool_survive_steps);

  std::vector<env::MimicEnv> envs;
  envs.reserve(static_cast<size_t>(num_envs));
  for (int e = 0; e < num_envs; ++e)
    envs.emplace_back(model, box, sim_cfg, cfg.env, &tracks,
                      Rng::derive_seed(cfg.seed, 100 + static_cast<uint64_t>(e)));
  for (auto& e : envs) e.reset(&res.pool, 0);

  ppo::PpoConfig pcfg = cfg.ppo;
  Rng update_rng(Rng::derive_seed(cfg.seed, 7));
  ppo::RolloutBuffer buf;
  buf.resize(num_envs, steps, obs_dim, obs_dim, act_dim);

  const std::string run_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/refiner_run.bin";
  int start_it = 0;
  bool resumed = false;
  if (cfg.resume && !run_path.empty()) {
    RunState rs;
    if (load_run_state(run_path, res.ac, envs, res.pool, update_rng, rs)) {
      start_it = rs.next_iteration;
      pcfg.lr = rs.lr;
      resumed = true;
    }
  }

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    metrics.open(cfg.out_dir + "/refiner_metrics.csv",
                 resumed ? std::ios::out | std::ios::app : std::ios::out);
    if (!resumed)
      metrics << "iteration,mean_reward,mean_track_reward,episodes,mean_episode_len,full_length,"
                 "kl,lr,entropy,value_loss,pool_size\n";
  }

  nn::ParamStore last_good = res.ac.store;
  int last_good_adam = res.ac.adam_t;
  const std::string ckpt = cfg.out_dir.empty() ? "" : cfg.out_dir + "/refiner.ckpt";

  nn::Vec step_obs(static_cast<size_t>(num_envs) * obs_dim);
  nn::Vec step_vals, row(obs_dim), action, mu, last_values(static_cast<size_t>(num_envs));

  for (int it = start_it; it < cfg.iterations; ++it) {
    double sum_reward = 0.0, sum_track = 0.0;
    int episodes = 0, ep_len_sum = 0, full_length = 0;
    try {
      for (int t = 0; t < steps; ++t) {
        for (int e = 0; e < num_envs; ++e) {
          const env::Vec o = envs[static_cast<size_t>(e)].privileged_obs();
          const size_t base = buf.at(t, e) * static_cast<size_t>(obs_dim);
          std::copy(o.begin(), o.end(), buf.obs.begin() + static_cast<long>(base));
          std::copy(o.begin(), o.end(), buf.critic_obs.begin() + static_cast<long>(base));
          std::copy(o.begin(), o.end(),
                    step_obs.begin() + static_cast<long>(static_cast<size_t>(e) * obs_dim));
        }
        res.ac.critic.forward(res.ac.store, step_obs, num_envs, step_vals, nullptr);
        for (int e = 0; e < num_envs; ++e) {
          auto& ev = envs[static_cast<size_t>(e)];
          const size_t at = buf.at(t, e);
          buf.values[at] = step_vals[static_cast<size_t>(e)];

          std::copy(step_obs.begin() + static_cast<long>(static_cast<size_t>(e) * obs_dim),
                    step_obs.begin() + static_cast<long>(static_cast<size_t>(e + 1) * obs_dim),
                    row.begin());
          double logp = 0.0;
          res.ac.actor.sample(res.ac.store, row, ev.rng(), action, logp);
          std::copy(action.begin(), action.end(),
                    buf.actions.begin() + static_cast<long>(at * static_cast<size_t>(act_dim)));
          buf.logp[at] = logp;

          const env::StepOutcome out = ev.step(action);
          buf.rewards[at] = out.reward.total;
          buf.dones[at] = out.done ? 1 : 0;
          buf.timeouts[at] = out.timeout ? 1 : 0;
          buf.timeout_values[at] = 0.0;
          if (out.timeout) {
            const env::Vec next_obs = ev.privileged_obs();
            nn::Vec v1;
            res.ac.critic.forward(res.ac.store, next_obs, 1, v1, nullptr);
            buf.timeout_values[at] = v1[0];
          }
          sum_reward += out.reward.total;
          sum_track += out.reward.r_track;

          res.pool.try_insert(model, ev.simulator().snapshot(), ev.track().trajectory_id,
                              ev.phase(), ev.current_ref(), cfg.env.term, ev.survived_steps(), it);

          if (out.done) {
            const int survived = ev.survived_steps();
            const int start_phase = ev.phase() - survived;
            ++episodes;
            ep_len_sum += survived;
            if (out.timeout && start_phase == 0) ++full_length;
            ev.reset(&res.pool, it);
          }
        }
      }

      for (int e = 0; e < num_envs; ++e) {
        const env::Vec o = envs[static_cast<size_t>(e)].privileged_obs();
        std::copy(o.begin(), o.end(),
                  step_obs.begin() + static_cast<long>(static_cast<size_t>(e) * obs_dim));
      }
      res.ac.critic.forward(res.ac.store, step_obs, num_envs, step_vals, nullptr);
      for (int e = 0; e < num_envs; ++e) last_values[static_cast<size_t>(e)] = step_vals[static_cast<size_t>(e)];

      ppo::buffer_gae(buf, last_values, pcfg.gamma, pcfg.lam);
      const ppo::PpoStats st =
          ppo::ppo_update(res.ac.store, res.ac.actor, res.ac.critic, buf, pcfg, res.ac.adam_t,
                          update_rng);
      pcfg.lr = ppo::adapt_lr(st.kl, pcfg.desired_kl, pcfg.lr);

      IterStats is;
      is.iteration = it;
      is.mean_reward = sum_reward / (static_cast<double>(steps) * num_envs);
      is.mean_track_reward = sum_track / (static_cast<double>(steps) * num_envs);
      is.episodes = episodes;
      is.mean_episode_len = episodes ? static_cast<double>(ep_len_sum) / episodes : 0.0;
      is.full_length = full_length;
      is.kl = st.kl;
      is.lr = pcfg.lr;
      is.entropy = st.entropy;
      is.value_loss = st.value_loss;
      is.pool_size = res.pool.size();
      res.history.push_back(is);

      if (metrics.is_open()) {
        metrics << is.iteration << ',' << data::fmt_g9(is.mean_reward) << ','
                << data::fmt_g9(is.mean_track_reward) << ',' << is.episodes << ','
                << data::fmt_g9(is.mean_episode_len) << ',' << is.full_length << ','
                << data::fmt_g9(is.kl) << ',' << data::fmt_g9(is.lr) << ','
                << data::fmt_g9(is.entropy) << ',' << data::fmt_g9(is.value_loss) << ','
                << is.pool_size << '\n';
        metrics.flush();
      }

      if ((it + 1) % cfg.checkpoint_every == 0 || it + 1 == cfg.iterations) {
        last_good = res.ac.store;
        last_good_adam = res.ac.adam_t;
        if (!ckpt.empty()) save_policy(ckpt, res.ac, {{"iteration", std::to_string(it + 1)}});
        if (!run_path.empty()) {
          RunState rs;
          rs.next_iteration = it + 1;
          rs.lr = pcfg.lr;
          save_run_state(run_path, res.ac, envs, res.pool, update_rng, rs);
        }
      }
    } catch (const DivergenceError&) {
      if (!ckpt.empty()) {
        ActorCritic keep;
        build_actor_critic(keep, obs_dim, obs_dim, act_dim, cfg.actor_hidden, cfg.critic_hidden,
                           cfg.ppo.init_noise_std, 0);
        keep.store = last_good;
        keep.adam_t = last_good_adam;
        save_policy(ckpt, keep, {{"iteration", std::to_string(it)}, {"aborted", "divergence"}});
      }
      throw;
    }
  }
  return res;
}

std::vector<data::RefinedTrajectory> refine_dataset(
    const ActorCritic& ac, const std::vector<priors::KinematicPrior>& priors_in,
    const sim::RobotModel& model, const sim::BoxModel& box, const sim::SimConfig& sim_cfg,
    const env::EnvConfig& env_cfg, int attempts_per_prior, uint64_t seed,
    RefineAccounting* accounting) {
  if (priors_in.empty()) throw ConfigError("refine_dataset: no priors");
  if (attempts_per_prior < 1) throw ConfigError("refine_dataset: attempts must be positive");
  if (ac.actor_obs != env::privileged_obs_dim())
    throw ConfigError("refine_dataset: policy was trained on a different observation layout");

  env::EnvConfig ecfg = env_cfg;
  ecfg.rand.randomize_params = false;  // the dataset is a nominal-physics target
  ecfg.rand.apply_pushes = false;
  ecfg.object_obs_noise_pos = 0.0;
  ecfg.object_obs_noise_angle = 0.0;

  const double dt = sim_cfg.physics_dt * sim_cfg.control_decimation;
  std::vector<data::RefinedTrajectory> out;
  RefineAccounting acct;

  for (size_t i = 0; i < priors_in.size(); ++i) {
    const priors::KinematicPrior& prior = priors_in[i];
    const std::vector<env::ReferenceTrack> one{env::track_from_prior(prior)};
    RefineAccounting::PerPrior pp;
    pp.trajectory_id = prior.trajectory_id;

    Rng act_rng(Rng::derive_seed(seed, 1000 + i));
    for (int attempt = 0; attempt < attempts_per_prior && !pp.success; ++attempt) {
      ++pp.attempts;
      env::MimicEnv ev(model, box, sim_cfg, ecfg, &one, Rng::derive_seed(seed, i));
      ev.reset_to_start(0);

      data::RefinedTrajectory traj;
      traj.frame_dt = prior.frame_dt;
      traj.trajectory_id = static_cast<int>(out.size());
      traj.source_prior = prior.trajectory_id;
      traj.task_id = prior.task_id;
      traj.goal_pos = prior.goal_pos;
      traj.goal_angle = prior.goal_angle;
      traj.tolerance = prior.tolerance;

      data::RefinedFrame f0;
      f0.robot = ev.simulator().robot();
      f0.object = ev.simulator().object();
      f0.cmd.q_cmd = f0.robot.q;
      f0.cmd.label = false;
      traj.frames.push_back(f0);

      bool terminated = false, finished = false;
      nn::Vec mu, action;
      double logp = 0.0;
      while (!terminated && !finished) {
        const env::Vec o = ev.privileged_obs();
        if (attempt == 0) {
          ac.actor.mean(ac.store, o, 1, mu, nullptr);
          action = mu;
        } else {
          ac.actor.sample(ac.store, o, act_rng, action, logp);
        }
        const env::StepOutcome step = ev.step(action);

        data::RefinedFrame f;
        f.robot = ev.simulator().robot();
        f.object = ev.simulator().object();
        f.cmd.q_cmd = f.robot.q;
        const data::RefinedFrame& prev = traj.frames.back();
        f.cmd.v_cmd = (f.robot.base_pos - prev.robot.base_pos) * (1.0 / dt);
        f.cmd.omega_cmd = wrap_angle(f.robot.pitch - prev.robot.pitch) / dt;
        f.cmd.label = ev.last_contacts().robot_object_contact();
        traj.frames.push_back(f);

        if (step.done) {
          terminated = !step.timeout;
          finished = step.timeout;
        }
      }

      if (finished) {
        const Vec2 err = ev.simulator().object().pos - prior.goal_pos;
        if (err.norm() <= prior.tolerance) {
          // Frame 0 has no preceding state; hold the first measured velocity.
          if (traj.frames.size() > 1) {
            traj.frames[0].cmd.v_cmd = traj.frames[1].cmd.v_cmd;
            traj.frames[0].cmd.omega_cmd = traj.frames[1].cmd.omega_cmd;
          }
          out.push_back(std::move(traj));
          pp.success = true;
        }
      }
    }
    if (pp.success) ++acct.successes;
    acct.priors.push_back(pp);
  }

  if (accounting) *accounting = acct;
  if (out.empty())
    throw DataError("refine_dataset: no prior produced a successful rollout; dataset is empty");
  return out;
}

}  // namespace locomanip::refiner
