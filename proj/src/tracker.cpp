#include "locomanip/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "locomanip/errors.hpp"

namespace locomanip::tracker {

double DistillSchedule::bc_weight(int warmup_iter) const {
  if (warmup_iters <= 0) return 0.0;
  const double w = 1.0 - static_cast<double>(warmup_iter) / warmup_iters;
  return clampd(w, 0.0, 1.0);
}

void DistillSchedule::validate() const {
  if (bc_iters < 0 || warmup_iters < 0 || rl_iters < 0)
    throw ConfigError("distill schedule: phase lengths must be non-negative");
}

void TrainConfig::validate() const {
  ppo.validate();
  env.reward.validate();
  env.term.validate();
  env.rand.validate();
  env.init.validate();
  schedule.validate();
  if (actor_hidden.empty() || critic_hidden.empty())
    throw ConfigError("tracker: hidden layer list empty");
  if (pool_capacity < 1) throw ConfigError("tracker: pool capacity must be positive");
  if (checkpoint_every < 1) throw ConfigError("tracker: checkpoint cadence must be positive");
  if (!(bc_lr > 0.0)) throw ConfigError("tracker: bc_lr must be positive");
}

TrainConfig default_train_config() {
  TrainConfig cfg;
  cfg.ppo.init_noise_std = 0.5;
  cfg.env.init.mode = pool::InitMode::kRSIToPSPI;
  return cfg;
}

double bc_update(refiner::ActorCritic& student, const nn::Vec& obs, const nn::Vec& teacher_actions,
                 int rows, const nn::AdamConfig& adam) {
  const int act_dim = student.act_dim;
  nn::Vec mu;
  nn::MlpCache cache;
  student.actor.mean(student.store, obs, rows, mu, &cache);
  nn::Vec dmu(mu.size());
  double loss = 0.0;
  const double denom = static_cast<double>(rows) * act_dim;
  for (size_t i = 0; i < mu.size(); ++i) {
    const double diff = mu[i] - teacher_actions[i];
    loss += diff * diff;
    dmu[i] = 2.0 * diff / denom;
  }
  loss /= denom;
  student.store.zero_grad();
  student.actor.net().backward(student.store, cache, dmu, nullptr);
  nn::adam_step(student.store, adam, ++student.adam_t);
  return loss;
}

TrainResult train_tracker(const refiner::ActorCritic& teacher,
                          const std::vector<env::ReferenceTrack>& tracks,
                          const sim::RobotModel& model, const sim::BoxModel& box,
                          const sim::SimConfig& sim_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (tracks.empty()) throw ConfigError("train_tracker: no reference tracks");
  for (const auto& t : tracks)
    if (!t.has_commands())
      throw ConfigError("train_tracker: reference tracks carry no command sequences");
  if (teacher.actor_obs != env::privileged_obs_dim())
    throw ConfigError("train_tracker: teacher observation layout mismatch");

  const int actor_obs = env::deployable_obs_dim();
  const int critic_obs = env::privileged_obs_dim();
  const int act_dim = sim::kNumDof;
  const int num_envs = cfg.ppo.num_envs;
  const int steps = cfg.ppo.steps_per_env;
  const int N = num_envs * steps;

  TrainResult res;
  refiner::build_actor_critic(res.ac, actor_obs, critic_obs, act_dim, cfg.actor_hidden,
                              cfg.critic_hidden, cfg.ppo.init_noise_std,
                              Rng::derive_seed(cfg.seed, 0));
  res.pool = pool::StatePool(cfg.pool_capacity, static_cast<int>(tracks.size()),
                             cfg.pool_survive_steps);

  std::vector<env::MimicEnv> envs;
  envs.reserve(static_cast<size_t>(num_envs));
  for (int e = 0; e < num_envs; ++e)
    envs.emplace_back(model, box, sim_cfg, cfg.env, &tracks,
                      Rng::derive_seed(cfg.seed, 100 + static_cast<uint64_t>(e)));
  for (auto& e : envs) e.reset(&res.pool, 0);

  // Hoisted ahead of the imitation phase so run states saved there already
  // carry the update stream and learning rate the later phases will use.
  ppo::PpoConfig pcfg = cfg.ppo;
  Rng update_rng(Rng::derive_seed(cfg.seed, 7));

  const std::string run_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/tracker_run.bin";
  int start_global = 0;
  bool resumed = false;
  if (cfg.resume && !run_path.empty()) {
    refiner::RunState rs;
    if (refiner::load_run_state(run_path, res.ac, envs, res.pool, update_rng, rs)) {
      start_global = rs.next_iteration;
      pcfg.lr = rs.lr;
      resumed = true;
    }
  }
  auto save_run = [&](int next_global) {
    if (run_path.empty()) return;
    refiner::RunState rs;
    rs.next_iteration = next_global;
    rs.lr = pcfg.lr;
    refiner::save_run_state(run_path, res.ac, envs, res.pool, update_rng, rs);
  };

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    metrics.open(cfg.out_dir + "/tracker_metrics.csv",
                 resumed ? std::ios::out | std::ios::app : std::ios::out);
    if (!resumed)
      metrics << "phase,iteration,mean_reward,mean_track_reward,episodes,mean_episode_len,"
                 "full_length,kl,lr,entropy,value_loss,bc_loss,pool_size\n";
  }
  const std::string ckpt = cfg.out_dir.empty() ? "" : cfg.out_dir + "/tracker.ckpt";
  const std::map<std::string, std::string> base_meta{
      {"stage", "tracker"}, {"obs_layout", env::deployable_layout_descriptor()}};

  auto save = [&](int iteration) {
    if (ckpt.empty()) return;
    auto meta = base_meta;
    meta["iteration"] = std::to_string(iteration);
    refiner::save_policy(ckpt, res.ac, meta);
  };

  nn::ParamStore last_good = res.ac.store;
  int last_good_adam = res.ac.adam_t;
  auto keep_last_good = [&]() {
    last_good = res.ac.store;
    last_good_adam = res.ac.adam_t;
  };
  auto restore_last_good_and_save = [&](int iteration) {
    if (ckpt.empty()) return;
    refiner::ActorCritic keep;
    refiner::build_actor_critic(keep, actor_obs, critic_obs, act_dim, cfg.actor_hidden,
                                cfg.critic_hidden, cfg.ppo.init_noise_std, 0);
    keep.store = last_good;
    keep.adam_t = last_good_adam;
    auto meta = base_meta;
    meta["iteration"] = std::to_string(iteration);
    meta["aborted"] = "divergence";
    refiner::save_policy(ckpt, keep, meta);
  };

  nn::AdamConfig bc_adam;
  bc_adam.lr = cfg.bc_lr;
  bc_adam.max_grad_norm = cfg.ppo.max_grad_norm;

  nn::Vec bc_obs(static_cast<size_t>(N) * actor_obs);
  nn::Vec bc_teach(static_cast<size_t>(N) * act_dim);
  nn::Vec tmu, action, priv;
  double logp = 0.0;

  // Imitation-only phase: student explores, teacher labels.
  const int bc_start = std::min(start_global, cfg.schedule.bc_iters);
  for (int it = bc_start; it < cfg.schedule.bc_iters; ++it) {
    try {
      int row = 0;
      for (int t = 0; t < steps; ++t) {
        for (int e = 0; e < num_envs; ++e, ++row) {
          auto& ev = envs[static_cast<size_t>(e)];
          const env::Vec dep = ev.deployable_obs();
          const env::Vec pv = ev.privileged_obs();
          teacher.actor.mean(teacher.store, pv, 1, tmu, nullptr);
          std::copy(dep.begin(), dep.end(),
                    bc_obs.begin() + static_cast<long>(static_cast<size_t>(row) * actor_obs));
          std::copy(tmu.begin(), tmu.end(),
                    bc_teach.begin() + static_cast<long>(static_cast<size_t>(row) * act_dim));

          res.ac.actor.sample(res.ac.store, dep, ev.rng(), action, logp);
          const env::StepOutcome out = ev.step(action);
          res.pool.try_insert(model, ev.simulator().snapshot(), ev.track().trajectory_id,
                              ev.phase(), ev.current_ref(), cfg.env.term, ev.survived_steps(), 0);
          if (out.done) ev.reset(&res.pool, 0);
        }
      }
      const double loss = bc_update(res.ac, bc_obs, bc_teach, N, bc_adam);
      res.bc_losses.push_back(loss);
      if (metrics.is_open()) {
        metrics << "bc," << it << ",,,,,,,," << data::fmt_g9(bc_adam.lr) << ",,"
                << data::fmt_g9(loss) << ',' << res.pool.size() << '\n';
        metrics.flush();
      }
      if ((it + 1) % cfg.checkpoint_every == 0) {
        keep_last_good();
        save(it + 1);
        save_run(it + 1);
      }
    } catch (const DivergenceError&) {
      restore_last_good_and_save(it);
      throw;
    }
  }

  // Blended hand-off, then reinforcement only. Commands replay from the
  // tracks in lockstep with the phase; the critic reads the privileged view.
  ppo::RolloutBuffer buf;
  buf.resize(num_envs, steps, actor_obs, critic_obs, act_dim);

  nn::Vec step_cobs(static_cast<size_t>(num_envs) * critic_obs);
  nn::Vec step_vals, last_values(static_cast<size_t>(num_envs));

  auto ppo_phase = [&](const char* phase, int base, int iters, bool blended) {
    const int k_start = std::clamp(start_global - base, 0, iters);
    for (int k = k_start; k < iters; ++k) {
      const int global_it = base + k;
      pcfg.bc_weight = blended ? cfg.schedule.bc_weight(k) : 0.0;
      const int ramp_iter = blended ? 0 : k;
      double sum_reward = 0.0, sum_track = 0.0;
      int episodes = 0, ep_len_sum = 0, full_length = 0;
      try {
        for (int t = 0; t < steps; ++t) {
          for (int e = 0; e < num_envs; ++e) {
            auto& ev = envs[static_cast<size_t>(e)];
            const size_t at = buf.at(t, e);
            const env::Vec dep = ev.deployable_obs();
            const env::Vec pv = ev.privileged_obs();
            std::copy(dep.begin(), dep.end(),
                      buf.obs.begin() + static_cast<long>(at * static_cast<size_t>(actor_obs)));
            std::copy(pv.begin(), pv.end(),
                      buf.critic_obs.begin() +
                          static_cast<long>(at * static_cast<size_t>(critic_obs)));
            std::copy(pv.begin(), pv.end(),
                      step_cobs.begin() + static_cast<long>(static_cast<size_t>(e) * critic_obs));
            if (pcfg.bc_weight > 0.0) {
              teacher.actor.mean(teacher.store, pv, 1, tmu, nullptr);
              std::copy(tmu.begin(), tmu.end(),
                        buf.teacher_actions.begin() +
                            static_cast<long>(at * static_cast<size_t>(act_dim)));
            }
          }
          res.ac.critic.forward(res.ac.store, step_cobs, num_envs, step_vals, nullptr);
          for (int e = 0; e < num_envs; ++e) {
            auto& ev = envs[static_cast<size_t>(e)];
            const size_t at = buf.at(t, e);
            buf.values[at] = step_vals[static_cast<size_t>(e)];

            const env::Vec dep = ev.deployable_obs();
            res.ac.actor.sample(res.ac.store, dep, ev.rng(), action, logp);
            std::copy(action.begin(), action.end(),
                      buf.actions.begin() + static_cast<long>(at * static_cast<size_t>(act_dim)));
            buf.logp[at] = logp;

            const env::StepOutcome out = ev.step(action);
            buf.rewards[at] = out.reward.total;
            buf.dones[at] = out.done ? 1 : 0;
            buf.timeouts[at] = out.timeout ? 1 : 0;
            buf.timeout_values[at] = 0.0;
            if (out.timeout) {
              const env::Vec pv2 = ev.privileged_obs();
              nn::Vec v1;
              res.ac.critic.forward(res.ac.store, pv2, 1, v1, nullptr);
              buf.timeout_values[at] = v1[0];
            }
            sum_reward += out.reward.total;
            sum_track += out.reward.r_track;

            res.pool.try_insert(model, ev.simulator().snapshot(), ev.track().trajectory_id,
                                ev.phase(), ev.current_ref(), cfg.env.term, ev.survived_steps(),
                                ramp_iter);
            if (out.done) {
              const int survived = ev.survived_steps();
              const int start_phase = ev.phase() - survived;
              ++episodes;
              ep_len_sum += survived;
              if (out.timeout && start_phase == 0) ++full_length;
              ev.reset(&res.pool, ramp_iter);
            }
          }
        }

        for (int e = 0; e < num_envs; ++e) {
          const env::Vec pv = envs[static_cast<size_t>(e)].privileged_obs();
          std::copy(pv.begin(), pv.end(),
                    step_cobs.begin() + static_cast<long>(static_cast<size_t>(e) * critic_obs));
        }
        res.ac.critic.forward(res.ac.store, step_cobs, num_envs, step_vals, nullptr);
        for (int e = 0; e < num_envs; ++e)
          last_values[static_cast<size_t>(e)] = step_vals[static_cast<size_t>(e)];

        ppo::buffer_gae(buf, last_values, pcfg.gamma, pcfg.lam);
        const ppo::PpoStats st = ppo::ppo_update(res.ac.store, res.ac.actor, res.ac.critic, buf,
                                                 pcfg, res.ac.adam_t, update_rng);
        pcfg.lr = ppo::adapt_lr(st.kl, pcfg.desired_kl, pcfg.lr);

        refiner::IterStats is;
        is.iteration = global_it;
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
          metrics << phase << ',' << global_it << ',' << data::fmt_g9(is.mean_reward) << ','
                  << data::fmt_g9(is.mean_track_reward) << ',' << is.episodes << ','
                  << data::fmt_g9(is.mean_episode_len) << ',' << is.full_length << ','
                  << data::fmt_g9(is.kl) << ',' << data::fmt_g9(is.lr) << ','
                  << data::fmt_g9(is.entropy) << ',' << data::fmt_g9(is.value_loss) << ','
                  << data::fmt_g9(st.bc_loss) << ',' << is.pool_size << '\n';
          metrics.flush();
        }
        if ((global_it + 1) % cfg.checkpoint_every == 0) {
          keep_last_good();
          save(global_it + 1);
          save_run(global_it + 1);
        }
      } catch (const DivergenceError&) {
        restore_last_good_and_save(global_it);
        throw;
      }
    }
  };

  const int total =
      cfg.schedule.bc_iters + cfg.schedule.warmup_iters + cfg.schedule.rl_iters;
  ppo_phase("warmup", cfg.schedule.bc_iters, cfg.schedule.warmup_iters, true);
  ppo_phase("rl", cfg.schedule.bc_iters + cfg.schedule.warmup_iters, cfg.schedule.rl_iters,
            false);

  keep_last_good();
  save(total);
  save_run(total);
  return res;
}

}  // namespace locomanip::tracker
