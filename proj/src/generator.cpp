#include "locomanip/generator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "locomanip/errors.hpp"

namespace locomanip::gen {

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_doubles(const nn::Vec& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt_full(v[i]);
  }
  return s;
}

nn::Vec split_doubles(const std::string& s) {
  nn::Vec out;
  if (s.empty()) return out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t c = s.find(',', pos);
    if (c == std::string::npos) c = s.size();
    out.push_back(std::stod(s.substr(pos, c - pos)));
    pos = c + 1;
  }
  return out;
}

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& k) {
  auto it = meta.find(k);
  if (it == meta.end()) throw DataError("generator checkpoint missing meta key: " + k);
  return it->second;
}

// Half sine / half cosine frequency ladder over the noise-level index.
void sinusoidal_embed(int t, int dim, nn::Vec& out) {
  out.assign(dim, 0.0);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out[i] = std::sin(t * freq);
    out[half + i] = std::cos(t * freq);
  }
}

// Condition row: object estimate, previous command in normalized channels,
// goal slot (zeroed with a cleared flag when no goal is given).
void build_condition(const Generator& g, const std::array<double, 4>& obj,
                     const data::CommandVector& prev, const std::array<double, 4>& goal,
                     bool goal_valid, nn::Vec& cond) {
  cond.assign(kConditionDim, 0.0);
  for (int i = 0; i < 4; ++i) cond[i] = obj[i];
  double chans[data::kCommandDim];
  command_to_channels(prev, chans);
  for (int c = 0; c < data::kCommandDim; ++c)
    cond[4 + c] = (chans[c] - g.cmd_mean[c]) / g.cmd_std[c];
  if (goal_valid) {
    for (int i = 0; i < 4; ++i) cond[4 + data::kCommandDim + i] = goal[i];
    cond[4 + data::kCommandDim + 4] = 1.0;
  }
}

// Normalized command window starting at knot w (held at the last knot when
// the window overruns) plus the condition at the window start.
void build_window(const data::RolloutTrajectory& rt, int w, const Generator& g,
                  const sim::RobotModel& model, nn::Vec& x0, nn::Vec& cond) {
  const int H = g.cfg.horizon, C = data::kCommandDim;
  double chans[data::kCommandDim];
  x0.resize(static_cast<size_t>(H) * C);
  for (int h = 0; h < H; ++h) {
    const int idx = std::min(w + h, rt.length() - 1);
    command_to_channels(rt.knots[idx].cmd, chans);
    for (int c = 0; c < C; ++c) x0[h * C + c] = (chans[c] - g.cmd_mean[c]) / g.cmd_std[c];
  }
  const data::CommandVector prev = w > 0 ? rt.knots[w - 1].cmd : neutral_command(model);
  build_condition(g, rt.knots[w].object_obs, prev, rt.knots[w].goal_rel, true, cond);
}

}  // namespace

void GeneratorConfig::validate() const {
  if (horizon < 1) throw ConfigError("generator: horizon must be >= 1");
  if (exec_steps < 1 || exec_steps > horizon)
    throw ConfigError("generator: executed steps must lie in [1, horizon]");
  if (blocks < 1) throw ConfigError("generator: block count must be >= 1");
  if (heads < 1) throw ConfigError("generator: head count must be >= 1");
  if (token_dim < 2 || token_dim % 2 != 0 || token_dim % heads != 0)
    throw ConfigError("generator: token width must be even and divide by the head count");
  if (denoise_steps < 2) throw ConfigError("generator: denoising step count must be >= 2");
  if (stride < 1) throw ConfigError("generator: command stride must be >= 1");
  if (batch < 1) throw ConfigError("generator: batch size must be >= 1");
  if (iterations < 0) throw ConfigError("generator: iteration count must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("generator: learning rate must be positive");
  if (!(max_grad_norm > 0.0)) throw ConfigError("generator: gradient clip must be positive");
  if (checkpoint_every < 1) throw ConfigError("generator: checkpoint cadence must be positive");
}

nn::Vec cosine_alpha_bar(int K) {
  if (K < 2) throw ConfigError("noise schedule needs at least two levels");
  const double s = 0.008;
  auto f = [s](double u) {
    const double c = std::cos((u + s) / (1.0 + s) * M_PI / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  nn::Vec abar(K);
  for (int t = 0; t < K; ++t)
    abar[t] = clampd(f(static_cast<double>(t) / K) / f0, 1.0e-5, 1.0);
  return abar;
}

void forward_noising(const nn::Vec& x0, int t, const nn::Vec& eps, const nn::Vec& alpha_bar,
                     nn::Vec& xt) {
  if (t < 0 || t >= static_cast<int>(alpha_bar.size()))
    throw ConfigError("noise level out of range");
  if (eps.size() != x0.size()) throw ConfigError("noise shape mismatch");
  const double a = std::sqrt(alpha_bar[t]), b = std::sqrt(1.0 - alpha_bar[t]);
  xt.resize(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) xt[i] = a * x0[i] + b * eps[i];
}

void reverse_step(nn::Vec& x, const nn::Vec& eps_hat, int t, const nn::Vec& alpha_bar) {
  if (t < 0 || t >= static_cast<int>(alpha_bar.size()))
    throw ConfigError("noise level out of range");
  if (eps_hat.size() != x.size()) throw ConfigError("noise shape mismatch");
  const double at = alpha_bar[t];
  const double sa = std::sqrt(at), sb = std::sqrt(1.0 - at);
  if (t == 0) {
    for (size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - sb * eps_hat[i]) / sa;
    return;
  }
  const double ap = alpha_bar[t - 1];
  const double pa = std::sqrt(ap), pb = std::sqrt(1.0 - ap);
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = (x[i] - sb * eps_hat[i]) / sa;
    x[i] = pa * x0 + pb * eps_hat[i];
  }
}

DiffusionModel::DiffusionModel(nn::ParamStore& ps, const GeneratorConfig& cfg) {
  cfg.validate();
  H_ = cfg.horizon;
  C_ = data::kCommandDim;
  D_ = cfg.token_dim;
  heads_ = cfg.heads;
  nblocks_ = cfg.blocks;
  tok_in_ = nn::Linear(ps, "gen.tok_in", C_, D_);
  pos_ = ps.add("gen.pos", {H_, D_});
  t_mlp_ = nn::Mlp(ps, "gen.tmlp", D_, {D_}, D_);
  emb_obj_ = nn::Mlp(ps, "gen.emb_obj", 4, {D_}, D_);
  emb_cmd_ = nn::Mlp(ps, "gen.emb_cmd", data::kCommandDim, {D_}, D_);
  emb_goal_ = nn::Mlp(ps, "gen.emb_goal", 5, {D_}, D_);
  fuse_ = nn::Linear(ps, "gen.fuse", 3 * D_, D_);
  blocks_.clear();
  blocks_.reserve(nblocks_);
  for (int b = 0; b < nblocks_; ++b)
    blocks_.emplace_back(ps, "gen.blk" + std::to_string(b), D_, heads_, D_);
  final_ln_ = nn::LayerNorm(ps, "gen.ln_f", D_, true);
  head_ = nn::Linear(ps, "gen.head", D_, C_);
}

void DiffusionModel::init(nn::ParamStore& ps, Rng& rng) const {
  tok_in_.init_normal(ps, rng, 1.0);
  nn::fill_normal(ps.at(pos_).value, rng, 0.02);
  t_mlp_.init_normal(ps, rng);
  emb_obj_.init_normal(ps, rng);
  emb_cmd_.init_normal(ps, rng);
  emb_goal_.init_normal(ps, rng);
  fuse_.init_normal(ps, rng, 1.0);
  for (const auto& b : blocks_) b.init(ps, rng);
  // head stays zero so the first prediction is exactly zero noise
  head_.init_zero(ps);
}

void DiffusionModel::forward(const nn::ParamStore& ps, const nn::Vec& x, int t,
                             const nn::Vec& cond_raw, nn::Vec& eps, Cache* cache) const {
  if (static_cast<int>(x.size()) != H_ * C_) throw ConfigError("chunk shape mismatch");
  if (static_cast<int>(cond_raw.size()) != kConditionDim)
    throw ConfigError("condition row shape mismatch");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x_in = x;

  tok_in_.forward(ps, x, H_, c.tokens0);
  const nn::Vec& pos = ps.at(pos_).value;
  for (int i = 0; i < H_ * D_; ++i) c.tokens0[i] += pos[i];

  sinusoidal_embed(t, D_, c.sin_emb);
  t_mlp_.forward(ps, c.sin_emb, 1, c.t_emb, &c.t_cache);

  const nn::Vec obj_raw(cond_raw.begin(), cond_raw.begin() + 4);
  const nn::Vec cmd_raw(cond_raw.begin() + 4, cond_raw.begin() + 4 + data::kCommandDim);
  const nn::Vec goal_raw(cond_raw.begin() + 4 + data::kCommandDim, cond_raw.end());
  nn::Vec obj_emb, cmd_emb, goal_emb;
  emb_obj_.forward(ps, obj_raw, 1, obj_emb, &c.obj_cache);
  emb_cmd_.forward(ps, cmd_raw, 1, cmd_emb, &c.cmd_cache);
  emb_goal_.forward(ps, goal_raw, 1, goal_emb, &c.goal_cache);

  c.emb_concat.resize(static_cast<size_t>(3) * D_);
  std::copy(obj_emb.begin(), obj_emb.end(), c.emb_concat.begin());
  std::copy(cmd_emb.begin(), cmd_emb.end(), c.emb_concat.begin() + D_);
  std::copy(goal_emb.begin(), goal_emb.end(), c.emb_concat.begin() + 2 * D_);
  nn::Vec fuse_out;
  fuse_.forward(ps, c.emb_concat, 1, fuse_out);
  c.cond.resize(D_);
  for (int i = 0; i < D_; ++i) c.cond[i] = fuse_out[i] + c.t_emb[i];

  c.blk_in.assign(nblocks_, nn::Vec{});
  c.blk.assign(nblocks_, nn::AdaNormBlock::Cache{});
  nn::Vec cur = c.tokens0, nxt;
  for (int b = 0; b < nblocks_; ++b) {
    c.blk_in[b] = cur;
    blocks_[b].forward(ps, cur, c.cond, H_, nxt, &c.blk[b]);
    cur.swap(nxt);
  }
  final_ln_.forward(ps, cur, H_, c.ln_out, &c.ln);
  head_.forward(ps, c.ln_out, H_, eps);
}

void DiffusionModel::backward(nn::ParamStore& ps, const Cache& c, const nn::Vec& deps) const {
  nn::Vec d_ln_out;
  head_.backward(ps, c.ln_out, deps, H_, &d_ln_out);
  nn::Vec d_tokens;
  final_ln_.backward(ps, c.ln, d_ln_out, d_tokens);

  nn::Vec dcond(D_, 0.0), dx;
  for (int b = nblocks_ - 1; b >= 0; --b) {
    blocks_[b].backward(ps, c.blk_in[b], c.cond, c.blk[b], d_tokens, dx, dcond);
    d_tokens.swap(dx);
  }
  auto& pg = ps.at(pos_).grad;
  for (int i = 0; i < H_ * D_; ++i) pg[i] += d_tokens[i];
  tok_in_.backward(ps, c.x_in, d_tokens, H_, nullptr);

  // the condition feeds every block; its gradient splits into the fused
  // embeddings and the noise-level path
  nn::Vec d_concat;
  fuse_.backward(ps, c.emb_concat, dcond, 1, &d_concat);
  const nn::Vec d_obj(d_concat.begin(), d_concat.begin() + D_);
  const nn::Vec d_cmd(d_concat.begin() + D_, d_concat.begin() + 2 * D_);
  const nn::Vec d_goal(d_concat.begin() + 2 * D_, d_concat.end());
  emb_obj_.backward(ps, c.obj_cache, d_obj, nullptr);
  emb_cmd_.backward(ps, c.cmd_cache, d_cmd, nullptr);
  emb_goal_.backward(ps, c.goal_cache, d_goal, nullptr);
  t_mlp_.backward(ps, c.t_cache, dcond, nullptr);
}

void save_generator(const std::string& path, const Generator& g,
                    const std::map<std::string, std::string>& extra_meta) {
  if (static_cast<int>(g.cmd_mean.size()) != data::kCommandDim ||
      static_cast<int>(g.cmd_std.size()) != data::kCommandDim)
    throw ConfigError("generator save: normalization table not initialized");
  std::map<std::string, std::string> meta;
  meta["stage"] = "generator";
  meta["horizon"] = std::to_string(g.cfg.horizon);
  meta["exec_steps"] = std::to_string(g.cfg.exec_steps);
  meta["blocks"] = std::to_string(g.cfg.blocks);
  meta["token_dim"] = std::to_string(g.cfg.token_dim);
  meta["heads"] = std::to_string(g.cfg.heads);
  meta["denoise_steps"] = std::to_string(g.cfg.denoise_steps);
  meta["stride"] = std::to_string(g.cfg.stride);
  meta["cmd_mean"] = join_doubles(g.cmd_mean);
  meta["cmd_std"] = join_doubles(g.cmd_std);
  meta["norm_pinned"] = g.norm_pinned ? "1" : "0";
  for (const auto& [k, v] : extra_meta) meta[k] = v;
  nn::save_checkpoint(path, g.store, meta);
}

std::map<std::string, std::string> load_generator(const std::string& path, Generator& g) {
  const auto meta = nn::read_checkpoint_meta(path);
  GeneratorConfig cfg;
  cfg.horizon = std::stoi(meta_at(meta, "horizon"));
  cfg.exec_steps = std::stoi(meta_at(meta, "exec_steps"));
  cfg.blocks = std::stoi(meta_at(meta, "blocks"));
  cfg.token_dim = std::stoi(meta_at(meta, "token_dim"));
  cfg.heads = std::stoi(meta_at(meta, "heads"));
  cfg.denoise_steps = std::stoi(meta_at(meta, "denoise_steps"));
  cfg.stride = std::stoi(meta_at(meta, "stride"));
  cfg.validate();
  g = Generator{};
  g.cfg = cfg;
  g.model = DiffusionModel(g.store, cfg);
  nn::load_checkpoint(path, g.store);
  g.cmd_mean = split_doubles(meta_at(meta, "cmd_mean"));
  g.cmd_std = split_doubles(meta_at(meta, "cmd_std"));
  if (static_cast<int>(g.cmd_mean.size()) != data::kCommandDim ||
      static_cast<int>(g.cmd_std.size()) != data::kCommandDim)
    throw DataError("generator checkpoint: malformed normalization table");
  g.norm_pinned = meta_at(meta, "norm_pinned") == "1";
  g.alpha_bar = cosine_alpha_bar(cfg.denoise_steps);
  return meta;
}

void command_to_channels(const data::CommandVector& c, double* out) {
  for (int j = 0; j < sim::kNumDof; ++j) out[j] = c.q_cmd[j];
  out[sim::kNumDof + 0] = c.v_cmd.x;
  out[sim::kNumDof + 1] = c.v_cmd.z;
  out[sim::kNumDof + 2] = c.omega_cmd;
  out[sim::kNumDof + 3] = c.label ? 1.0 : 0.0;
}

data::CommandVector channels_to_command(const double* in) {
  data::CommandVector c;
  for (int j = 0; j < sim::kNumDof; ++j) c.q_cmd[j] = in[j];
  c.v_cmd = {in[sim::kNumDof + 0], in[sim::kNumDof + 1]};
  c.omega_cmd = in[sim::kNumDof + 2];
  c.label = in[sim::kNumDof + 3] > 0.5;
  return c;
}

data::CommandVector neutral_command(const sim::RobotModel& model) {
  data::CommandVector c;
  c.q_cmd = model.default_q;
  return c;
}

std::vector<data::RolloutTrajectory> collect_rollouts(
    const refiner::ActorCritic& tracker_policy, const std::vector<env::ReferenceTrack>& tracks,
    const sim::RobotModel& model, const sim::BoxModel& box, const sim::SimConfig& sim_cfg,
    const env::EnvConfig& env_cfg, uint64_t seed, int stride, std::vector<int>* dropped) {
  if (tracks.empty()) throw DataError("rollout collection: no tracks");
  if (stride < 1) throw ConfigError("rollout collection: stride must be >= 1");
  if (tracker_policy.actor_obs != env::deployable_obs_dim())
    throw ConfigError("rollout collection: policy does not read the deployable observation");
  for (const auto& t : tracks)
    if (!t.has_commands())
      throw DataError("rollout collection: track " + std::to_string(t.trajectory_id) +
                      " carries no commands");

  std::vector<data::RolloutTrajectory> out;
  if (dropped) dropped->clear();
  nn::Vec obs, mu;
  for (size_t i = 0; i < tracks.size(); ++i) {
    env::MimicEnv e(model, box, sim_cfg, env_cfg, &tracks, Rng::derive_seed(seed, i));
    e.reset_to_start(static_cast<int>(i));
    data::RolloutTrajectory rt;
    rt.trajectory_id = tracks[i].trajectory_id;
    rt.task_id = tracks[i].task_id;
    auto record = [&] {
      data::RolloutKnot k;
      k.object_obs = e.object_obs();
      k.goal_rel = e.goal_obs();
      k.cmd = e.command();
      rt.knots.push_back(k);
    };
    bool ok = false;
    while (true) {
      if (e.phase() % stride == 0) record();
      obs = e.deployable_obs();
      tracker_policy.actor.mean(tracker_policy.store, obs, 1, mu);
      const env::StepOutcome outcome = e.step(mu);
      if (outcome.done) {
        ok = outcome.timeout;
        // terminal state counts toward the cadence so an episode of T
        // frames yields ceil(T / stride) records
        if (ok && e.phase() % stride == 0) record();
        break;
      }
    }
    if (ok)
      out.push_back(std::move(rt));
    else if (dropped)
      dropped->push_back(tracks[i].trajectory_id);
  }
  if (out.empty()) throw DataError("rollout collection: every episode terminated early");
  return out;
}

std::vector<data::RolloutTrajectory> rollouts_from_priors(
    const std::vector<priors::KinematicPrior>& priors_in, int stride) {
  if (stride < 1) throw ConfigError("ablation rollouts: stride must be >= 1");
  if (priors_in.empty()) throw DataError("ablation rollouts: no trajectories");
  std::vector<data::RolloutTrajectory> out;
  out.reserve(priors_in.size());
  for (const auto& p : priors_in) {
    if (p.length() < 2) throw DataError("ablation rollouts: trajectory too short");
    data::RolloutTrajectory rt;
    rt.trajectory_id = p.trajectory_id;
    rt.task_id = p.task_id;
    const double inv_dt = 1.0 / p.frame_dt;
    for (int t = 0; t < p.length(); t += stride) {
      const auto& f = p.frames[t];
      data::RolloutKnot k;
      const Vec2 rel = rotate_inv(f.robot.pitch, f.object.pos - f.robot.base_pos);
      const double da = f.object.angle - f.robot.pitch;
      k.object_obs = {rel.x, rel.z, std::cos(da), std::sin(da)};
      const Vec2 grel = rotate_inv(f.robot.pitch, p.goal_pos - f.robot.base_pos);
      const double dg = p.goal_angle - f.robot.pitch;
      k.goal_rel = {grel.x, grel.z, std::cos(dg), std::sin(dg)};
      // commands synthesized from the kinematic poses alone
      const int t1 = std::max(t, 1);
      const auto& fa = p.frames[t1 - 1];
      const auto& fb = p.frames[t1];
      k.cmd.q_cmd = f.robot.q;
      k.cmd.v_cmd = (fb.robot.base_pos - fa.robot.base_pos) * inv_dt;
      k.cmd.omega_cmd = wrap_angle(fb.robot.pitch - fa.robot.pitch) * inv_dt;
      k.cmd.label = f.label;
      rt.knots.push_back(k);
    }
    out.push_back(std::move(rt));
  }
  return out;
}

Generator train_generator(const std::vector<data::RolloutTrajectory>& rollouts,
                          const sim::RobotModel& model, const GeneratorConfig& cfg, uint64_t seed,
                          const std::string& out_dir, GenTrainStats* stats) {
  cfg.validate();
  if (rollouts.empty()) throw DataError("generator training: empty rollout dataset");
  const int C = data::kCommandDim, H = cfg.horizon;

  std::vector<std::pair<int, int>> windows;
  for (size_t i = 0; i < rollouts.size(); ++i)
    for (int w = 0; w < rollouts[i].length(); ++w) windows.emplace_back(static_cast<int>(i), w);
  if (windows.empty()) throw DataError("generator training: no usable command windows");

  Generator g;
  g.cfg = cfg;

  // per-channel statistics over every knot command (Welford)
  nn::Vec mean(C, 0.0), m2(C, 0.0);
  long n = 0;
  double chans[data::kCommandDim];
  for (const auto& rt : rollouts)
    for (const auto& k : rt.knots) {
      command_to_channels(k.cmd, chans);
      ++n;
      for (int c = 0; c < C; ++c) {
        const double d = chans[c] - mean[c];
        mean[c] += d / n;
        m2[c] += d * (chans[c] - mean[c]);
      }
    }
  g.cmd_mean = mean;
  g.cmd_std.assign(C, 1.0);
  for (int c = 0; c < C; ++c) {
    const double sd = n > 0 ? std::sqrt(m2[c] / n) : 0.0;
    if (sd < 1.0e-9) {
      g.norm_pinned = true;
    } else {
      g.cmd_std[c] = sd;
    }
  }
  if (g.norm_pinned)
    std::fprintf(stderr,
                 "[generator] warning: zero-variance command channel kept at unit scale\n");

  g.model = DiffusionModel(g.store, cfg);
  Rng init_rng(Rng::derive_seed(seed, 1));
  g.model.init(g.store, init_rng);
  g.alpha_bar = cosine_alpha_bar(cfg.denoise_steps);

  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  adam.max_grad_norm = cfg.max_grad_norm;
  int adam_t = 0;

  Rng rng(Rng::derive_seed(seed, 2));

  // A checkpoint carries the Adam moments alongside the weights, so together
  // with the recorded sampling stream it is a complete run state; the
  // normalization table and noise schedule recompute bit-identically from the
  // same dataset.
  const std::string ckpt = out_dir.empty() ? "" : out_dir + "/generator.ckpt";
  int start_it = 0;
  bool resumed = false;
  if (cfg.resume && !ckpt.empty()) {
    std::ifstream probe(ckpt, std::ios::binary);
    if (probe) {
      probe.close();
      const auto meta = nn::load_checkpoint(ckpt, g.store);
      const auto ni = meta.find("next_iteration");
      if (ni == meta.end())
        throw DataError("generator checkpoint lacks resume counters: " + ckpt);
      start_it = std::stoi(ni->second);
      adam_t = std::stoi(meta.at("adam_t"));
      rng.load_state(std::stoull(meta.at("rng_state")),
                     std::bit_cast<double>(static_cast<uint64_t>(
                         std::stoull(meta.at("rng_cache_bits")))),
                     meta.at("rng_has_cache") == "1");
      resumed = true;
    }
  }
  auto save_ckpt = [&](int next_it) {
    if (ckpt.empty()) return;
    uint64_t rstate = 0;
    double rcache = 0.0;
    bool rhas = false;
    rng.save_state(rstate, rcache, rhas);
    const std::string tmp = ckpt + ".tmp";
    save_generator(tmp, g,
                   {{"iterations", std::to_string(cfg.iterations)},
                    {"seed", std::to_string(seed)},
                    {"next_iteration", std::to_string(next_it)},
                    {"adam_t", std::to_string(adam_t)},
                    {"rng_state", std::to_string(rstate)},
                    {"rng_cache_bits", std::to_string(std::bit_cast<uint64_t>(rcache))},
                    {"rng_has_cache", rhas ? "1" : "0"}});
    if (std::rename(tmp.c_str(), ckpt.c_str()) != 0)
      throw DataError("cannot move checkpoint into place: " + ckpt);
  };

  std::FILE* metrics = nullptr;
  if (!out_dir.empty()) {
    metrics = std::fopen((out_dir + "/generator_metrics.csv").c_str(), resumed ? "a" : "w");
    if (!metrics) throw DataError("generator training: cannot write metrics in " + out_dir);
    if (!resumed) std::fprintf(metrics, "iteration,loss\n");
  }

  nn::Vec x0, xt, eps(static_cast<size_t>(H) * C), eps_hat, deps(static_cast<size_t>(H) * C),
      cond;
  DiffusionModel::Cache cache;
  if (stats) stats->losses.clear();

  const double denom = static_cast<double>(cfg.batch) * H * C;
  for (int it = start_it; it < cfg.iterations; ++it) {
    g.store.zero_grad();
    double loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto [ti, w] = windows[rng.uniform_int(windows.size())];
      build_window(rollouts[ti], w, g, model, x0, cond);
      const int t = static_cast<int>(rng.uniform_int(cfg.denoise_steps));
      for (auto& e : eps) e = rng.normal();
      forward_noising(x0, t, eps, g.alpha_bar, xt);
      g.model.forward(g.store, xt, t, cond, eps_hat, &cache);
      for (int i = 0; i < H * C; ++i) {
        const double d = eps_hat[i] - eps[i];
        loss += d * d;
        deps[i] = 2.0 * d / denom;
      }
      g.model.backward(g.store, cache, deps);
    }
    loss /= denom;
    if (!std::isfinite(loss)) {
      if (metrics) std::fclose(metrics);
      throw DivergenceError("generator training: non-finite loss at iteration " +
                            std::to_string(it));
    }
    nn::adam_step(g.store, adam, ++adam_t);
    if (stats) stats->losses.push_back(loss);
    if (metrics) {
      std::fprintf(metrics, "%d,%.10g\n", it, loss);
      std::fflush(metrics);
    }
    if ((it + 1) % cfg.checkpoint_every == 0) save_ckpt(it + 1);
  }
  if (metrics) std::fclose(metrics);
  save_ckpt(cfg.iterations);
  return g;
}

std::vector<data::CommandVector> sample_chunk(const Generator& g, const sim::RobotModel& model,
                                              const std::array<double, 4>& object_obs,
                                              const data::CommandVector& prev_cmd,
                                              const std::array<double, 4>& goal_obs,
                                              bool goal_valid, Rng& rng) {
  const int H = g.cfg.horizon, C = data::kCommandDim, K = g.cfg.denoise_steps;
  if (static_cast<int>(g.alpha_bar.size()) != K)
    throw ConfigError("generator: noise schedule not initialized");
  if (static_cast<int>(g.cmd_mean.size()) != C || static_cast<int>(g.cmd_std.size()) != C)
    throw ConfigError("generator: normalization not initialized");
  nn::Vec cond;
  build_condition(g, object_obs, prev_cmd, goal_obs, goal_valid, cond);

  nn::Vec x(static_cast<size_t>(H) * C), eps_hat;
  for (auto& v : x) v = rng.normal();
  for (int t = K - 1; t >= 0; --t) {
    g.model.forward(g.store, x, t, cond, eps_hat, nullptr);
    reverse_step(x, eps_hat, t, g.alpha_bar);
  }

  std::vector<data::CommandVector> out(H);
  double chans[data::kCommandDim];
  for (int h = 0; h < H; ++h) {
    for (int c = 0; c < C; ++c) {
      const double v = x[h * C + c] * g.cmd_std[c] + g.cmd_mean[c];
      if (!std::isfinite(v))
        throw DivergenceError("generator sample: non-finite channel " + std::to_string(c) +
                              " at knot " + std::to_string(h));
      chans[c] = v;
    }
    out[h] = channels_to_command(chans);
    for (int j = 0; j < sim::kNumDof; ++j)
      out[h].q_cmd[j] = clampd(out[h].q_cmd[j], model.joint_lo[j], model.joint_hi[j]);
  }
  return out;
}

std::vector<data::CommandVector> interpolate_commands(const std::vector<data::CommandVector>& chunk,
                                                      const data::CommandVector& prev_executed,
                                                      int exec_steps, int factor) {
  if (factor < 1) throw ConfigError("command interpolation: factor must be >= 1");
  if (exec_steps < 1 || exec_steps > static_cast<int>(chunk.size()))
    throw ConfigError("command interpolation: executed span exceeds the chunk");
  std::vector<data::CommandVector> out;
  out.reserve(static_cast<size_t>(exec_steps) * factor);
  const data::CommandVector* a = &prev_executed;
  for (int k = 0; k < exec_steps; ++k) {
    const data::CommandVector& b = chunk[k];
    for (int i = 1; i <= factor; ++i) {
      if (i == factor) {
        out.push_back(b);  // knots are reproduced exactly, not re-derived
        break;
      }
      const double s = static_cast<double>(i) / factor;
      data::CommandVector c;
      for (int j = 0; j < sim::kNumDof; ++j)
        c.q_cmd[j] = a->q_cmd[j] + s * (b.q_cmd[j] - a->q_cmd[j]);
      c.v_cmd = a->v_cmd + s * (b.v_cmd - a->v_cmd);
      c.omega_cmd = a->omega_cmd + s * (b.omega_cmd - a->omega_cmd);
      c.label = s >= 0.5 ? b.label : a->label;
      out.push_back(c);
    }
    a = &chunk[k];
  }
  return out;
}

EpisodeTrace autonomous_episode(const Generator& g, const refiner::ActorCritic& tracker_policy,
                                const priors::TaskSpec& task, const sim::RobotModel& model,
                                const sim::SimConfig& sim_cfg, const env::EnvConfig& env_cfg,
                                int max_steps, uint64_t seed) {
  g.cfg.validate();
  if (max_steps < 1) throw ConfigError("autonomous episode: step limit must be >= 1");
  if (tracker_policy.actor_obs != env::deployable_obs_dim())
    throw ConfigError("autonomous episode: policy does not read the deployable observation");

  // A fresh scripted trajectory supplies the start pose and goal draw; only
  // its first frame and goal are kept, the motion itself is discarded.
  const priors::KinematicPrior prior =
      priors::generate_clean_trajectory(task, model, Rng::derive_seed(seed, 0xA11));
  env::ReferenceTrack t = env::track_from_prior(prior);
  t.frames.resize(1);
  t.frames.push_back(t.frames[0]);
  t.commands.clear();
  const std::vector<env::ReferenceTrack> tracks{t};

  env::MimicEnv e(model, task.box, sim_cfg, env_cfg, &tracks, Rng::derive_seed(seed, 0xE2));
  e.reset_to_start(0);

  Rng chunk_rng(Rng::derive_seed(seed, 0x5A));
  data::CommandVector prev_exec = neutral_command(model);
  std::vector<data::CommandVector> stream;
  const int window = g.cfg.exec_steps * g.cfg.stride;
  constexpr int kSettleSteps = 25;       // 0.5 s of settled contact at 50 Hz
  constexpr double kFallHeight = 0.3;    // m, base height cutoff

  EpisodeTrace tr;
  int settle = 0;
  nn::Vec obs, mu;
  for (int step = 0; step < max_steps; ++step) {
    if (step % window == 0) {
      const auto chunk =
          sample_chunk(g, model, e.object_obs(), prev_exec, e.goal_obs(), true, chunk_rng);
      stream = interpolate_commands(chunk, prev_exec, g.cfg.exec_steps, g.cfg.stride);
      prev_exec = chunk[g.cfg.exec_steps - 1];
      ++tr.replans;
    }
    e.set_command(stream[step % window]);
    obs = e.deployable_obs();
    tracker_policy.actor.mean(tracker_policy.store, obs, 1, mu);
    e.step_free(mu);
    ++tr.steps;

    const sim::RobotState& rob = e.simulator().robot();
    const sim::ObjectState& obj = e.simulator().object();
    const double dist = (obj.pos - t.goal_pos).norm();
    tr.final_error = dist;
    if (rob.base_pos.z < kFallHeight) {
      tr.fell = true;
      return tr;
    }
    const bool settled = std::abs(obj.vel.x) < 0.05 && std::abs(obj.vel.z) < 0.05 &&
                         std::abs(obj.angle_rate) < 0.2;
    if (dist <= t.tolerance && settled) {
      if (++settle >= kSettleSteps) {
        tr.success = true;
        return tr;
      }
    } else {
      settle = 0;
    }
  }
  tr.success = tr.final_error <= t.tolerance;
  return tr;
}

}  // namespace locomanip::gen
