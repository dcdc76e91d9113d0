#include "locomanip/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "locomanip/errors.hpp"
#include "locomanip/math2d.hpp"

namespace locomanip::ppo {
namespace {

constexpr double kLn2Pi = 1.8378770664093453;

}  // namespace

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) || !(lam > 0.0 && lam <= 1.0))
    throw ConfigError("ppo: gamma/lambda must lie in (0,1]");
  if (!(clip > 0.0)) throw ConfigError("ppo: clip must be positive");
  if (epochs < 1 || minibatches < 1 || steps_per_env < 1 || num_envs < 1)
    throw ConfigError("ppo: counts must be positive");
  if (!(init_noise_std > 0.0)) throw ConfigError("ppo: init noise std must be positive");
  if (!(lr > 0.0)) throw ConfigError("ppo: lr must be positive");
  if (bc_weight < 0.0 || bc_weight > 1.0) throw ConfigError("ppo: bc_weight must lie in [0,1]");
}

double adapt_lr(double measured_kl, double desired_kl, double lr) {
  if (measured_kl > 2.0 * desired_kl)
    lr /= 1.5;
  else if (measured_kl < 0.5 * desired_kl)
    lr *= 1.5;
  return clampd(lr, 1.0e-6, 1.0e-2);
}

void RolloutBuffer::resize(int envs, int steps_per_env, int obs_dim_in, int critic_dim_in,
                           int act_dim_in) {
  num_envs = envs;
  steps = steps_per_env;
  obs_dim = obs_dim_in;
  critic_dim = critic_dim_in;
  act_dim = act_dim_in;
  const size_t n = static_cast<size_t>(envs) * steps_per_env;
  obs.assign(n * obs_dim, 0.0);
  critic_obs.assign(n * critic_dim, 0.0);
  actions.assign(n * act_dim, 0.0);
  logp.assign(n, 0.0);
  values.assign(n, 0.0);
  rewards.assign(n, 0.0);
  dones.assign(n, 0);
  timeouts.assign(n, 0);
  timeout_values.assign(n, 0.0);
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  teacher_actions.assign(n * act_dim, 0.0);
}

void compute_gae(const nn::Vec& rewards, const nn::Vec& values, const std::vector<uint8_t>& dones,
                 double bootstrap, double gamma, double lam, nn::Vec& advantages,
                 nn::Vec& returns) {
  const size_t T = rewards.size();
  if (values.size() != T || dones.size() != T)
    throw ConfigError("compute_gae: length mismatch");
  advantages.assign(T, 0.0);
  returns.assign(T, 0.0);
  double adv = 0.0;
  for (size_t i = T; i-- > 0;) {
    const double nonterminal = dones[i] ? 0.0 : 1.0;
    const double v_next = i + 1 < T ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * v_next * nonterminal - values[i];
    adv = delta + gamma * lam * nonterminal * adv;
    advantages[i] = adv;
    returns[i] = adv + values[i];
  }
}

void buffer_gae(RolloutBuffer& buf, const nn::Vec& last_values, double gamma, double lam) {
  if (static_cast<int>(last_values.size()) != buf.num_envs)
    throw ConfigError("buffer_gae: bootstrap length mismatch");
  nn::Vec r(buf.steps), v(buf.steps), adv, ret;
  std::vector<uint8_t> d(buf.steps);
  for (int e = 0; e < buf.num_envs; ++e) {
    for (int t = 0; t < buf.steps; ++t) {
      const size_t i = buf.at(t, e);
      r[t] = buf.rewards[i] + (buf.timeouts[i] ? gamma * buf.timeout_values[i] : 0.0);
      v[t] = buf.values[i];
      d[t] = buf.dones[i];
    }
    compute_gae(r, v, d, last_values[e], gamma, lam, adv, ret);
    for (int t = 0; t < buf.steps; ++t) {
      const size_t i = buf.at(t, e);
      buf.advantages[i] = adv[t];
      buf.returns[i] = ret[t];
    }
  }
}

void normalize_advantages(nn::Vec& adv) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= adv.size();
  double var = 0.0;
  for (double a : adv) var += sqr(a - mean);
  var /= adv.size();
  const double rstd = 1.0 / (std::sqrt(var) + 1.0e-8);
  for (double& a : adv) a = (a - mean) * rstd;
}

GaussianPolicy::GaussianPolicy(nn::ParamStore& ps, const std::string& name, int obs_dim,
                               const std::vector<int>& hidden, int act_dim, double init_std)
    : net_(ps, name + ".mean", obs_dim, hidden, act_dim),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      init_std_(init_std) {
  if (!(init_std > 0.0)) throw ConfigError("policy: init std must be positive");
  log_std_ = ps.add(name + ".log_std", {act_dim});
}

void GaussianPolicy::init(nn::ParamStore& ps, Rng& rng) const {
  net_.init_orthogonal(ps, rng);
  std::fill(ps.at(log_std_).value.begin(), ps.at(log_std_).value.end(), std::log(init_std_));
}

void GaussianPolicy::mean(const nn::ParamStore& ps, const nn::Vec& obs, int batch, nn::Vec& mu,
                          nn::MlpCache* cache) const {
  net_.forward(ps, obs, batch, mu, cache);
}

double GaussianPolicy::log_prob_row(const nn::ParamStore& ps, const double* mu,
                                    const double* action) const {
  const nn::Vec& ls = ps.at(log_std_).value;
  double lp = -0.5 * act_dim_ * kLn2Pi;
  for (int j = 0; j < act_dim_; ++j) {
    const double sigma = std::exp(ls[j]);
    lp += -0.5 * sqr((action[j] - mu[j]) / sigma) - ls[j];
  }
  return lp;
}

void GaussianPolicy::sample(const nn::ParamStore& ps, const nn::Vec& obs_row, Rng& rng,
                            nn::Vec& action, double& log_prob) const {
  nn::Vec mu;
  net_.forward(ps, obs_row, 1, mu, nullptr);
  const nn::Vec& ls = ps.at(log_std_).value;
  action.resize(act_dim_);
  for (int j = 0; j < act_dim_; ++j) action[j] = mu[j] + std::exp(ls[j]) * rng.normal();
  log_prob = log_prob_row(ps, mu.data(), action.data());
}

double GaussianPolicy::entropy(const nn::ParamStore& ps) const {
  const nn::Vec& ls = ps.at(log_std_).value;
  double h = 0.5 * act_dim_ * (kLn2Pi + 1.0);
  for (int j = 0; j < act_dim_; ++j) h += ls[j];
  return h;
}

PpoStats ppo_update(nn::ParamStore& store, const GaussianPolicy& actor, const nn::Mlp& critic,
                    RolloutBuffer& buf, const PpoConfig& cfg, int& adam_t, Rng& rng) {
  cfg.validate();
  const int N = buf.size();
  if (N == 0) throw ConfigError("ppo_update: empty buffer");
  const int act_dim = buf.act_dim;
  const double w_bc = cfg.bc_weight;
  if (w_bc > 0.0 && buf.teacher_actions.size() != buf.actions.size())
    throw ConfigError("ppo_update: bc_weight set but teacher actions missing");

  normalize_advantages(buf.advantages);

  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  adam.max_grad_norm = cfg.max_grad_norm;

  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);

  PpoStats stats;
  int batches = 0;
  const int mb_size = N / cfg.minibatches;
  if (mb_size == 0) throw ConfigError("ppo_update: fewer samples than minibatches");

  nn::Vec mb_obs, mb_cobs, mb_act, mu, val, dmu, dval;
  nn::MlpCache actor_cache, critic_cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = N - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<int>(rng.uniform_int(i + 1))]);
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const int lo = mb * mb_size;
      const int hi = mb + 1 == cfg.minibatches ? N : lo + mb_size;
      const int B = hi - lo;

      mb_obs.resize(static_cast<size_t>(B) * buf.obs_dim);
      mb_cobs.resize(static_cast<size_t>(B) * buf.critic_dim);
      mb_act.resize(static_cast<size_t>(B) * act_dim);
      for (int r = 0; r < B; ++r) {
        const int s = perm[lo + r];
        std::copy_n(buf.obs.begin() + static_cast<size_t>(s) * buf.obs_dim, buf.obs_dim,
                    mb_obs.begin() + static_cast<size_t>(r) * buf.obs_dim);
        std::copy_n(buf.critic_obs.begin() + static_cast<size_t>(s) * buf.critic_dim,
                    buf.critic_dim, mb_cobs.begin() + static_cast<size_t>(r) * buf.critic_dim);
        std::copy_n(buf.actions.begin() + static_cast<size_t>(s) * act_dim, act_dim,
                    mb_act.begin() + static_cast<size_t>(r) * act_dim);
      }

      actor.mean(store, mb_obs, B, mu, &actor_cache);
      critic.forward(store, mb_cobs, B, val, &critic_cache);

      const nn::Vec& ls = store.at(actor.log_std_handle()).value;
      nn::Vec& dls = store.at(actor.log_std_handle()).grad;

      store.zero_grad();
      dmu.assign(mu.size(), 0.0);
      dval.assign(val.size(), 0.0);

      double pol_loss = 0.0, val_loss = 0.0, kl_sum = 0.0, bc_loss = 0.0;
      int clipped = 0;
      for (int r = 0; r < B; ++r) {
        const int s = perm[lo + r];
        const double* mu_r = mu.data() + static_cast<size_t>(r) * act_dim;
        const double* a_r = mb_act.data() + static_cast<size_t>(r) * act_dim;
        const double lp_new = actor.log_prob_row(store, mu_r, a_r);
        const double ratio = std::exp(lp_new - buf.logp[s]);
        const double A = buf.advantages[s];
        const double surr1 = ratio * A;
        const double r_clamped = clampd(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surr2 = r_clamped * A;
        pol_loss += -std::min(surr1, surr2);
        kl_sum += buf.logp[s] - lp_new;
        if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;

        const double dlp = (surr1 <= surr2 ? -ratio * A / B : 0.0) * (1.0 - w_bc);
        for (int j = 0; j < act_dim; ++j) {
          const double sigma = std::exp(ls[j]);
          const double z = (a_r[j] - mu_r[j]) / sigma;
          dmu[static_cast<size_t>(r) * act_dim + j] = dlp * z / sigma;
          dls[j] += dlp * (z * z - 1.0);
        }

        if (w_bc > 0.0) {
          const double* ta = buf.teacher_actions.data() + static_cast<size_t>(s) * act_dim;
          for (int j = 0; j < act_dim; ++j) {
            const double diff = mu_r[j] - ta[j];
            bc_loss += diff * diff;
            dmu[static_cast<size_t>(r) * act_dim + j] +=
                w_bc * 2.0 * diff / (static_cast<double>(B) * act_dim);
          }
        }

        const double verr = val[r] - buf.returns[s];
        val_loss += verr * verr;
        dval[r] = cfg.value_coef * 2.0 * verr / B;
      }
      pol_loss /= B;
      val_loss /= B;
      bc_loss /= static_cast<double>(B) * act_dim;
      const double ent = actor.entropy(store);
      for (int j = 0; j < act_dim; ++j) dls[j] += -(1.0 - w_bc) * cfg.entropy_coef;

      const double total = (1.0 - w_bc) * (pol_loss - cfg.entropy_coef * ent) + w_bc * bc_loss +
                           cfg.value_coef * val_loss;
      if (!std::isfinite(total)) {
        std::ostringstream os;
        os << "ppo_update: non-finite loss (policy " << pol_loss << ", value " << val_loss
           << ", entropy " << ent << ")";
        throw DivergenceError(os.str());
      }

      critic.backward(store, critic_cache, dval, nullptr);
      actor.net().backward(store, actor_cache, dmu, nullptr);
      stats.grad_norm += nn::adam_step(store, adam, ++adam_t);

      stats.policy_loss += pol_loss;
      stats.value_loss += val_loss;
      stats.entropy += ent;
      stats.kl += kl_sum / B;
      stats.clip_fraction += static_cast<double>(clipped) / B;
      stats.bc_loss += bc_loss;
      ++batches;
    }
  }

  stats.policy_loss /= batches;
  stats.value_loss /= batches;
  stats.entropy /= batches;
  stats.kl /= batches;
  stats.grad_norm /= batches;
  stats.clip_fraction /= batches;
  stats.bc_loss /= batches;
  return stats;
}

}  // namespace locomanip::ppo
