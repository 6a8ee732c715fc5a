#include "cartwin/drl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace cartwin {

DdpgConfig DdpgConfig::from_config(const Config& cfg) {
  DdpgConfig d;
  d.gamma = cfg.get_double("drl.gamma", d.gamma);
  d.lr_actor = cfg.get_double("drl.lr_actor", d.lr_actor);
  d.lr_critic = cfg.get_double("drl.lr_critic", d.lr_critic);
  d.batch = cfg.get_int("drl.batch", d.batch);
  d.tau = cfg.get_double("drl.tau", d.tau);
  d.buffer_capacity = cfg.get_int("drl.buffer_capacity", d.buffer_capacity);
  d.explore_std = cfg.get_double("drl.explore_std", d.explore_std);
  d.explore_decay = cfg.get_double("drl.explore_decay", d.explore_decay);
  d.episodes = cfg.get_int("drl.episodes", d.episodes);
  d.warmup_steps = cfg.get_int("drl.warmup_steps", d.warmup_steps);
  d.update_every = cfg.get_int("drl.update_every", d.update_every);
  d.eval_every = cfg.get_int("drl.eval_every", d.eval_every);
  d.hidden = cfg.get_int("drl.hidden", d.hidden);
  d.action_hidden = cfg.get_int("drl.action_hidden", d.action_hidden);
  if (!(d.gamma > 0.0 && d.gamma < 1.0)) {
    throw std::invalid_argument("drl.gamma must be in (0, 1)");
  }
  if (d.batch < 1 || d.buffer_capacity < d.batch) {
    throw std::invalid_argument("drl: bad batch/buffer sizes");
  }
  return d;
}

namespace {

struct Transition {
  float obs[4];
  float action;  // normalized, in [-1, 1]
  float reward;
  float next_obs[4];
  float not_done;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    data_.reserve(std::min<std::size_t>(capacity, 1 << 20));
  }

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  const Transition& sample(RngStream& rng) const {
    return data_[rng.uniform_index(data_.size())];
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

Policy snapshot_policy(const ActorNet<float>& actor, const EnvConfig& env_cfg) {
  Policy p;
  p.actor = std::make_shared<ActorNet<float>>(actor);
  p.obs_norm = env_cfg.obs_norm;
  p.delta_dot_max = env_cfg.delta_dot_max;
  return p;
}

}  // namespace

double evaluate_policy(PathTrackingEnv& env, const Policy& policy,
                       double* max_abs_dy, bool* terminated) {
  env.reset(0.0);
  double sum_sq = 0.0;
  double peak = 0.0;
  int n = 0;
  bool crashed = false;
  for (int k = 0; k < env.step_cap(); ++k) {
    const Eigen::Vector4d raw(env.errors().dy, env.errors().dy_dot,
                              env.errors().dpsi, env.errors().dr);
    const auto res = env.step(policy.act(raw));
    sum_sq += env.errors().dy * env.errors().dy;
    peak = std::max(peak, std::abs(env.errors().dy));
    ++n;
    if (res.terminal) {
      crashed = true;
      break;
    }
    if (res.completed) break;
  }
  if (max_abs_dy) *max_abs_dy = peak;
  if (terminated) *terminated = crashed;
  if (crashed || n == 0) return 1e3;
  return std::sqrt(sum_sq / n);
}

TrainResult ddpg_train(PathTrackingEnv& env, const DdpgConfig& cfg,
                       std::uint64_t seed) {
  RngStream rng(seed);
  RngStream net_rng = rng.spawn();
  RngStream sample_rng = rng.spawn();

  ActorNet<float> actor(4, cfg.hidden, net_rng);
  CriticNet<float> critic(4, 1, cfg.hidden, cfg.action_hidden, net_rng);
  ActorNet<float> actor_target = actor;
  CriticNet<float> critic_target = critic;

  Adam<float> opt_actor(actor.parameters(), cfg.lr_actor);
  Adam<float> opt_critic(critic.parameters(), cfg.lr_critic);

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));

  const EnvConfig& env_cfg = env.config();
  TrainResult result;
  result.policy = snapshot_policy(actor, env_cfg);
  result.best_eval_rmse = 1e9;

  PathTrackingEnv eval_env(env.path(), env_cfg);

  MatX<float> obs_b(4, cfg.batch), act_b(1, cfg.batch), next_b(4, cfg.batch);
  VecX<float> rew_b(cfg.batch), live_b(cfg.batch);

  long long total_steps = 0;
  std::deque<double> window;
  double window_sum = 0.0;

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    Eigen::Vector4d obs = env.reset_random(rng);
    const double sigma =
        cfg.explore_std * std::pow(cfg.explore_decay, ep - 1);
    EpisodeStats stats;
    stats.episode = ep;
    double gamma_pow = 1.0;

    for (int k = 0; k < env.step_cap(); ++k) {
      float u;
      if (total_steps < cfg.warmup_steps) {
        u = static_cast<float>(rng.uniform(-1.0, 1.0));
      } else {
        MatX<float> o(4, 1);
        for (int i = 0; i < 4; ++i) o(i, 0) = static_cast<float>(obs(i));
        const float mean = actor.forward(o)(0, 0);
        u = mean + static_cast<float>(rng.gaussian(0.0, sigma));
      }
      u = std::clamp(u, -1.0f, 1.0f);

      const auto res = env.step(env_cfg.delta_dot_max * u);
      Transition t;
      for (int i = 0; i < 4; ++i) t.obs[i] = static_cast<float>(obs(i));
      t.action = u;
      t.reward = static_cast<float>(res.reward);
      for (int i = 0; i < 4; ++i) t.next_obs[i] = static_cast<float>(res.obs(i));
      t.not_done = (res.terminal || res.completed) ? 0.0f : 1.0f;
      buffer.push(t);

      stats.reward_sum += res.reward;
      stats.discounted_return += gamma_pow * res.reward;
      gamma_pow *= cfg.gamma;
      ++stats.steps;
      ++total_steps;
      obs = res.obs;

      if (buffer.size() >= static_cast<std::size_t>(cfg.batch) &&
          total_steps >= cfg.warmup_steps &&
          total_steps % cfg.update_every == 0) {
        // assemble the minibatch
        for (int i = 0; i < cfg.batch; ++i) {
          const Transition& s = buffer.sample(sample_rng);
          for (int j = 0; j < 4; ++j) {
            obs_b(j, i) = s.obs[j];
            next_b(j, i) = s.next_obs[j];
          }
          act_b(0, i) = s.action;
          rew_b(i) = s.reward;
          live_b(i) = s.not_done;
        }
        // critic: TD target from the target networks
        const MatX<float> next_act = actor_target.forward(next_b);
        const MatX<float> q_next = critic_target.forward(next_b, next_act);
        const MatX<float> q = critic.forward(obs_b, act_b);
        MatX<float> dq(1, cfg.batch);
        for (int i = 0; i < cfg.batch; ++i) {
          const float y = rew_b(i) + static_cast<float>(cfg.gamma) *
                                         live_b(i) * q_next(0, i);
          dq(0, i) = 2.0f * (q(0, i) - y) / cfg.batch;
        }
        critic.backward(dq, false);
        opt_critic.step(critic.parameters());

        // actor: deterministic policy gradient through the critic
        const MatX<float> pol_act = actor.forward(obs_b);
        critic.forward(obs_b, pol_act);
        MatX<float> dq_pol = MatX<float>::Constant(1, cfg.batch,
                                                   -1.0f / cfg.batch);
        const MatX<float> dact = critic.backward(dq_pol, true);
        actor.backward(dact);
        opt_actor.step(actor.parameters());

        soft_update(actor.parameters(), actor_target.parameters(), cfg.tau);
        soft_update(critic.parameters(), critic_target.parameters(), cfg.tau);
      }

      if (res.terminal) {
        stats.crashed = true;
        break;
      }
      if (res.completed) break;
    }

    window.push_back(stats.discounted_return);
    window_sum += stats.discounted_return;
    if (window.size() > 20) {
      window_sum -= window.front();
      window.pop_front();
    }
    stats.mean_return = window_sum / window.size();

    if (cfg.eval_every > 0 &&
        (ep % cfg.eval_every == 0 || ep == cfg.episodes)) {
      const Policy snap = snapshot_policy(actor, env_cfg);
      const double rmse = evaluate_policy(eval_env, snap);
      stats.eval_rmse = rmse;
      if (rmse < result.best_eval_rmse) {
        result.best_eval_rmse = rmse;
        result.best_episode = ep;
        result.policy = snap;
      }
    }
    result.curve.push_back(stats);
  }

  result.final_policy = snapshot_policy(actor, env_cfg);
  if (result.best_episode < 0 || result.best_eval_rmse >= 1e3) {
    result.diverged = true;
  }
  return result;
}

}  // namespace cartwin
