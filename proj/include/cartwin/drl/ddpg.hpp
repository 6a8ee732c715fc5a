#pragma once

#include <vector>

#include "cartwin/drl/env.hpp"
#include "cartwin/drl/policy.hpp"
#include "cartwin/io/config.hpp"

namespace cartwin {

struct DdpgConfig {
  double gamma = 0.99;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  int batch = 64;
  double tau = 5e-3;
  int buffer_capacity = 200000;
  double explore_std = 0.3;     // fraction of the action range
  double explore_decay = 0.995; // per episode
  int episodes = 250;
  int warmup_steps = 1000;
  int update_every = 1;
  int eval_every = 10;
  int hidden = 200;
  int action_hidden = 100;

  static DdpgConfig from_config(const Config& cfg);
};

struct EpisodeStats {
  int episode = 0;
  int steps = 0;
  double discounted_return = 0.0;  // sum gamma^(k-1) r_k
  double reward_sum = 0.0;
  double mean_return = 0.0;        // moving average of discounted returns
  double eval_rmse = -1.0;         // lateral-error RMSE, -1 when not evaluated
  bool crashed = false;
};

struct TrainResult {
  Policy policy;          // best evaluated snapshot
  Policy final_policy;
  std::vector<EpisodeStats> curve;
  double best_eval_rmse = -1.0;
  int best_episode = -1;
  bool diverged = false;
};

/// Deterministic evaluation rollout (no noise, centered start); returns
/// the lateral-error RMSE, or a large sentinel when the episode ends in a
/// threshold breach.
double evaluate_policy(PathTrackingEnv& env, const Policy& policy,
                       double* max_abs_dy = nullptr,
                       bool* terminated = nullptr);

TrainResult ddpg_train(PathTrackingEnv& env, const DdpgConfig& cfg,
                       std::uint64_t seed);

}  // namespace cartwin
