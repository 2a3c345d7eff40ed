// Copyright 2026 The Chunkspace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CHUNKSPACE_RL_PPO_HPP_
#define CHUNKSPACE_RL_PPO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/core/tensor.hpp"
#include "chunkspace/nn/layers.hpp"
#include "chunkspace/nn/params.hpp"
#include "chunkspace/rl/augmented.hpp"

namespace chunkspace {

/// Clipped-surrogate actor-critic hyperparameters.
struct PpoConfig {
  int64_t n_envs = 16;        // parallel rollout environments
  int64_t horizon = 256;      // steps per env per iteration
  int64_t iterations = 200;   // training iterations
  int64_t epochs = 4;         // optimization epochs per iteration
  int64_t minibatches = 4;    // minibatches per epoch
  double lr = 1e-3;
  double gamma = 0.99;        // discount
  double lam = 0.95;          // GAE lambda
  double clip = 0.2;          // surrogate clip range
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  std::vector<int64_t> hidden = {64, 64};
  double init_log_std = -2.0;
  uint64_t seed = 0;

  void Validate() const {
    if (n_envs < 1 || horizon < 2 || iterations < 1) {
      throw std::invalid_argument("ppo sizes must be positive (horizon >= 2)");
    }
    if (epochs < 1 || minibatches < 1) {
      throw std::invalid_argument("ppo epochs/minibatches must be >= 1");
    }
    if (gamma <= 0.0 || gamma > 1.0 || lam < 0.0 || lam > 1.0) {
      throw std::invalid_argument("gamma must be in (0,1], lambda in [0,1]");
    }
    if (clip <= 0.0 || lr <= 0.0) {
      throw std::invalid_argument("clip and lr must be positive");
    }
    if (hidden.empty()) {
      throw std::invalid_argument("policy needs at least one hidden layer");
    }
  }
};

/// Tanh MLP trunk with a linear head.  The head is zero-initialized so a
/// fresh policy outputs exactly zero mean everywhere.
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  Mlp(const std::string& prefix, int64_t in, const std::vector<int64_t>& hidden,
      int64_t out) {
    int64_t width = in;
    for (size_t l = 0; l < hidden.size(); ++l) {
      layers_.emplace_back(prefix + ".h" + std::to_string(l), width,
                           hidden[l]);
      width = hidden[l];
    }
    head_ = Dense<T>(prefix + ".head", width, out);
  }

  void Init(ParameterSet<T>& params, Rng& rng) const {
    for (const Dense<T>& d : layers_) d.Init(params, rng, 1.0);
    head_.Init(params, rng, 0.0);
  }

  struct Cache {
    std::vector<typename Dense<T>::Cache> dense;
    std::vector<typename TanhLayer<T>::Cache> act;
    typename Dense<T>::Cache head;
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    Cache* cache = nullptr) const {
    if (cache != nullptr) {
      cache->dense.resize(layers_.size());
      cache->act.resize(layers_.size());
    }
    Tensor<T> h = x;
    for (size_t l = 0; l < layers_.size(); ++l) {
      h = layers_[l].Forward(params, h,
                             cache != nullptr ? &cache->dense[l] : nullptr);
      h = TanhLayer<T>::Forward(h, cache != nullptr ? &cache->act[l] : nullptr);
    }
    return head_.Forward(params, h, cache != nullptr ? &cache->head : nullptr);
  }

  Tensor<T> Backward(ParameterSet<T>& params, const Cache& cache,
                     const Tensor<T>& gy) const {
    Tensor<T> g = head_.Backward(params, cache.head, gy);
    for (size_t l = layers_.size(); l-- > 0;) {
      g = TanhLayer<T>::Backward(cache.act[l], g);
      g = layers_[l].Backward(params, cache.dense[l], g);
    }
    return g;
  }

 private:
  std::vector<Dense<T>> layers_;
  Dense<T> head_;
};

/// Diagonal-Gaussian actor-critic: policy mean MLP, a state-independent
/// log-std parameter vector, and a value MLP, all in one ParameterSet.
template <typename T>
class PpoAgent {
 public:
  PpoAgent(int64_t obs_dim, int64_t act_dim, const PpoConfig& cfg)
      : obs_dim_(obs_dim),
        act_dim_(act_dim),
        pi_("pi", obs_dim, cfg.hidden, act_dim),
        vf_("vf", obs_dim, cfg.hidden, 1) {
    Rng rng(Rng::DeriveSeed(cfg.seed, 0x61676e74));  // "agnt"
    pi_.Init(params, rng);
    vf_.Init(params, rng);
    Param<T>& ls = params.Create("pi.log_std", {act_dim});
    for (auto& v : ls.value.raw()) v = static_cast<T>(cfg.init_log_std);
  }

  int64_t obs_dim() const { return obs_dim_; }
  int64_t act_dim() const { return act_dim_; }
  const Mlp<T>& pi() const { return pi_; }
  const Mlp<T>& vf() const { return vf_; }

  /// Policy mean for a batch of observations.
  Tensor<T> Mean(const Tensor<T>& obs,
                 typename Mlp<T>::Cache* cache = nullptr) const {
    return pi_.Forward(params, obs, cache);
  }

  Tensor<T> Value(const Tensor<T>& obs,
                  typename Mlp<T>::Cache* cache = nullptr) const {
    return vf_.Forward(params, obs, cache);
  }

  std::vector<double> LogStd() const {
    const Param<T>& ls = params.Get("pi.log_std");
    std::vector<double> out(static_cast<size_t>(act_dim_));
    for (int64_t j = 0; j < act_dim_; ++j) {
      out[static_cast<size_t>(j)] =
          static_cast<double>(ls.value[static_cast<size_t>(j)]);
    }
    return out;
  }

  /// log pi(a|s) for a diagonal Gaussian.
  static double LogProb(const double* mean, const std::vector<double>& log_std,
                        const double* action, int64_t act_dim) {
    constexpr double kLog2Pi = 1.8378770664093453;
    double lp = 0.0;
    for (int64_t j = 0; j < act_dim; ++j) {
      const double ls = log_std[static_cast<size_t>(j)];
      const double z = (action[j] - mean[j]) * std::exp(-ls);
      lp += -0.5 * z * z - ls - 0.5 * kLog2Pi;
    }
    return lp;
  }

  ParameterSet<T> params;

 private:
  int64_t obs_dim_ = 0;
  int64_t act_dim_ = 0;
  Mlp<T> pi_;
  Mlp<T> vf_;
};

/// Outcome of one adapter step.
template <typename State>
struct StepOutcome {
  State next;
  double reward = 0.0;
  bool done = false;     // episode ended after this transition
  bool success = false;  // a task success occurred on this step
};

/// Raw (unchunked) baseline: the policy drives the servo target directly,
/// squashed to the posture box [-1, 1].
class RawPolicyEnv {
 public:
  using State = EnvState;

  explicit RawPolicyEnv(const ToyEnv* env) : env_(env) {
    if (env == nullptr) throw std::invalid_argument("env required");
  }

  int64_t obs_dim() const { return 3 * env_->spec().dof; }
  int64_t action_dim() const { return env_->spec().dof; }

  State Reset(uint64_t seed) const { return env_->Reset(seed); }

  std::vector<double> Observe(const State& s) const {
    return EnvObservation(*env_, s);
  }

  StepOutcome<State> Step(const State& s, const std::vector<double>& raw,
                          Rng& /*rng*/) const {
    const int64_t d = env_->spec().dof;
    std::vector<double> u(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) {
      u[static_cast<size_t>(j)] = std::tanh(raw[static_cast<size_t>(j)]);
    }
    StepOutcome<State> out;
    out.reward = -env_->Cost(s, u);
    out.next = env_->Step(s, u);
    out.success = out.next.successes > s.successes;
    out.done = out.next.step >= env_->spec().episode_steps;
    return out;
  }

 private:
  const ToyEnv* env_;
};

/// Chunked policy env: raw actions are [delta_raw (D); u_s_raw (K)]; the
/// adapter squashes them to the configured bounds before the augmented step.
class ChunkedPolicyEnv {
 public:
  using State = AugmentedState;

  explicit ChunkedPolicyEnv(const AugmentedEnv* env) : env_(env) {
    if (env == nullptr) throw std::invalid_argument("env required");
  }

  int64_t obs_dim() const { return env_->obs_dim(); }
  int64_t action_dim() const { return env_->dof() + env_->codes(); }

  State Reset(uint64_t seed) const { return env_->Reset(seed); }

  std::vector<double> Observe(const State& s) const {
    return env_->Observe(s);
  }

  StepOutcome<State> Step(const State& s, const std::vector<double>& raw,
                          Rng& rng) const {
    const int64_t d = env_->dof();
    const int64_t k = env_->codes();
    AugmentedAction a;
    a.delta.resize(static_cast<size_t>(d));
    a.u_s.resize(static_cast<size_t>(k));
    for (int64_t j = 0; j < d; ++j) {
      a.delta[static_cast<size_t>(j)] =
          env_->config().residual_bound * std::tanh(raw[static_cast<size_t>(j)]);
    }
    for (int64_t i = 0; i < k; ++i) {
      a.u_s[static_cast<size_t>(i)] =
          env_->config().select_bound *
          std::tanh(raw[static_cast<size_t>(d + i)]);
    }
    const AugmentedEnv::StepResult r = env_->Step(s, a, rng);
    StepOutcome<State> out;
    out.next = r.next;
    out.reward = -r.cost;
    out.success = r.next.x.successes > s.x.successes;
    out.done = r.next.x.step >= env_->env().spec().episode_steps;
    return out;
  }

 private:
  const AugmentedEnv* env_;
};

/// Per-iteration training metrics (JSON-lines friendly).
struct PpoIterMetrics {
  int64_t iter = 0;
  int64_t env_steps = 0;  // cumulative
  double mean_return = 0.0;
  double success_rate = 0.0;
  int64_t episodes = 0;  // completed this iteration
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct PpoResult {
  std::vector<PpoIterMetrics> curve;
  /// Cumulative env steps at the first iteration whose completed-episode
  /// success rate reached the threshold; -1 if never reached.
  int64_t steps_to_success = -1;
};

/// Trains a clipped-surrogate actor-critic with GAE on any adapter exposing
/// obs_dim/action_dim/Reset/Observe/Step.  Rollouts use one RNG stream per
/// env, so results are bit-identical regardless of thread count.
template <typename Adapter, typename T = float>
PpoResult TrainPolicy(
    const Adapter& env, const PpoConfig& cfg,
    const std::function<void(const PpoIterMetrics&)>& on_iter = nullptr,
    double success_threshold = 0.5, PpoAgent<T>* agent_out = nullptr) {
  cfg.Validate();
  const int64_t obs_dim = env.obs_dim();
  const int64_t act_dim = env.action_dim();
  const int64_t E = cfg.n_envs;
  const int64_t H = cfg.horizon;
  const int64_t B = E * H;

  PpoAgent<T> agent(obs_dim, act_dim, cfg);

  using State = typename Adapter::State;
  std::vector<State> states(static_cast<size_t>(E));
  std::vector<Rng> env_rngs;
  std::vector<Rng> act_rngs;
  std::vector<int64_t> episode_index(static_cast<size_t>(E), 0);
  std::vector<double> ep_return(static_cast<size_t>(E), 0.0);
  std::vector<uint8_t> ep_success(static_cast<size_t>(E), 0);
  for (int64_t e = 0; e < E; ++e) {
    env_rngs.emplace_back(
        Rng::DeriveSeed(cfg.seed, 0x656e7672, static_cast<uint64_t>(e)));
    act_rngs.emplace_back(
        Rng::DeriveSeed(cfg.seed, 0x61637472, static_cast<uint64_t>(e)));
    states[static_cast<size_t>(e)] = env.Reset(
        Rng::DeriveSeed(cfg.seed, 0x657073, static_cast<uint64_t>(e), 0));
  }
  Rng update_rng(Rng::DeriveSeed(cfg.seed, 0x75706474));  // "updt"

  PpoResult result;
  int64_t total_steps = 0;
  double last_return = 0.0;
  double last_success = 0.0;

  Tensor<T> obs_buf({B, obs_dim});
  std::vector<double> act_buf(static_cast<size_t>(B * act_dim));
  std::vector<double> logp_buf(static_cast<size_t>(B));
  std::vector<double> val_buf(static_cast<size_t>(B));
  std::vector<double> rew_buf(static_cast<size_t>(B));
  std::vector<uint8_t> done_buf(static_cast<size_t>(B));

  for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
    int64_t episodes = 0;
    int64_t successes = 0;
    double return_sum = 0.0;

    Tensor<T> step_obs({E, obs_dim});
    for (int64_t t = 0; t < H; ++t) {
      for (int64_t e = 0; e < E; ++e) {
        const std::vector<double> o =
            env.Observe(states[static_cast<size_t>(e)]);
        for (int64_t j = 0; j < obs_dim; ++j) {
          step_obs.at(e, j) = static_cast<T>(o[static_cast<size_t>(j)]);
        }
      }
      const Tensor<T> mean = agent.Mean(step_obs);
      const Tensor<T> value = agent.Value(step_obs);
      const std::vector<double> log_std = agent.LogStd();

      for (int64_t e = 0; e < E; ++e) {
        const int64_t row = t * E + e;
        for (int64_t j = 0; j < obs_dim; ++j) {
          obs_buf.at(row, j) = step_obs.at(e, j);
        }
        std::vector<double> mu(static_cast<size_t>(act_dim));
        std::vector<double> action(static_cast<size_t>(act_dim));
        for (int64_t j = 0; j < act_dim; ++j) {
          mu[static_cast<size_t>(j)] = static_cast<double>(mean.at(e, j));
          const double std_j = std::exp(log_std[static_cast<size_t>(j)]);
          action[static_cast<size_t>(j)] =
              mu[static_cast<size_t>(j)] +
              std_j * act_rngs[static_cast<size_t>(e)].normal(0.0, 1.0);
          act_buf[static_cast<size_t>(row * act_dim + j)] =
              action[static_cast<size_t>(j)];
        }
        logp_buf[static_cast<size_t>(row)] =
            PpoAgent<T>::LogProb(mu.data(), log_std, action.data(), act_dim);
        val_buf[static_cast<size_t>(row)] =
            static_cast<double>(value.at(e, 0));

        const StepOutcome<State> out = env.Step(
            states[static_cast<size_t>(e)], action,
            env_rngs[static_cast<size_t>(e)]);
        rew_buf[static_cast<size_t>(row)] = out.reward;
        done_buf[static_cast<size_t>(row)] = out.done ? 1 : 0;
        ep_return[static_cast<size_t>(e)] += out.reward;
        if (out.success) ep_success[static_cast<size_t>(e)] = 1;
        if (out.done) {
          ++episodes;
          return_sum += ep_return[static_cast<size_t>(e)];
          successes += ep_success[static_cast<size_t>(e)];
          ep_return[static_cast<size_t>(e)] = 0.0;
          ep_success[static_cast<size_t>(e)] = 0;
          ++episode_index[static_cast<size_t>(e)];
          states[static_cast<size_t>(e)] = env.Reset(Rng::DeriveSeed(
              cfg.seed, 0x657073, static_cast<uint64_t>(e),
              static_cast<uint64_t>(episode_index[static_cast<size_t>(e)])));
        } else {
          states[static_cast<size_t>(e)] = out.next;
        }
      }
    }
    total_steps += B;

    // Bootstrap values for the final states and compute GAE per env stream.
    for (int64_t e = 0; e < E; ++e) {
      const std::vector<double> o = env.Observe(states[static_cast<size_t>(e)]);
      for (int64_t j = 0; j < obs_dim; ++j) {
        step_obs.at(e, j) = static_cast<T>(o[static_cast<size_t>(j)]);
      }
    }
    const Tensor<T> boot = agent.Value(step_obs);
    std::vector<double> adv(static_cast<size_t>(B));
    std::vector<double> ret(static_cast<size_t>(B));
    for (int64_t e = 0; e < E; ++e) {
      double gae = 0.0;
      double next_value = static_cast<double>(boot.at(e, 0));
      for (int64_t t = H - 1; t >= 0; --t) {
        const int64_t row = t * E + e;
        const double mask =
            done_buf[static_cast<size_t>(row)] != 0 ? 0.0 : 1.0;
        const double delta = rew_buf[static_cast<size_t>(row)] +
                             cfg.gamma * next_value * mask -
                             val_buf[static_cast<size_t>(row)];
        gae = delta + cfg.gamma * cfg.lam * mask * gae;
        adv[static_cast<size_t>(row)] = gae;
        ret[static_cast<size_t>(row)] =
            gae + val_buf[static_cast<size_t>(row)];
        next_value = val_buf[static_cast<size_t>(row)];
      }
    }
    double adv_mean = 0.0;
    for (double a : adv) adv_mean += a;
    adv_mean /= static_cast<double>(B);
    double adv_var = 0.0;
    for (double a : adv) adv_var += (a - adv_mean) * (a - adv_mean);
    const double adv_std =
        std::sqrt(adv_var / static_cast<double>(B)) + 1e-8;
    for (double& a : adv) a = (a - adv_mean) / adv_std;

    // Clipped-surrogate updates.
    double policy_loss = 0.0;
    double value_loss = 0.0;
    std::vector<int64_t> order(static_cast<size_t>(B));
    std::iota(order.begin(), order.end(), 0);
    const int64_t mb_size = B / cfg.minibatches;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      update_rng.shuffle(order);
      for (int64_t mb = 0; mb < cfg.minibatches; ++mb) {
        const int64_t begin = mb * mb_size;
        const int64_t end = mb == cfg.minibatches - 1 ? B : begin + mb_size;
        const int64_t bs = end - begin;
        Tensor<T> mb_obs({bs, obs_dim});
        for (int64_t i = 0; i < bs; ++i) {
          const int64_t row = order[static_cast<size_t>(begin + i)];
          for (int64_t j = 0; j < obs_dim; ++j) {
            mb_obs.at(i, j) = obs_buf.at(row, j);
          }
        }
        typename Mlp<T>::Cache pi_cache;
        typename Mlp<T>::Cache vf_cache;
        const Tensor<T> mean = agent.pi().Forward(agent.params, mb_obs,
                                                  &pi_cache);
        const Tensor<T> value = agent.vf().Forward(agent.params, mb_obs,
                                                   &vf_cache);
        const std::vector<double> log_std = agent.LogStd();

        Tensor<T> g_mean({bs, act_dim});
        Tensor<T> g_value({bs, 1});
        std::vector<double> g_log_std(static_cast<size_t>(act_dim), 0.0);
        double mb_policy_loss = 0.0;
        double mb_value_loss = 0.0;
        const double inv_bs = 1.0 / static_cast<double>(bs);
        for (int64_t i = 0; i < bs; ++i) {
          const int64_t row = order[static_cast<size_t>(begin + i)];
          const double* a = &act_buf[static_cast<size_t>(row * act_dim)];
          std::vector<double> mu(static_cast<size_t>(act_dim));
          for (int64_t j = 0; j < act_dim; ++j) {
            mu[static_cast<size_t>(j)] = static_cast<double>(mean.at(i, j));
          }
          const double lp =
              PpoAgent<T>::LogProb(mu.data(), log_std, a, act_dim);
          const double ratio =
              std::exp(lp - logp_buf[static_cast<size_t>(row)]);
          const double advantage = adv[static_cast<size_t>(row)];
          const double unclipped = ratio * advantage;
          const double clipped =
              std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantage;
          mb_policy_loss += -std::min(unclipped, clipped) * inv_bs;
          // d(-min)/d(logp): active only when the unclipped branch is taken.
          const bool active = unclipped <= clipped;
          const double dlp = active ? -advantage * ratio * inv_bs : 0.0;
          for (int64_t j = 0; j < act_dim; ++j) {
            const double ls = log_std[static_cast<size_t>(j)];
            const double inv_var = std::exp(-2.0 * ls);
            const double diff =
                a[j] - mu[static_cast<size_t>(j)];
            // dlogp/dmu = (a - mu)/var; dlogp/dlog_std = ((a-mu)/std)^2 - 1.
            g_mean.at(i, j) = static_cast<T>(dlp * diff * inv_var);
            g_log_std[static_cast<size_t>(j)] +=
                dlp * (diff * diff * inv_var - 1.0) -
                cfg.ent_coef * inv_bs;  // dH/dlog_std = 1 per dim
          }
          const double v = static_cast<double>(value.at(i, 0));
          const double verr = v - ret[static_cast<size_t>(row)];
          mb_value_loss += 0.5 * verr * verr * inv_bs;
          g_value.at(i, 0) = static_cast<T>(cfg.vf_coef * verr * inv_bs);
        }
        if (!std::isfinite(mb_policy_loss) || !std::isfinite(mb_value_loss)) {
          throw std::runtime_error(
              "ppo: non-finite loss at iter " + std::to_string(iter) +
              " epoch " + std::to_string(epoch) + " (policy " +
              std::to_string(mb_policy_loss) + ", value " +
              std::to_string(mb_value_loss) + ")");
        }
        policy_loss = mb_policy_loss;
        value_loss = mb_value_loss;

        agent.params.ZeroGrads();
        agent.pi().Backward(agent.params, pi_cache, g_mean);
        agent.vf().Backward(agent.params, vf_cache, g_value);
        Param<T>& ls = agent.params.Get("pi.log_std");
        for (int64_t j = 0; j < act_dim; ++j) {
          ls.grad[static_cast<size_t>(j)] +=
              static_cast<T>(g_log_std[static_cast<size_t>(j)]);
        }
        if (cfg.max_grad_norm > 0.0) {
          double norm_sq = 0.0;
          for (size_t p = 0; p < agent.params.size(); ++p) {
            for (const T& g : agent.params.at(p).grad.raw()) {
              norm_sq += static_cast<double>(g) * static_cast<double>(g);
            }
          }
          const double norm = std::sqrt(norm_sq);
          if (norm > cfg.max_grad_norm) {
            const double scale = cfg.max_grad_norm / norm;
            for (size_t p = 0; p < agent.params.size(); ++p) {
              for (T& g : agent.params.at(p).grad.raw()) {
                g = static_cast<T>(static_cast<double>(g) * scale);
              }
            }
          }
        }
        agent.params.AdamStep(cfg.lr);
      }
    }

    PpoIterMetrics metrics;
    metrics.iter = iter;
    metrics.env_steps = total_steps;
    if (episodes > 0) {
      last_return = return_sum / static_cast<double>(episodes);
      last_success =
          static_cast<double>(successes) / static_cast<double>(episodes);
    }
    metrics.mean_return = last_return;
    metrics.success_rate = last_success;
    metrics.episodes = episodes;
    metrics.policy_loss = policy_loss;
    metrics.value_loss = value_loss;
    result.curve.push_back(metrics);
    if (result.steps_to_success < 0 && episodes > 0 &&
        metrics.success_rate >= success_threshold) {
      result.steps_to_success = total_steps;
    }
    if (on_iter) on_iter(metrics);
  }
  if (agent_out != nullptr) *agent_out = agent;
  return result;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_RL_PPO_HPP_
