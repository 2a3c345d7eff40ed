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

#ifndef CHUNKSPACE_ENV_TOY_ENV_HPP_
#define CHUNKSPACE_ENV_TOY_ENV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/corpus/motion.hpp"
#include "chunkspace/corpus/synergy.hpp"

namespace chunkspace {

enum class TaskKind { kTracking, kReachHold };

inline TaskKind ParseTask(const std::string& name) {
  if (name == "tracking") return TaskKind::kTracking;
  if (name == "reach_hold") return TaskKind::kReachHold;
  throw std::invalid_argument("unknown task: " + name);
}

inline const char* TaskName(TaskKind t) {
  return t == TaskKind::kTracking ? "tracking" : "reach_hold";
}

/// Cost weights and servo limits shared by both surrogate tasks.
struct EnvSpec {
  TaskKind task = TaskKind::kTracking;
  int64_t dof = 11;
  double dt = 0.02;          // seconds per step
  double v_max = 4.0;        // units per second rate limit
  double w_track = 1.0;      // Env A tracking weight
  double w_effort = 0.01;    // action smoothness weight
  double w_goal = 1.0;       // Env B goal weight
  double success_bonus = 5.0;
  double hold_tol = 0.1;     // infinity-norm goal tolerance
  int64_t hold_steps = 25;   // consecutive in-tolerance steps for success
  int64_t episode_steps = 500;
  // Env B goals walk locally in synergy-weight space: each new goal is the
  // previous goal's weights plus U(-goal_step, goal_step) per synergy,
  // clamped to [-1, 1] — successive targets are nearby postures, the way a
  // manipulation trial's next target pose is a local change.
  double goal_step = 0.2;

  void Validate() const {
    if (dof < 1) throw std::invalid_argument("env dof must be >= 1");
    if (dt <= 0.0) throw std::invalid_argument("env dt must be positive");
    if (v_max <= 0.0) throw std::invalid_argument("v_max must be positive");
    if (hold_steps < 1) throw std::invalid_argument("hold_steps must be >= 1");
    if (episode_steps < 1) {
      throw std::invalid_argument("episode_steps must be >= 1");
    }
  }
};

/// Value-type environment state; `Step` is a pure function of (state, u).
struct EnvState {
  std::vector<double> q;       // joint positions
  std::vector<double> u_prev;  // previous commanded target
  std::vector<double> goal;    // Env B goal posture
  std::vector<double> goal_weights;  // Env B goal's synergy weights
  int64_t ref_start = 0;       // Env A reference offset into the holdout
  int64_t step = 0;
  int64_t hold = 0;
  int64_t successes = 0;
  uint64_t seed = 0;           // reset seed; drives goal resampling
};

/// Rate-limited servo surrogate tasks.
///
/// Env A (tracking): follow a reference drawn from the held-out corpus
/// split.  Env B (reach-hold): reach a synergy posture, hold it within an
/// infinity-norm tolerance for `hold_steps`, collect the bonus, and get a
/// freshly sampled goal.
class ToyEnv {
 public:
  ToyEnv() = default;

  /// Env A: `corpus` is the full corpus; only the trailing `holdout_fraction`
  /// is kept as the reference pool (train split never leaks into tracking).
  static ToyEnv Tracking(EnvSpec spec, const MotionSequence& corpus,
                         double holdout_fraction = 0.1) {
    spec.task = TaskKind::kTracking;
    spec.Validate();
    if (corpus.dof != spec.dof) {
      throw std::invalid_argument("corpus dof does not match env dof");
    }
    ToyEnv env;
    env.spec_ = spec;
    env.holdout_ = corpus.Slice(corpus.HoldoutStart(holdout_fraction),
                                corpus.frames());
    if (env.holdout_.frames() < 2) {
      throw std::invalid_argument("holdout reference too short");
    }
    return env;
  }

  /// Env B: goals sampled from the synergy posture distribution.
  static ToyEnv ReachHold(EnvSpec spec, const SynergyGenerator& gen) {
    spec.task = TaskKind::kReachHold;
    spec.Validate();
    if (gen.dof != spec.dof) {
      throw std::invalid_argument("generator dof does not match env dof");
    }
    ToyEnv env;
    env.spec_ = spec;
    env.gen_ = gen;
    return env;
  }

  const EnvSpec& spec() const { return spec_; }
  const MotionSequence& holdout() const { return holdout_; }

  EnvState Reset(uint64_t seed) const {
    EnvState s;
    s.seed = seed;
    s.q.resize(static_cast<size_t>(spec_.dof));
    if (spec_.task == TaskKind::kTracking) {
      Rng rng(Rng::DeriveSeed(seed, 0x726566));  // "ref"
      const int64_t max_start =
          std::max<int64_t>(0, holdout_.frames() - spec_.episode_steps - 1);
      s.ref_start = static_cast<int64_t>(
          rng.uniform_int(static_cast<uint64_t>(max_start + 1)));
      const double* r0 = holdout_.frame(s.ref_start);
      for (int64_t j = 0; j < spec_.dof; ++j) {
        s.q[static_cast<size_t>(j)] = r0[j];
      }
    } else {
      const std::vector<double> w0 = DrawWeights(Rng::DeriveSeed(seed, 0x7130));
      s.q = PostureFromWeights(w0);
      s.goal_weights =
          WalkWeights(w0, Rng::DeriveSeed(seed, 0x676f616c, 0));  // "goal"
      s.goal = PostureFromWeights(s.goal_weights);
    }
    s.u_prev = s.q;
    return s;
  }

  /// Reference posture for Env A at environment step `t` (clamped past the
  /// end of the holdout).
  std::vector<double> Reference(const EnvState& state, int64_t t) const {
    const int64_t idx =
        std::min<int64_t>(state.ref_start + t, holdout_.frames() - 1);
    const double* f = holdout_.frame(idx);
    return std::vector<double>(f, f + spec_.dof);
  }

  /// q' = q + clip(u - q, +-v_max dt), elementwise.
  std::vector<double> NextQ(const std::vector<double>& q,
                            const std::vector<double>& u) const {
    const double limit = spec_.v_max * spec_.dt;
    std::vector<double> next(q.size());
    for (size_t j = 0; j < q.size(); ++j) {
      next[j] = q[j] + std::clamp(u[j] - q[j], -limit, limit);
    }
    return next;
  }

  /// Whether applying u in `state` completes a hold (Env B success).
  bool WouldSucceed(const EnvState& state, const std::vector<double>& u) const {
    if (spec_.task != TaskKind::kReachHold) return false;
    const std::vector<double> next = NextQ(state.q, u);
    return InTolerance(next, state.goal) &&
           state.hold + 1 >= spec_.hold_steps;
  }

  /// Stage cost of commanding u from `state` (before advancing it).
  double Cost(const EnvState& state, const std::vector<double>& u) const {
    CheckAction(u);
    double effort = 0.0;
    for (int64_t j = 0; j < spec_.dof; ++j) {
      const double d = u[static_cast<size_t>(j)] -
                       state.u_prev[static_cast<size_t>(j)];
      effort += d * d;
    }
    if (spec_.task == TaskKind::kTracking) {
      const std::vector<double> r = Reference(state, state.step);
      double track = 0.0;
      for (int64_t j = 0; j < spec_.dof; ++j) {
        const double d = state.q[static_cast<size_t>(j)] -
                         r[static_cast<size_t>(j)];
        track += d * d;
      }
      return spec_.w_track * track + spec_.w_effort * effort;
    }
    double goal_sq = 0.0;
    for (int64_t j = 0; j < spec_.dof; ++j) {
      const double d = state.q[static_cast<size_t>(j)] -
                       state.goal[static_cast<size_t>(j)];
      goal_sq += d * d;
    }
    double cost = spec_.w_goal * goal_sq + spec_.w_effort * effort;
    if (WouldSucceed(state, u)) cost -= spec_.success_bonus;
    return cost;
  }

  EnvState Step(const EnvState& state, const std::vector<double>& u) const {
    CheckAction(u);
    EnvState next = state;
    next.q = NextQ(state.q, u);
    next.u_prev = u;
    next.step = state.step + 1;
    if (spec_.task == TaskKind::kReachHold) {
      if (InTolerance(next.q, state.goal)) {
        next.hold = state.hold + 1;
      } else {
        next.hold = 0;
      }
      if (next.hold >= spec_.hold_steps) {
        next.successes = state.successes + 1;
        next.hold = 0;
        // Fresh nearby goal, deterministic in (reset seed, success count).
        next.goal_weights = WalkWeights(
            state.goal_weights,
            Rng::DeriveSeed(state.seed, 0x676f616c,
                            static_cast<uint64_t>(next.successes)));
        next.goal = PostureFromWeights(next.goal_weights);
      }
    }
    return next;
  }

  /// Uniform synergy weights in [-1, 1]^B.
  std::vector<double> DrawWeights(uint64_t seed) const {
    Rng rng(seed);
    std::vector<double> weights(static_cast<size_t>(gen_.n_synergies));
    for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
    return weights;
  }

  /// One local goal move: weights plus U(-goal_step, goal_step) per synergy,
  /// clamped to the corpus weight range.
  std::vector<double> WalkWeights(const std::vector<double>& weights,
                                  uint64_t seed) const {
    Rng rng(seed);
    std::vector<double> next(weights.size());
    for (size_t b = 0; b < weights.size(); ++b) {
      next[b] = std::clamp(
          weights[b] + rng.uniform(-spec_.goal_step, spec_.goal_step), -1.0,
          1.0);
    }
    return next;
  }

  /// Posture = couplings applied to synergy weights, clipped like the corpus.
  std::vector<double> PostureFromWeights(const std::vector<double>& weights) const {
    std::vector<double> posture(static_cast<size_t>(spec_.dof), 0.0);
    for (int64_t j = 0; j < spec_.dof; ++j) {
      double acc = 0.0;
      for (int64_t b = 0; b < gen_.n_synergies; ++b) {
        acc += gen_.coupling[static_cast<size_t>(j * gen_.n_synergies + b)] *
               weights[static_cast<size_t>(b)];
      }
      posture[static_cast<size_t>(j)] = std::clamp(acc, -1.0, 1.0);
    }
    return posture;
  }

 private:
  bool InTolerance(const std::vector<double>& q,
                   const std::vector<double>& goal) const {
    for (size_t j = 0; j < q.size(); ++j) {
      if (std::abs(q[j] - goal[j]) >= spec_.hold_tol) return false;
    }
    return true;
  }

  void CheckAction(const std::vector<double>& u) const {
    if (static_cast<int64_t>(u.size()) != spec_.dof) {
      throw std::invalid_argument("action dimension mismatch");
    }
    for (double v : u) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite action component");
      }
    }
  }

  EnvSpec spec_;
  MotionSequence holdout_;  // Env A reference pool
  SynergyGenerator gen_;    // Env B posture sampler
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_ENV_TOY_ENV_HPP_
