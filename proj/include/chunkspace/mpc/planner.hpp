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

#ifndef CHUNKSPACE_MPC_PLANNER_HPP_
#define CHUNKSPACE_MPC_PLANNER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/core/threading.hpp"
#include "chunkspace/env/toy_env.hpp"
#include "chunkspace/model/chunk_model.hpp"
#include "chunkspace/mpc/plan.hpp"
#include "chunkspace/spline/spline.hpp"

namespace chunkspace {

/// ChunkDecoder backed by a trained ChunkModel.  Conditioning is normalized
/// on the way in and decoded actions are mapped back to environment units.
template <typename T>
class ModelDecoder final : public ChunkDecoder {
 public:
  explicit ModelDecoder(const ChunkModel<T>* model) : model_(model) {
    if (model == nullptr) {
      throw std::invalid_argument("ModelDecoder requires a model");
    }
  }

  int64_t dof() const override { return model_->cfg.dof; }
  int64_t chunk_steps() const override { return model_->cfg.n; }
  int64_t latent_slots() const override { return model_->cfg.m; }
  int64_t codes() const override {
    return model_->cfg.quantization == Quantization::kVq ? model_->cfg.K : 0;
  }
  int64_t latent_dim() const override { return model_->cfg.latent_dim(); }

  std::vector<double> DecodeFromCodes(
      const std::vector<double>& anchor_q,
      const std::vector<int64_t>& indices) const override {
    LatentSeq<T> seq;
    seq.indices = indices;
    return DecodeSeq(anchor_q, seq);
  }

  std::vector<double> DecodeFromLatents(
      const std::vector<double>& anchor_q,
      const std::vector<double>& values) const override {
    const ModelConfig& cfg = model_->cfg;
    LatentSeq<T> seq;
    seq.values = Tensor<T>({cfg.m, cfg.latent_dim()});
    if (static_cast<int64_t>(values.size()) != seq.values.numel()) {
      throw std::invalid_argument("latent value count mismatch");
    }
    for (int64_t i = 0; i < seq.values.numel(); ++i) {
      seq.values[static_cast<size_t>(i)] =
          static_cast<T>(values[static_cast<size_t>(i)]);
    }
    return DecodeSeq(anchor_q, seq);
  }

 private:
  std::vector<double> DecodeSeq(const std::vector<double>& anchor_q,
                                const LatentSeq<T>& seq) const {
    const ModelConfig& cfg = model_->cfg;
    if (static_cast<int64_t>(anchor_q.size()) != cfg.dof) {
      throw std::invalid_argument("anchor_q dof mismatch");
    }
    std::vector<T> q0(static_cast<size_t>(cfg.dof));
    for (int64_t j = 0; j < cfg.dof; ++j) {
      q0[static_cast<size_t>(j)] = static_cast<T>(
          model_->norm.Apply(anchor_q[static_cast<size_t>(j)], j));
    }
    const Tensor<T> out =
        model_->Decode(q0, seq, ChunkModel<T>::AllSteps(cfg.n));
    std::vector<double> actions(static_cast<size_t>(cfg.n * cfg.dof));
    for (int64_t s = 0; s < cfg.n; ++s) {
      for (int64_t j = 0; j < cfg.dof; ++j) {
        actions[static_cast<size_t>(s * cfg.dof + j)] =
            model_->norm.Invert(static_cast<double>(out.at(s, j)), j);
      }
    }
    return actions;
  }

  const ChunkModel<T>* model_;
};

/// Per-candidate sampling trace, for distribution tests.
struct CandidateEvents {
  bool latents_modified = false;  // triggered the zero-centered noise redraw
  std::vector<uint8_t> flipped;   // per-slot resample events (vq mode)
};

/// Draws one candidate from the nominal plan.  RNG consumption order is part
/// of the determinism contract: per slot one uniform, plus one integer draw
/// when the slot resamples; then the noise knots; latent-spline knots (kl
/// mode) are drawn before the noise knots.
inline Plan SampleCandidate(const Plan& nominal, const PlannerConfig& cfg,
                            int64_t num_codes, Rng& rng,
                            CandidateEvents* events = nullptr) {
  Plan candidate = nominal;
  bool modified = false;
  if (cfg.mode == PlannerMode::kLatentVq) {
    if (events != nullptr) events->flipped.assign(nominal.latents.size(), 0);
    for (size_t k = 0; k < candidate.latents.size(); ++k) {
      if (rng.uniform() < cfg.flip_prob) {
        if (events != nullptr) events->flipped[k] = 1;
        const int64_t code = static_cast<int64_t>(
            rng.uniform_int(static_cast<uint64_t>(num_codes)));
        if (code != candidate.latents[k]) modified = true;
        candidate.latents[k] = code;
      }
    }
  } else if (cfg.mode == PlannerMode::kLatentKlSpline) {
    if (cfg.sigma_z > 0.0) {
      candidate.latent_spline = nominal.latent_spline.Perturb(cfg.sigma_z, rng);
      modified = true;
    }
  }
  candidate.noise = Spline::DrawNoise(nominal.noise,
                                      modified ? nullptr : &nominal.noise,
                                      cfg.EffectiveSigma(), rng);
  if (events != nullptr) events->latents_modified = modified;
  return candidate;
}

/// Candidates 0..N-1 from per-candidate streams derived from `step_seed`;
/// the unmodified nominal is appended as candidate N.
inline std::vector<Plan> SampleCandidates(
    const Plan& nominal, const PlannerConfig& cfg, int64_t num_codes,
    uint64_t step_seed, std::vector<CandidateEvents>* events = nullptr) {
  std::vector<Plan> plans(static_cast<size_t>(cfg.n_traj) + 1);
  if (events != nullptr) {
    events->assign(static_cast<size_t>(cfg.n_traj), CandidateEvents{});
  }
  for (int64_t i = 0; i < cfg.n_traj; ++i) {
    Rng rng(Rng::DeriveSeed(step_seed, static_cast<uint64_t>(i)));
    plans[static_cast<size_t>(i)] =
        SampleCandidate(nominal, cfg, num_codes, rng,
                        events != nullptr ? &(*events)[static_cast<size_t>(i)]
                                          : nullptr);
  }
  plans[static_cast<size_t>(cfg.n_traj)] = nominal;
  return plans;
}

/// Decodes the plan's action chunk in environment units, or returns an empty
/// vector for the baseline (spline-only) mode.  `dt` is the control period;
/// kl mode samples the latent spline at the slot times t(k) = k*n/m steps.
inline std::vector<double> DecodePlanActions(const ChunkDecoder* decoder,
                                             const Plan& plan,
                                             PlannerMode mode, double dt) {
  if (mode == PlannerMode::kBaselineSpline || decoder == nullptr) return {};
  if (mode == PlannerMode::kLatentVq) {
    return decoder->DecodeFromCodes(plan.anchor_q, plan.latents);
  }
  const int64_t m = decoder->latent_slots();
  const int64_t n = decoder->chunk_steps();
  const int64_t ld = decoder->latent_dim();
  std::vector<double> values(static_cast<size_t>(m * ld));
  for (int64_t k = 0; k < m; ++k) {
    const double t_k =
        static_cast<double>(k * n) / static_cast<double>(m) * dt;
    const std::vector<double> v = plan.latent_spline.Eval(t_k);
    for (int64_t e = 0; e < ld; ++e) {
      values[static_cast<size_t>(k * ld + e)] = v[static_cast<size_t>(e)];
    }
  }
  return decoder->DecodeFromLatents(plan.anchor_q, values);
}

/// Control at wall time `t` (planner clock).  The decoded chunk row is
/// indexed against plan.anchor_time — the moment the chunk's slot alignment
/// was last established — so the tape advances between slot rotations.  The
/// splines are kept shifted to `now` (the current planner step), so they are
/// evaluated at the offset from `now` instead.
inline std::vector<double> PlanControl(const Plan& plan,
                                       const std::vector<double>& actions,
                                       double t, double now,
                                       int64_t chunk_steps, double rate_hz,
                                       int64_t dof) {
  const double spline_rel = t - now;
  std::vector<double> u;
  if (!actions.empty()) {
    const double tape_rel = t - plan.anchor_time;
    int64_t step = static_cast<int64_t>(std::llround(tape_rel * rate_hz));
    if (step < 0) step = 0;
    if (step >= chunk_steps) step = chunk_steps - 1;
    u.assign(actions.begin() + static_cast<ptrdiff_t>(step * dof),
             actions.begin() + static_cast<ptrdiff_t>((step + 1) * dof));
  } else {
    u = plan.plain.Eval(spline_rel);
  }
  const std::vector<double> s = plan.noise.Eval(spline_rel);
  for (int64_t j = 0; j < dof; ++j) {
    u[static_cast<size_t>(j)] += s[static_cast<size_t>(j)];
  }
  return u;
}

/// Simulates `horizon/dt` steps from `start` applying the plan's control and
/// returns accumulated running cost plus a hold-still terminal cost.  A
/// non-finite state or cost disqualifies the candidate with +infinity.
inline double RolloutCost(const ToyEnv& env, const EnvState& start,
                          const Plan& plan, const std::vector<double>& actions,
                          const PlannerConfig& cfg, double now,
                          int64_t chunk_steps) {
  const EnvSpec& spec = env.spec();
  const double rate_hz = 1.0 / spec.dt;
  const int64_t steps =
      static_cast<int64_t>(std::llround(cfg.horizon_s / spec.dt));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  EnvState state = start;
  double total = 0.0;
  for (int64_t i = 0; i < steps; ++i) {
    const double t = now + static_cast<double>(i) * spec.dt;
    const std::vector<double> u =
        PlanControl(plan, actions, t, now, chunk_steps, rate_hz, spec.dof);
    const double c = env.Cost(state, u);
    if (!std::isfinite(c)) return kInf;
    total += c;
    state = env.Step(state, u);
    for (double q : state.q) {
      if (!std::isfinite(q)) return kInf;
    }
  }
  total += env.Cost(state, state.u_prev);
  return std::isfinite(total) ? total : kInf;
}

/// Per-step planner diagnostics.
struct StepReport {
  double selected_cost = 0.0;
  double nominal_cost = 0.0;  // cost of the time-shifted previous nominal
  int64_t selected_index = 0;
  bool all_infinite = false;
  int64_t rotations = 0;  // latent slot rotations applied this step
};

/// Predictive-sampling planner: keeps a nominal Plan, shifts it with wall
/// time, samples candidates around it, and executes the cheapest rollout.
class Planner {
 public:
  Planner(const ChunkDecoder* decoder, const ToyEnv* env, PlannerConfig cfg)
      : decoder_(decoder), env_(env), cfg_(cfg) {
    cfg_.Validate();
    if (env_ == nullptr) throw std::invalid_argument("planner needs an env");
    if (cfg_.mode != PlannerMode::kBaselineSpline && decoder_ == nullptr) {
      throw std::invalid_argument("latent planner modes need a decoder");
    }
    dof_ = env_->spec().dof;
    dt_ = env_->spec().dt;
    if (decoder_ != nullptr && decoder_->dof() != dof_) {
      throw std::invalid_argument("decoder/env dof mismatch");
    }
    chunk_steps_ = decoder_ != nullptr
                       ? decoder_->chunk_steps()
                       : static_cast<int64_t>(std::llround(cfg_.horizon_s / dt_));
    slots_ = decoder_ != nullptr ? decoder_->latent_slots() : 1;
    slot_duration_ =
        static_cast<double>(chunk_steps_) / static_cast<double>(slots_) * dt_;
  }

  /// Plans for the current state and returns the control to execute now.
  /// `elapsed_s` is wall time since the previous call (0 on the first).
  std::vector<double> Step(const EnvState& state, double elapsed_s,
                           StepReport* report = nullptr) {
    if (elapsed_s < 0.0) throw std::invalid_argument("elapsed_s must be >= 0");
    int64_t rotations = 0;
    bool fresh = false;
    if (!initialized_) {
      nominal_ = MakeInitialPlan();
      initialized_ = true;
      fresh = true;
    } else if (elapsed_s > 0.0) {
      rotations = ShiftNominal(elapsed_s);
    }
    time_ += elapsed_s;
    if (cfg_.mode == PlannerMode::kLatentVq) {
      // The decoded tape is aligned to the last slot boundary: the anchor
      // state and time move only when the slots rotate, so the executed
      // query step advances through the slot in between.
      if (fresh || rotations > 0) {
        nominal_.anchor_q = state.q;
        nominal_.anchor_time = time_ - slot_accum_;
      }
    } else {
      nominal_.anchor_q = state.q;
      nominal_.anchor_time = time_;
    }

    const uint64_t step_seed = Rng::DeriveSeed(
        cfg_.seed, 0x706c616e, static_cast<uint64_t>(steps_planned_));
    const int64_t num_codes = decoder_ != nullptr ? decoder_->codes() : 0;
    std::vector<Plan> plans =
        SampleCandidates(nominal_, cfg_, num_codes, step_seed);
    const int64_t total = static_cast<int64_t>(plans.size());
    std::vector<std::vector<double>> actions(static_cast<size_t>(total));
    std::vector<double> costs(static_cast<size_t>(total));
    ParallelFor(total, [&](int64_t i) {
      const size_t s = static_cast<size_t>(i);
      actions[s] = DecodePlanActions(decoder_, plans[s], cfg_.mode, dt_);
      costs[s] = RolloutCost(*env_, state, plans[s], actions[s], cfg_, time_,
                             chunk_steps_);
    });

    // Elitist argmin: ties keep the nominal, then the lowest index.
    const size_t nominal_idx = static_cast<size_t>(cfg_.n_traj);
    size_t best = nominal_idx;
    double best_cost = costs[nominal_idx];
    for (size_t i = 0; i < nominal_idx; ++i) {
      if (costs[i] < best_cost) {
        best = i;
        best_cost = costs[i];
      }
    }
    const bool all_infinite = !std::isfinite(best_cost);
    if (all_infinite) {
      best = nominal_idx;  // keep nominal, raise a warning
      ++warnings_;
    }
    if (report != nullptr) {
      report->selected_cost = costs[best];
      report->nominal_cost = costs[nominal_idx];
      report->selected_index = static_cast<int64_t>(best);
      report->all_infinite = all_infinite;
      report->rotations = rotations;
    }
    nominal_ = plans[best];
    ++steps_planned_;
    return PlanControl(nominal_, actions[best], time_, time_, chunk_steps_,
                       1.0 / dt_, dof_);
  }

  const Plan& nominal() const { return nominal_; }
  int64_t steps_planned() const { return steps_planned_; }
  int64_t warnings() const { return warnings_; }
  double slot_duration() const { return slot_duration_; }

 private:
  Plan MakeInitialPlan() const {
    Plan plan;
    plan.anchor_time = time_;
    plan.noise =
        KnotGrid(cfg_.noise_knots, dof_, chunk_steps_, dt_, cfg_.interpolation);
    plan.plain =
        KnotGrid(cfg_.noise_knots, dof_, chunk_steps_, dt_, cfg_.interpolation);
    if (cfg_.mode == PlannerMode::kLatentVq) {
      plan.latents.assign(static_cast<size_t>(slots_), 0);
    } else if (cfg_.mode == PlannerMode::kLatentKlSpline) {
      plan.latent_spline = KnotGrid(cfg_.latent_knots, decoder_->latent_dim(),
                                    chunk_steps_, dt_, cfg_.interpolation);
    }
    return plan;
  }

  int64_t ShiftNominal(double elapsed_s) {
    nominal_.noise = nominal_.noise.Shift(elapsed_s);
    nominal_.plain = nominal_.plain.Shift(elapsed_s);
    if (cfg_.mode == PlannerMode::kLatentKlSpline) {
      nominal_.latent_spline = nominal_.latent_spline.Shift(elapsed_s);
    }
    int64_t rotations = 0;
    if (cfg_.mode == PlannerMode::kLatentVq && !nominal_.latents.empty()) {
      slot_accum_ += elapsed_s;
      // Tolerance absorbs accumulated float error in dt sums.
      while (slot_accum_ + 1e-9 >= slot_duration_) {
        slot_accum_ -= slot_duration_;
        nominal_.latents.erase(nominal_.latents.begin());
        nominal_.latents.push_back(nominal_.latents.back());
        ++rotations;
      }
    }
    return rotations;
  }

  const ChunkDecoder* decoder_;
  const ToyEnv* env_;
  PlannerConfig cfg_;
  int64_t dof_ = 0;
  double dt_ = 0.0;
  int64_t chunk_steps_ = 0;
  int64_t slots_ = 0;
  double slot_duration_ = 0.0;
  Plan nominal_;
  bool initialized_ = false;
  double time_ = 0.0;
  double slot_accum_ = 0.0;
  int64_t steps_planned_ = 0;
  int64_t warnings_ = 0;
};

/// Whole-episode metrics for planner evaluation.
struct EpisodeStats {
  double episode_cost = 0.0;      // sum of true stage costs
  int64_t successes = 0;          // Env B success count
  double success_rate = 0.0;      // 1 if any success this episode
  double wall_ms_per_step = 0.0;  // planner compute only
  int64_t steps = 0;
};

inline EpisodeStats RunPlannedEpisode(const ChunkDecoder* decoder,
                                      const ToyEnv& env, PlannerConfig cfg,
                                      uint64_t env_seed,
                                      int64_t episode_steps) {
  Planner planner(decoder, &env, cfg);
  EnvState state = env.Reset(env_seed);
  EpisodeStats stats;
  std::chrono::duration<double, std::milli> planning{0};
  for (int64_t i = 0; i < episode_steps; ++i) {
    const double elapsed = i == 0 ? 0.0 : env.spec().dt;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> u = planner.Step(state, elapsed);
    planning += std::chrono::steady_clock::now() - t0;
    stats.episode_cost += env.Cost(state, u);
    state = env.Step(state, u);
  }
  stats.successes = state.successes;
  stats.success_rate = state.successes > 0 ? 1.0 : 0.0;
  stats.steps = episode_steps;
  stats.wall_ms_per_step =
      planning.count() / static_cast<double>(episode_steps);
  return stats;
}

/// One row of the planning-budget sweep.
struct SweepRow {
  std::string mode;
  int64_t n_traj = 0;
  uint64_t seed = 0;
  double episode_cost = 0.0;
  double success_rate = 0.0;
  double wall_ms_per_step = 0.0;
};

/// Runs episodes for every (mode, N, seed) combination.  Identical inputs
/// reproduce every column except wall_ms_per_step bit-for-bit.
inline std::vector<SweepRow> BudgetSweep(const ChunkDecoder* decoder,
                                         const ToyEnv& env,
                                         const PlannerConfig& base_cfg,
                                         const std::vector<PlannerMode>& modes,
                                         const std::vector<int64_t>& n_list,
                                         int64_t n_seeds,
                                         int64_t episode_steps) {
  std::vector<SweepRow> rows;
  for (PlannerMode mode : modes) {
    for (int64_t n_traj : n_list) {
      for (int64_t s = 0; s < n_seeds; ++s) {
        PlannerConfig cfg = base_cfg;
        cfg.mode = mode;
        cfg.n_traj = n_traj;
        cfg.seed = Rng::DeriveSeed(base_cfg.seed, 0x706c7277,
                                   static_cast<uint64_t>(s));  // "plrw"
        const uint64_t env_seed =
            Rng::DeriveSeed(base_cfg.seed, 0x656e7677,
                            static_cast<uint64_t>(s));  // "envw"
        const EpisodeStats stats =
            RunPlannedEpisode(decoder, env, cfg, env_seed, episode_steps);
        SweepRow row;
        row.mode = PlannerModeName(mode);
        row.n_traj = n_traj;
        row.seed = static_cast<uint64_t>(s);
        row.episode_cost = stats.episode_cost;
        row.success_rate = stats.success_rate;
        row.wall_ms_per_step = stats.wall_ms_per_step;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline void WriteSweepCsv(const std::vector<SweepRow>& rows,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "mode,n_traj,seed,episode_cost,success_rate,wall_ms_per_step\n";
  char buf[256];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%llu,%.12g,%.12g,%.6g\n",
                  row.mode.c_str(), static_cast<long long>(row.n_traj),
                  static_cast<unsigned long long>(row.seed), row.episode_cost,
                  row.success_rate, row.wall_ms_per_step);
    out << buf;
  }
  if (!out.good()) throw std::runtime_error("failed writing " + path);
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_MPC_PLANNER_HPP_
