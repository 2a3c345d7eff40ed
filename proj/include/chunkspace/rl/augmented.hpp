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

#ifndef CHUNKSPACE_RL_AUGMENTED_HPP_
#define CHUNKSPACE_RL_AUGMENTED_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/env/toy_env.hpp"
#include "chunkspace/model/chunk_model.hpp"

namespace chunkspace {

/// Decoder seam for the augmented MDP: maps (posture, code index) to the
/// first `chunk_rows` action rows.  Implementations must be thread-safe for
/// concurrent readers.
class CodeChunkDecoder {
 public:
  virtual ~CodeChunkDecoder() = default;
  virtual int64_t dof() const = 0;
  virtual int64_t codes() const = 0;       // K
  virtual int64_t chunk_rows() const = 0;  // n_c

  /// Row-major [chunk_rows, dof] actions in environment units.
  virtual std::vector<double> DecodeChunkRows(const std::vector<double>& q,
                                              int64_t code) const = 0;
};

/// CodeChunkDecoder backed by a trained ChunkModel: every latent slot is set
/// to the selected code and only query steps 0..n_c-1 are decoded (by the
/// causal mask those steps depend on slot 0 alone).
template <typename T>
class ModelCodeDecoder final : public CodeChunkDecoder {
 public:
  ModelCodeDecoder(const ChunkModel<T>* model, int64_t n_c)
      : model_(model), n_c_(n_c) {
    if (model == nullptr) {
      throw std::invalid_argument("ModelCodeDecoder requires a model");
    }
    if (model->cfg.quantization != Quantization::kVq) {
      throw std::invalid_argument("code decoding needs a vq model");
    }
    if (n_c < 1 || n_c > model->cfg.n) {
      throw std::invalid_argument("n_c must be in [1, n]");
    }
  }

  int64_t dof() const override { return model_->cfg.dof; }
  int64_t codes() const override { return model_->cfg.K; }
  int64_t chunk_rows() const override { return n_c_; }

  std::vector<double> DecodeChunkRows(const std::vector<double>& q,
                                      int64_t code) const override {
    const ModelConfig& cfg = model_->cfg;
    if (code < 0 || code >= cfg.K) {
      throw std::out_of_range("code index out of range");
    }
    if (static_cast<int64_t>(q.size()) != cfg.dof) {
      throw std::invalid_argument("posture dof mismatch");
    }
    std::vector<T> q0(static_cast<size_t>(cfg.dof));
    for (int64_t j = 0; j < cfg.dof; ++j) {
      q0[static_cast<size_t>(j)] =
          static_cast<T>(model_->norm.Apply(q[static_cast<size_t>(j)], j));
    }
    LatentSeq<T> seq;
    seq.indices.assign(static_cast<size_t>(cfg.m), code);
    std::vector<int64_t> steps(static_cast<size_t>(n_c_));
    for (int64_t s = 0; s < n_c_; ++s) steps[static_cast<size_t>(s)] = s;
    const Tensor<T> out = model_->Decode(q0, seq, steps);
    std::vector<double> rows(static_cast<size_t>(n_c_ * cfg.dof));
    for (int64_t s = 0; s < n_c_; ++s) {
      for (int64_t j = 0; j < cfg.dof; ++j) {
        rows[static_cast<size_t>(s * cfg.dof + j)] =
            model_->norm.Invert(static_cast<double>(out.at(s, j)), j);
      }
    }
    return rows;
  }

 private:
  const ChunkModel<T>* model_;
  int64_t n_c_;
};

/// Wrapper configuration for the chunk-selection MDP.
struct RLConfig {
  int64_t n_c = 10;             // env steps per selected chunk (n/m)
  double residual_bound = 0.1;  // per-component |delta| cap, env units
  double select_bound = 0.5;    // policy-side squash range for u_s

  void Validate() const {
    if (n_c < 1) throw std::invalid_argument("n_c must be >= 1");
    if (residual_bound < 0.0 || select_bound <= 0.0) {
      throw std::invalid_argument("action bounds must be positive");
    }
  }
};

/// Augmented MDP state: the env state, the active chunk with its start step,
/// and the chunk-selection accumulator.
struct AugmentedState {
  EnvState x;
  std::vector<double> chunk;  // [n_c, dof] row-major feedforward actions
  int64_t t_a = 0;            // env step at which chunk row 0 applies
  std::vector<double> x_s;    // [K] selection accumulator
  int64_t t = 0;              // current env step (mirrors x.step)
};

/// Augmented action: per-step residual plus the chunk-selection action.
/// Both are consumed as-is; policy-side squashing happens in the adapter.
struct AugmentedAction {
  std::vector<double> delta;  // [dof]
  std::vector<double> u_s;    // [K]
};

/// Env observation shared by the raw and chunked policies:
/// [q (D); target (D); u_prev (D)] where target is the Env A reference at the
/// current step or the Env B goal.
inline std::vector<double> EnvObservation(const ToyEnv& env,
                                          const EnvState& state) {
  const int64_t d = env.spec().dof;
  std::vector<double> obs;
  obs.reserve(static_cast<size_t>(3 * d));
  obs.insert(obs.end(), state.q.begin(), state.q.end());
  if (env.spec().task == TaskKind::kTracking) {
    const std::vector<double> r = env.Reference(state, state.step);
    obs.insert(obs.end(), r.begin(), r.end());
  } else {
    obs.insert(obs.end(), state.goal.begin(), state.goal.end());
  }
  obs.insert(obs.end(), state.u_prev.begin(), state.u_prev.end());
  return obs;
}

/// The chunk-selection MDP around a ToyEnv: feedforward from the active
/// chunk, residual corrections, and accumulator-triggered chunk updates.
class AugmentedEnv {
 public:
  AugmentedEnv(const ToyEnv* env, const CodeChunkDecoder* decoder,
               RLConfig cfg)
      : env_(env), decoder_(decoder), cfg_(cfg) {
    cfg_.Validate();
    if (env_ == nullptr || decoder_ == nullptr) {
      throw std::invalid_argument("augmented env needs env and decoder");
    }
    if (decoder_->dof() != env_->spec().dof) {
      throw std::invalid_argument("decoder/env dof mismatch");
    }
    if (decoder_->chunk_rows() != cfg_.n_c) {
      throw std::invalid_argument("decoder chunk_rows must equal n_c");
    }
  }

  const ToyEnv& env() const { return *env_; }
  const RLConfig& config() const { return cfg_; }
  int64_t dof() const { return env_->spec().dof; }
  int64_t codes() const { return decoder_->codes(); }
  int64_t obs_dim() const { return 4 * dof() + codes(); }

  /// Initial state: env reset, x_s ~ Uniform(0,1) elementwise, and a neutral
  /// hold-posture chunk (every row = q0) so the feedforward is defined before
  /// the first trigger.
  AugmentedState Reset(uint64_t seed) const {
    AugmentedState s;
    s.x = env_->Reset(seed);
    s.t = s.x.step;
    s.t_a = s.t;
    const int64_t d = dof();
    s.chunk.resize(static_cast<size_t>(cfg_.n_c * d));
    for (int64_t r = 0; r < cfg_.n_c; ++r) {
      for (int64_t j = 0; j < d; ++j) {
        s.chunk[static_cast<size_t>(r * d + j)] =
            s.x.q[static_cast<size_t>(j)];
      }
    }
    Rng rng(Rng::DeriveSeed(seed, 0x7873));  // "xs"
    s.x_s.resize(static_cast<size_t>(codes()));
    for (double& v : s.x_s) v = rng.uniform();
    return s;
  }

  /// Feedforward a_t = A[t - t_a] while the chunk is active, else the held
  /// last row.
  std::vector<double> Feedforward(const AugmentedState& s) const {
    const int64_t d = dof();
    int64_t row = s.t - s.t_a;
    if (row < 0 || row >= cfg_.n_c) row = cfg_.n_c - 1;
    const auto begin = s.chunk.begin() + static_cast<ptrdiff_t>(row * d);
    return std::vector<double>(begin, begin + static_cast<ptrdiff_t>(d));
  }

  struct StepResult {
    AugmentedState next;
    double cost = 0.0;
    bool triggered = false;
    int64_t selected_code = -1;
  };

  /// One augmented step.  `rng` is consumed only on trigger (K uniforms for
  /// the x_s reset, in index order), keeping the wrapper a deterministic
  /// function of (state, action, RNG stream).
  StepResult Step(const AugmentedState& s, const AugmentedAction& a,
                  Rng& rng) const {
    const int64_t d = dof();
    const int64_t k = codes();
    if (static_cast<int64_t>(a.delta.size()) != d ||
        static_cast<int64_t>(a.u_s.size()) != k) {
      throw std::invalid_argument("augmented action shape mismatch");
    }
    for (double v : a.delta) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite delta");
    }
    for (double v : a.u_s) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite u_s");
    }
    // The decode anchor is the pre-step posture: a chunk starting at t+1 was
    // trained with exactly this alignment (anchor frame, then actions).
    const std::vector<double> q_entry = s.x.q;

    std::vector<double> u = Feedforward(s);
    for (int64_t j = 0; j < d; ++j) {
      const double delta =
          std::clamp(a.delta[static_cast<size_t>(j)], -cfg_.residual_bound,
                     cfg_.residual_bound);
      u[static_cast<size_t>(j)] += delta;
    }

    StepResult result;
    result.cost = env_->Cost(s.x, u);
    result.next.x = env_->Step(s.x, u);
    result.next.t = s.t + 1;

    std::vector<double> pref(static_cast<size_t>(k));
    double best = -std::numeric_limits<double>::infinity();
    int64_t best_idx = 0;
    for (int64_t i = 0; i < k; ++i) {
      pref[static_cast<size_t>(i)] =
          s.x_s[static_cast<size_t>(i)] + a.u_s[static_cast<size_t>(i)];
      if (pref[static_cast<size_t>(i)] > best) {
        best = pref[static_cast<size_t>(i)];
        best_idx = i;
      }
    }
    result.triggered = best > 1.0;
    if (result.triggered) {
      result.selected_code = best_idx;
      result.next.chunk = decoder_->DecodeChunkRows(q_entry, best_idx);
      result.next.t_a = s.t + 1;
      result.next.x_s.resize(static_cast<size_t>(k));
      for (double& v : result.next.x_s) v = rng.uniform();
    } else {
      result.next.chunk = s.chunk;
      result.next.t_a = s.t_a;
      result.next.x_s = pref;
    }
    return result;
  }

  /// Observation: [env observation (3D); feedforward a_t (D); x_s (K)].
  std::vector<double> Observe(const AugmentedState& s) const {
    std::vector<double> obs = EnvObservation(*env_, s.x);
    const std::vector<double> ff = Feedforward(s);
    obs.insert(obs.end(), ff.begin(), ff.end());
    obs.insert(obs.end(), s.x_s.begin(), s.x_s.end());
    return obs;
  }

 private:
  const ToyEnv* env_;
  const CodeChunkDecoder* decoder_;
  RLConfig cfg_;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_RL_AUGMENTED_HPP_
