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

#ifndef CHUNKSPACE_MPC_PLAN_HPP_
#define CHUNKSPACE_MPC_PLAN_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/spline/spline.hpp"

namespace chunkspace {

enum class PlannerMode { kLatentVq, kLatentKlSpline, kBaselineSpline };

inline PlannerMode ParsePlannerMode(const std::string& name) {
  if (name == "latent_vq") return PlannerMode::kLatentVq;
  if (name == "latent_kl_spline") return PlannerMode::kLatentKlSpline;
  if (name == "baseline_spline") return PlannerMode::kBaselineSpline;
  throw std::invalid_argument("unknown planner mode: " + name);
}

inline const char* PlannerModeName(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::kLatentVq: return "latent_vq";
    case PlannerMode::kLatentKlSpline: return "latent_kl_spline";
    case PlannerMode::kBaselineSpline: return "baseline_spline";
  }
  return "?";
}

/// One MPC candidate: latent code indices (vq mode) or a spline through the
/// continuous latent space (kl mode), the additive noise spline, the plain
/// action spline (baseline mode), and the decoder anchor.
struct Plan {
  std::vector<int64_t> latents;  // [m] code indices (latent_vq)
  Spline noise;                  // additive noise, all DoFs
  Spline plain;                  // action spline (baseline mode)
  Spline latent_spline;          // latent-space spline (latent_kl_spline)
  std::vector<double> anchor_q;  // q_t used as decoder conditioning
  double anchor_time = 0.0;      // planner-clock time of the anchor
};

struct PlannerConfig {
  PlannerMode mode = PlannerMode::kLatentVq;
  int64_t n_traj = 40;      // N candidates per planner step
  double flip_prob = 0.1;   // p
  // Noise-knot stds, tuned separately per algorithm (the latent modes only
  // need fine offset corrections on top of the decoded chunk, while the
  // baseline's spline is its entire action source).
  double sigma = 0.005;          // latent modes
  double sigma_baseline = 0.01;  // baseline_spline mode
  double horizon_s = 1.0;        // rollout lookahead
  int64_t noise_knots = 4;       // P
  SplineInterpolation interpolation = SplineInterpolation::kLinear;
  double sigma_z = 0.3;       // latent-knot std (latent_kl_spline)
  int64_t latent_knots = 4;   // latent spline knots (latent_kl_spline)
  uint64_t seed = 0;          // master sampling seed

  /// The noise std in effect for this config's mode.
  double EffectiveSigma() const {
    return mode == PlannerMode::kBaselineSpline ? sigma_baseline : sigma;
  }

  void Validate() const {
    if (n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
    if (flip_prob < 0.0 || flip_prob > 1.0) {
      throw std::invalid_argument("flip_prob must be in [0, 1]");
    }
    if (sigma < 0.0 || sigma_baseline < 0.0 || sigma_z < 0.0) {
      throw std::invalid_argument("sampling stds must be >= 0");
    }
    if (horizon_s <= 0.0) throw std::invalid_argument("horizon must be > 0");
    if (noise_knots < 1 || latent_knots < 1) {
      throw std::invalid_argument("spline knot counts must be >= 1");
    }
  }
};

/// Zero spline with knot times following the chunk time map
/// t(tau) = tau * n / P timesteps, converted to seconds.
inline Spline KnotGrid(int64_t knots, int64_t dims, int64_t n, double dt,
                       SplineInterpolation mode) {
  std::vector<double> times(static_cast<size_t>(knots));
  for (int64_t tau = 0; tau < knots; ++tau) {
    times[static_cast<size_t>(tau)] =
        static_cast<double>(tau * n) / static_cast<double>(knots) * dt;
  }
  return Spline(std::move(times),
                std::vector<double>(static_cast<size_t>(knots * dims), 0.0),
                dims, mode);
}

/// Decoder seam used by the planner.  Implementations must be safe for
/// unlimited concurrent callers (candidate rollouts share one decoder).
class ChunkDecoder {
 public:
  virtual ~ChunkDecoder() = default;
  virtual int64_t dof() const = 0;
  virtual int64_t chunk_steps() const = 0;   // n
  virtual int64_t latent_slots() const = 0;  // m
  virtual int64_t codes() const = 0;         // K
  virtual int64_t latent_dim() const = 0;    // continuous latent width

  /// Full-chunk decode from code indices, in environment units: [n * dof].
  virtual std::vector<double> DecodeFromCodes(
      const std::vector<double>& anchor_q,
      const std::vector<int64_t>& indices) const = 0;

  /// Full-chunk decode from continuous latent vectors [m * latent_dim].
  virtual std::vector<double> DecodeFromLatents(
      const std::vector<double>& anchor_q,
      const std::vector<double>& values) const = 0;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_MPC_PLAN_HPP_
