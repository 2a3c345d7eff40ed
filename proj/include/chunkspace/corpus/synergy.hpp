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

#ifndef CHUNKSPACE_CORPUS_SYNERGY_HPP_
#define CHUNKSPACE_CORPUS_SYNERGY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/corpus/motion.hpp"

namespace chunkspace {

/// Synthetic motion source: D coupled joints driven by B < D latent
/// "synergy" channels.  Each channel follows a piecewise minimum-jerk
/// trajectory between random waypoints, so joints move in coordinated
/// low-rank patterns.
struct SynergyGenerator {
  uint64_t seed = 0;
  int64_t dof = 11;
  int64_t n_synergies = 3;
  std::vector<double> coupling;  // [dof x n_synergies], unit-norm columns
  double segment_len_min_s = 0.5;
  double segment_len_max_s = 2.0;

  /// Random coupling matrix with unit-L2 columns, derived from the seed.
  static SynergyGenerator Random(uint64_t seed, int64_t dof, int64_t synergies,
                                 double seg_min_s = 0.5,
                                 double seg_max_s = 2.0) {
    if (synergies >= dof) {
      throw std::invalid_argument("n_synergies must be < dof");
    }
    SynergyGenerator gen;
    gen.seed = seed;
    gen.dof = dof;
    gen.n_synergies = synergies;
    gen.segment_len_min_s = seg_min_s;
    gen.segment_len_max_s = seg_max_s;
    gen.coupling.assign(static_cast<size_t>(dof * synergies), 0.0);
    Rng rng(Rng::DeriveSeed(seed, 0x636f7570 /* "coup" */));
    for (int64_t b = 0; b < synergies; ++b) {
      double norm2 = 0.0;
      for (int64_t j = 0; j < dof; ++j) {
        const double v = rng.normal();
        gen.coupling[j * synergies + b] = v;
        norm2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (int64_t j = 0; j < dof; ++j) gen.coupling[j * synergies + b] *= inv;
    }
    return gen;
  }
};

namespace detail {

// Minimum-jerk blend: zero velocity and acceleration at both ends.
inline double MinJerk(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

}  // namespace detail

/// Generates the corpus without the final clip to [-1, 1].  The raw frames
/// are exact linear images of the B-dimensional latent path, so their rank
/// is at most B.
inline MotionSequence GenerateCorpusUnclipped(const SynergyGenerator& gen,
                                              double duration_s,
                                              double rate_hz) {
  if (duration_s <= 0.0) throw std::invalid_argument("duration_s must be > 0");
  if (rate_hz <= 0.0) throw std::invalid_argument("rate_hz must be > 0");
  if (gen.coupling.size() !=
      static_cast<size_t>(gen.dof * gen.n_synergies)) {
    throw std::invalid_argument("coupling matrix has wrong size");
  }

  const int64_t frames = static_cast<int64_t>(std::llround(duration_s * rate_hz));
  const int64_t d = gen.dof;
  const int64_t b = gen.n_synergies;

  MotionSequence seq;
  seq.rate_hz = rate_hz;
  seq.dof = d;
  seq.data.assign(static_cast<size_t>(frames * d), 0.0);

  Rng rng(Rng::DeriveSeed(gen.seed, 0x74726a /* "trj" */));

  // Waypoint schedule shared by all synergy channels.
  std::vector<double> way_prev(b), way_next(b);
  for (int64_t k = 0; k < b; ++k) way_prev[k] = rng.uniform(-1.0, 1.0);
  for (int64_t k = 0; k < b; ++k) way_next[k] = rng.uniform(-1.0, 1.0);
  double seg_start = 0.0;
  double seg_len = rng.uniform(gen.segment_len_min_s, gen.segment_len_max_s);

  std::vector<double> s(b);
  for (int64_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / rate_hz;
    while (time >= seg_start + seg_len) {
      seg_start += seg_len;
      seg_len = rng.uniform(gen.segment_len_min_s, gen.segment_len_max_s);
      way_prev = way_next;
      for (int64_t k = 0; k < b; ++k) way_next[k] = rng.uniform(-1.0, 1.0);
    }
    const double alpha = detail::MinJerk((time - seg_start) / seg_len);
    for (int64_t k = 0; k < b; ++k) {
      s[k] = way_prev[k] + (way_next[k] - way_prev[k]) * alpha;
    }
    double* frame = seq.frame(t);
    for (int64_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int64_t k = 0; k < b; ++k) acc += gen.coupling[j * b + k] * s[k];
      frame[j] = acc;
    }
  }
  return seq;
}

/// q(t) = clip(C * s(t), -1, 1) with s a piecewise minimum-jerk latent path.
/// Deterministic given gen.seed.
inline MotionSequence GenerateCorpus(const SynergyGenerator& gen,
                                     double duration_s, double rate_hz) {
  MotionSequence seq = GenerateCorpusUnclipped(gen, duration_s, rate_hz);
  for (double& v : seq.data) v = std::clamp(v, -1.0, 1.0);
  return seq;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORPUS_SYNERGY_HPP_
