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

#ifndef CHUNKSPACE_CORPUS_MOTION_HPP_
#define CHUNKSPACE_CORPUS_MOTION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace chunkspace {

/// A time-indexed sequence of joint-position frames, sampled at rate_hz.
/// Frames are stored row-major: frame t occupies data[t*dof .. t*dof+dof).
struct MotionSequence {
  double rate_hz = 0.0;
  int64_t dof = 0;
  std::vector<double> data;

  int64_t frames() const {
    return dof == 0 ? 0 : static_cast<int64_t>(data.size()) / dof;
  }

  double* frame(int64_t t) { return data.data() + t * dof; }
  const double* frame(int64_t t) const { return data.data() + t * dof; }

  void Validate() const {
    if (rate_hz <= 0.0) throw std::invalid_argument("rate_hz must be positive");
    if (dof < 1) throw std::invalid_argument("dof must be >= 1");
    if (frames() < 1) throw std::invalid_argument("sequence has no frames");
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("sequence contains non-finite values");
      }
    }
  }

  /// Splits off the trailing fraction (by frame count) as a held-out range.
  /// Returns the first held-out frame index.
  int64_t HoldoutStart(double holdout_fraction = 0.1) const {
    const int64_t t = frames();
    int64_t start = t - static_cast<int64_t>(std::floor(t * holdout_fraction));
    if (start < 1) start = 1;
    if (start > t) start = t;
    return start;
  }

  MotionSequence Slice(int64_t begin, int64_t end) const {
    MotionSequence out;
    out.rate_hz = rate_hz;
    out.dof = dof;
    out.data.assign(data.begin() + begin * dof, data.begin() + end * dof);
    return out;
  }
};

/// Per-joint affine map onto [-1, 1]:  normalized = (x - offset) / scale.
struct NormalizationStats {
  std::vector<double> offset;
  std::vector<double> scale;

  double Apply(double x, int64_t joint) const {
    return (x - offset[joint]) / scale[joint];
  }
  double Invert(double x, int64_t joint) const {
    return x * scale[joint] + offset[joint];
  }
};

/// Min/max statistics over a sequence.  A constant joint gets scale 1 and
/// offset equal to the constant, so apply/invert stay exact inverses.
inline NormalizationStats ComputeNormalization(const MotionSequence& seq) {
  if (seq.frames() < 2) {
    throw std::invalid_argument("normalization needs at least 2 frames");
  }
  const int64_t d = seq.dof;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (int64_t t = 0; t < seq.frames(); ++t) {
    const double* f = seq.frame(t);
    for (int64_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], f[j]);
      hi[j] = std::max(hi[j], f[j]);
    }
  }
  NormalizationStats stats;
  stats.offset.resize(d);
  stats.scale.resize(d);
  for (int64_t j = 0; j < d; ++j) {
    if (hi[j] == lo[j]) {
      stats.offset[j] = lo[j];
      stats.scale[j] = 1.0;
    } else {
      stats.offset[j] = 0.5 * (hi[j] + lo[j]);
      stats.scale[j] = 0.5 * (hi[j] - lo[j]);
    }
  }
  return stats;
}

inline MotionSequence ApplyNormalization(const MotionSequence& seq,
                                         const NormalizationStats& stats) {
  MotionSequence out = seq;
  for (int64_t t = 0; t < out.frames(); ++t) {
    double* f = out.frame(t);
    for (int64_t j = 0; j < out.dof; ++j) f[j] = stats.Apply(f[j], j);
  }
  return out;
}

inline MotionSequence InvertNormalization(const MotionSequence& seq,
                                          const NormalizationStats& stats) {
  MotionSequence out = seq;
  for (int64_t t = 0; t < out.frames(); ++t) {
    double* f = out.frame(t);
    for (int64_t j = 0; j < out.dof; ++j) f[j] = stats.Invert(f[j], j);
  }
  return out;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORPUS_MOTION_HPP_
