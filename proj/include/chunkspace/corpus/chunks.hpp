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

#ifndef CHUNKSPACE_CORPUS_CHUNKS_HPP_
#define CHUNKSPACE_CORPUS_CHUNKS_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chunkspace/corpus/motion.hpp"

namespace chunkspace {

/// One training sample: the conditioning posture and the action chunk that
/// follows it.  `q0` is frame i and `actions` holds frames i+1 .. i+n
/// flattened row-major as [n, dof].
struct ChunkSample {
  std::vector<double> q0;       // [dof]
  std::vector<double> actions;  // [n * dof]
};

/// Number of chunks a sliding window of length n with the given stride
/// extracts from a sequence of T frames: floor((T - n - 1) / stride) + 1,
/// or 0 when T < n + 1.
inline int64_t ChunkCount(int64_t frames, int64_t n, int64_t stride) {
  if (frames < n + 1) return 0;
  return (frames - n - 1) / stride + 1;
}

/// Extracts overlapping (q0, action-chunk) samples.  Throws when the
/// sequence is too short to produce a single chunk.
inline std::vector<ChunkSample> ExtractChunks(const MotionSequence& seq,
                                              int64_t n, int64_t stride) {
  if (n < 1 || stride < 1) {
    throw std::invalid_argument("chunk length and stride must be positive");
  }
  const int64_t count = ChunkCount(seq.frames(), n, stride);
  if (count == 0) {
    throw std::invalid_argument(
        "sequence too short: need at least n+1 frames for one chunk");
  }
  std::vector<ChunkSample> out(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    const int64_t start = i * stride;
    ChunkSample& s = out[static_cast<size_t>(i)];
    const double* q = seq.frame(start);
    s.q0.assign(q, q + seq.dof);
    s.actions.resize(static_cast<size_t>(n * seq.dof));
    for (int64_t t = 0; t < n; ++t) {
      const double* f = seq.frame(start + 1 + t);
      for (int64_t j = 0; j < seq.dof; ++j) {
        s.actions[static_cast<size_t>(t * seq.dof + j)] = f[j];
      }
    }
  }
  return out;
}

/// Train/validation split over chunk samples: the validation set is the
/// last `val_fraction` of samples (at least one sample on each side when
/// possible).
struct ChunkSplit {
  std::vector<ChunkSample> train;
  std::vector<ChunkSample> val;
};

inline ChunkSplit SplitChunks(std::vector<ChunkSample> samples,
                              double val_fraction = 0.1) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("val_fraction must be in [0, 1)");
  }
  ChunkSplit split;
  const int64_t total = static_cast<int64_t>(samples.size());
  int64_t n_val = static_cast<int64_t>(total * val_fraction);
  if (val_fraction > 0.0 && n_val == 0 && total > 1) n_val = 1;
  const int64_t n_train = total - n_val;
  split.train.assign(samples.begin(), samples.begin() + n_train);
  split.val.assign(samples.begin() + n_train, samples.end());
  return split;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORPUS_CHUNKS_HPP_
