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

// Synthetic corpus generation, CSV I/O, chunk extraction, normalization.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "chunkspace/corpus/chunks.hpp"
#include "chunkspace/corpus/csv.hpp"
#include "chunkspace/corpus/motion.hpp"
#include "chunkspace/corpus/synergy.hpp"

namespace chunkspace {
namespace {

namespace fs = std::filesystem;

std::string TempPath(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

// ---------------------------------------------------------------------------
// Synergy generator

TEST(Synergy, CouplingColumnsUnitNorm) {
  SynergyGenerator gen = SynergyGenerator::Random(7, 11, 3);
  for (int64_t b = 0; b < gen.n_synergies; ++b) {
    double norm2 = 0.0;
    for (int64_t j = 0; j < gen.dof; ++j) {
      norm2 += gen.coupling[static_cast<size_t>(j * gen.n_synergies + b)] *
               gen.coupling[static_cast<size_t>(j * gen.n_synergies + b)];
    }
    EXPECT_NEAR(norm2, 1.0, 1e-12);
  }
}

TEST(Synergy, RejectsTooManySynergies) {
  EXPECT_THROW(SynergyGenerator::Random(1, 3, 3), std::invalid_argument);
}

TEST(Synergy, CorpusShapeAndRange) {
  // seed=7, D=11, B=3, 60 s at 50 Hz -> 3000 frames, all values in [-1, 1].
  SynergyGenerator gen = SynergyGenerator::Random(7, 11, 3);
  MotionSequence seq = GenerateCorpus(gen, 60.0, 50.0);
  EXPECT_EQ(seq.frames(), 3000);
  EXPECT_EQ(seq.dof, 11);
  for (double v : seq.data) {
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Synergy, Deterministic) {
  SynergyGenerator gen = SynergyGenerator::Random(7, 11, 3);
  MotionSequence a = GenerateCorpus(gen, 10.0, 50.0);
  MotionSequence b = GenerateCorpus(gen, 10.0, 50.0);
  EXPECT_EQ(a.data, b.data);
  // A different seed produces a different corpus.
  SynergyGenerator gen2 = SynergyGenerator::Random(8, 11, 3);
  MotionSequence c = GenerateCorpus(gen2, 10.0, 50.0);
  EXPECT_NE(a.data, c.data);
}

// The unclipped frame matrix is an exact linear image of a B-dimensional
// latent path, so its numerical rank is at most B.  Rank is checked through
// the eigenvalues of the 11x11 Gram matrix (Jacobi iteration).
TEST(Synergy, UnclippedRankAtMostSynergyCount) {
  SynergyGenerator gen = SynergyGenerator::Random(7, 11, 3);
  MotionSequence seq = GenerateCorpusUnclipped(gen, 60.0, 50.0);
  const int64_t T = seq.frames();
  const int64_t D = seq.dof;
  std::vector<double> gram(static_cast<size_t>(D * D), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    const double* f = seq.frame(t);
    for (int64_t i = 0; i < D; ++i) {
      for (int64_t j = 0; j < D; ++j) {
        gram[static_cast<size_t>(i * D + j)] += f[i] * f[j];
      }
    }
  }
  // Jacobi eigenvalue iteration for the symmetric Gram matrix.
  std::vector<double> a = gram;
  const auto idx = [D](int64_t i, int64_t j) {
    return static_cast<size_t>(i * D + j);
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int64_t i = 0; i < D; ++i) {
      for (int64_t j = i + 1; j < D; ++j) off += a[idx(i, j)] * a[idx(i, j)];
    }
    if (off < 1e-18) break;
    for (int64_t p = 0; p < D; ++p) {
      for (int64_t q = p + 1; q < D; ++q) {
        const double apq = a[idx(p, q)];
        if (std::abs(apq) < 1e-30) continue;
        const double theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
        const double t_rot =
            (theta >= 0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t_rot * t_rot + 1.0);
        const double s = t_rot * c;
        for (int64_t k = 0; k < D; ++k) {
          const double akp = a[idx(k, p)];
          const double akq = a[idx(k, q)];
          a[idx(k, p)] = c * akp - s * akq;
          a[idx(k, q)] = s * akp + c * akq;
        }
        for (int64_t k = 0; k < D; ++k) {
          const double apk = a[idx(p, k)];
          const double aqk = a[idx(q, k)];
          a[idx(p, k)] = c * apk - s * aqk;
          a[idx(q, k)] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig;
  for (int64_t i = 0; i < D; ++i) eig.push_back(a[idx(i, i)]);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  // Singular values sigma_i = sqrt(eig_i); rank at tolerance 1e-6 relative.
  const double smax = std::sqrt(std::max(eig[0], 0.0));
  int rank = 0;
  for (double e : eig) {
    if (std::sqrt(std::max(e, 0.0)) > 1e-6 * smax) ++rank;
  }
  EXPECT_LE(rank, 3);
  EXPECT_GT(rank, 0);
}

TEST(Synergy, MinJerkBlendBoundaryConditions) {
  EXPECT_DOUBLE_EQ(detail::MinJerk(0.0), 0.0);
  EXPECT_DOUBLE_EQ(detail::MinJerk(1.0), 1.0);
  // Zero slope at both ends (finite-difference check).
  const double h = 1e-6;
  EXPECT_NEAR((detail::MinJerk(h) - detail::MinJerk(0.0)) / h, 0.0, 1e-4);
  EXPECT_NEAR((detail::MinJerk(1.0) - detail::MinJerk(1.0 - h)) / h, 0.0,
              1e-4);
  // Monotone on [0, 1].
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = detail::MinJerk(i / 100.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Synergy, InvalidDurationThrows) {
  SynergyGenerator gen = SynergyGenerator::Random(7, 11, 3);
  EXPECT_THROW(GenerateCorpus(gen, 0.0, 50.0), std::invalid_argument);
  EXPECT_THROW(GenerateCorpus(gen, 10.0, 0.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// MotionSequence / normalization

TEST(Motion, HoldoutStartClamps) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data.assign(100, 0.0);
  EXPECT_EQ(seq.HoldoutStart(0.1), 90);
  seq.data.assign(1, 0.0);
  EXPECT_EQ(seq.HoldoutStart(0.9), 1);  // never empties the training side
}

TEST(Motion, SliceCopiesFrames) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 2;
  seq.data = {0, 1, 2, 3, 4, 5, 6, 7};
  MotionSequence part = seq.Slice(1, 3);
  EXPECT_EQ(part.frames(), 2);
  EXPECT_EQ(part.data, (std::vector<double>{2, 3, 4, 5}));
  EXPECT_EQ(part.dof, 2);
  EXPECT_EQ(part.rate_hz, 50.0);
}

TEST(Normalization, MapsRangeToUnitInterval) {
  // Joint range [0, 2] -> offset 1, scale 1.
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data = {0.0, 2.0, 1.0};
  NormalizationStats norm = ComputeNormalization(seq);
  EXPECT_DOUBLE_EQ(norm.offset[0], 1.0);
  EXPECT_DOUBLE_EQ(norm.scale[0], 1.0);
  EXPECT_DOUBLE_EQ(norm.Apply(0.0, 0), -1.0);
  EXPECT_DOUBLE_EQ(norm.Apply(2.0, 0), 1.0);
}

TEST(Normalization, ConstantJointDegenerateRule) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data = {0.3, 0.3, 0.3};
  NormalizationStats norm = ComputeNormalization(seq);
  EXPECT_DOUBLE_EQ(norm.offset[0], 0.3);
  EXPECT_DOUBLE_EQ(norm.scale[0], 1.0);
  EXPECT_DOUBLE_EQ(norm.Apply(0.3, 0), 0.0);
}

TEST(Normalization, RoundTripProperty) {
  SynergyGenerator gen = SynergyGenerator::Random(3, 5, 2);
  MotionSequence seq = GenerateCorpus(gen, 10.0, 50.0);
  NormalizationStats norm = ComputeNormalization(seq);
  for (int64_t t = 0; t < seq.frames(); t += 7) {
    for (int64_t j = 0; j < seq.dof; ++j) {
      const double x = seq.frame(t)[j];
      const double back = norm.Invert(norm.Apply(x, j), j);
      ASSERT_NEAR(back, x, 1e-9);
    }
  }
}

TEST(Normalization, RequiresTwoFrames) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data = {0.5};
  EXPECT_THROW(ComputeNormalization(seq), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Chunk extraction

TEST(Chunks, CountFormula) {
  EXPECT_EQ(ChunkCount(101, 50, 50), 2);
  EXPECT_EQ(ChunkCount(51, 50, 1), 1);
  EXPECT_EQ(ChunkCount(3000, 50, 1), 2950);
  EXPECT_EQ(ChunkCount(50, 50, 1), 0);  // T < n+1
}

TEST(Chunks, AlignmentContract) {
  // q0 is the frame immediately before actions[0] in the source sequence.
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 2;
  seq.data.resize(2 * 12);
  for (int64_t t = 0; t < 12; ++t) {
    seq.data[static_cast<size_t>(2 * t)] = static_cast<double>(t);
    seq.data[static_cast<size_t>(2 * t + 1)] = 100.0 + t;
  }
  const int64_t n = 4, stride = 3;
  std::vector<ChunkSample> samples = ExtractChunks(seq, n, stride);
  ASSERT_EQ(static_cast<int64_t>(samples.size()), ChunkCount(12, n, stride));
  for (size_t i = 0; i < samples.size(); ++i) {
    const int64_t start = static_cast<int64_t>(i) * stride;
    EXPECT_DOUBLE_EQ(samples[i].q0[0], static_cast<double>(start));
    EXPECT_DOUBLE_EQ(samples[i].q0[1], 100.0 + start);
    for (int64_t s = 0; s < n; ++s) {
      EXPECT_DOUBLE_EQ(samples[i].actions[static_cast<size_t>(2 * s)],
                       static_cast<double>(start + 1 + s));
    }
  }
}

TEST(Chunks, SingleSampleUsesFirstFrame) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data.resize(51);
  for (size_t t = 0; t < 51; ++t) seq.data[t] = static_cast<double>(t);
  std::vector<ChunkSample> samples = ExtractChunks(seq, 50, 1);
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_DOUBLE_EQ(samples[0].q0[0], 0.0);
  EXPECT_DOUBLE_EQ(samples[0].actions[0], 1.0);
  EXPECT_DOUBLE_EQ(samples[0].actions[49], 50.0);
}

TEST(Chunks, TooShortCorpusThrows) {
  MotionSequence seq;
  seq.rate_hz = 50.0;
  seq.dof = 1;
  seq.data.assign(50, 0.0);
  EXPECT_THROW(ExtractChunks(seq, 50, 1), std::invalid_argument);
  seq.data.assign(60, 0.0);
  EXPECT_THROW(ExtractChunks(seq, 0, 1), std::invalid_argument);
  EXPECT_THROW(ExtractChunks(seq, 50, 0), std::invalid_argument);
}

TEST(Chunks, SplitHoldsOutLastFraction) {
  std::vector<ChunkSample> samples(10);
  ChunkSplit split = SplitChunks(samples, 0.2);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.val.size(), 2u);
  // Fraction > 0 guarantees at least one validation sample.
  std::vector<ChunkSample> few(2);
  ChunkSplit tiny = SplitChunks(few, 0.01);
  EXPECT_EQ(tiny.val.size(), 1u);
  EXPECT_THROW(SplitChunks(samples, 1.0), std::invalid_argument);
  EXPECT_THROW(SplitChunks(samples, -0.1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// CSV I/O

TEST(Csv, RoundTripMatchesWithinTolerance) {
  SynergyGenerator gen = SynergyGenerator::Random(7, 5, 2);
  MotionSequence seq = GenerateCorpus(gen, 5.0, 50.0);
  const std::string path = TempPath("chunkspace_csv_roundtrip.csv");
  SaveCorpus(seq, path);
  MotionSequence back = LoadCorpus(path);
  ASSERT_EQ(back.frames(), seq.frames());
  ASSERT_EQ(back.dof, seq.dof);
  EXPECT_NEAR(back.rate_hz, seq.rate_hz, 1e-9);
  for (size_t i = 0; i < seq.data.size(); ++i) {
    ASSERT_NEAR(back.data[i], seq.data[i], 1e-6);
  }
  std::remove(path.c_str());
}

TEST(Csv, ThreeRowFileRateInference) {
  const std::string path = TempPath("chunkspace_csv_rate.csv");
  {
    std::ofstream f(path);
    f << "time,q0\n0.00,0.1\n0.02,0.2\n0.04,0.3\n";
  }
  MotionSequence seq = LoadCorpus(path);
  EXPECT_EQ(seq.frames(), 3);
  EXPECT_NEAR(seq.rate_hz, 50.0, 1e-9);
  EXPECT_DOUBLE_EQ(seq.frame(2)[0], 0.3);
  std::remove(path.c_str());
}

TEST(Csv, NanValueIsParseErrorAtLine) {
  const std::string path = TempPath("chunkspace_csv_nan.csv");
  {
    std::ofstream f(path);
    f << "time,q0\n0.00,0.1\n0.02,NaN\n";
  }
  try {
    LoadCorpus(path);
    FAIL() << "expected CorpusParseError";
  } catch (const CorpusParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(":3"), std::string::npos) << what;  // 1-based line
  }
  std::remove(path.c_str());
}

TEST(Csv, RejectsNonIncreasingTime) {
  const std::string path = TempPath("chunkspace_csv_time.csv");
  {
    std::ofstream f(path);
    f << "time,q0\n0.02,0.1\n0.02,0.2\n";
  }
  EXPECT_THROW(LoadCorpus(path), CorpusParseError);
  std::remove(path.c_str());
}

TEST(Csv, RejectsBadHeader) {
  const std::string path = TempPath("chunkspace_csv_header.csv");
  {
    std::ofstream f(path);
    f << "t,q0\n0.00,0.1\n";
  }
  EXPECT_THROW(LoadCorpus(path), CorpusParseError);
  {
    std::ofstream f(path);
    f << "time,q0,qx\n0.00,0.1,0.2\n";
  }
  EXPECT_THROW(LoadCorpus(path), CorpusParseError);
  std::remove(path.c_str());
}

TEST(Csv, RejectsMissingFileAndEmptyFile) {
  EXPECT_THROW(LoadCorpus(TempPath("chunkspace_does_not_exist.csv")),
               std::runtime_error);
  const std::string path = TempPath("chunkspace_csv_empty.csv");
  { std::ofstream f(path); }
  EXPECT_THROW(LoadCorpus(path), CorpusParseError);
  std::remove(path.c_str());
}

TEST(Csv, SingleRowDefaultsRate) {
  const std::string path = TempPath("chunkspace_csv_single.csv");
  {
    std::ofstream f(path);
    f << "time,q0,q1\n0.00,0.1,-0.2\n";
  }
  MotionSequence seq = LoadCorpus(path);
  EXPECT_EQ(seq.frames(), 1);
  EXPECT_EQ(seq.dof, 2);
  EXPECT_DOUBLE_EQ(seq.rate_hz, 1.0);
  std::remove(path.c_str());
}

TEST(Csv, RejectsWrongColumnCountInRow) {
  const std::string path = TempPath("chunkspace_csv_cols.csv");
  {
    std::ofstream f(path);
    f << "time,q0,q1\n0.00,0.1,0.2\n0.02,0.1\n";
  }
  EXPECT_THROW(LoadCorpus(path), CorpusParseError);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace chunkspace
