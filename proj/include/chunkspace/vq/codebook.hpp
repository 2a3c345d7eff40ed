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

#ifndef CHUNKSPACE_VQ_CODEBOOK_HPP_
#define CHUNKSPACE_VQ_CODEBOOK_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/core/tensor.hpp"

namespace chunkspace {

/// Discrete latent bottleneck: K codes of dimension d maintained by
/// exponential-moving-average statistics instead of a gradient.
template <typename T>
struct Codebook {
  int64_t K = 0;
  int64_t d = 0;
  Tensor<T> codes;                 // [K, d]
  Tensor<T> ema_counts;            // [K]   decayed assignment mass N_i
  Tensor<T> ema_sums;              // [K, d] decayed assigned-vector sums m_i
  std::vector<int64_t> lifetime;   // total assignments ever, per code
  double gamma = 0.99;
  double eps = 1e-5;

  Codebook() = default;
  Codebook(int64_t codes_k, int64_t dim, double gamma_in = 0.99,
           double eps_in = 1e-5)
      : K(codes_k),
        d(dim),
        codes(Tensor<T>::Zeros({codes_k, dim})),
        ema_counts(Tensor<T>::Zeros({codes_k})),
        ema_sums(Tensor<T>::Zeros({codes_k, dim})),
        lifetime(static_cast<size_t>(codes_k), 0),
        gamma(gamma_in),
        eps(eps_in) {
    if (K < 2) throw std::invalid_argument("codebook needs K >= 2");
    if (d < 1) throw std::invalid_argument("codebook needs d >= 1");
  }

  /// Seeds the codes from a batch of latent vectors [rows, d] with
  /// k-means++-style sampling: first code uniform, later codes weighted by
  /// squared distance to the nearest already-chosen code.
  void InitFromBatch(const Tensor<T>& z, Rng& rng) {
    const int64_t rows = z.numel() / d;
    if (rows < 1) throw std::invalid_argument("empty init batch");
    std::vector<int64_t> chosen;
    chosen.push_back(rng.uniform_int(static_cast<uint64_t>(rows)));
    std::vector<double> best(static_cast<size_t>(rows), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
      best[static_cast<size_t>(r)] = SquaredDistance(z.row(r), z.row(chosen[0]));
    }
    while (static_cast<int64_t>(chosen.size()) < K) {
      double total = 0.0;
      for (double w : best) total += w;
      int64_t pick;
      if (total <= 0.0) {
        // All mass collapsed: fall back to uniform.
        pick = rng.uniform_int(static_cast<uint64_t>(rows));
      } else {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        pick = rows - 1;
        for (int64_t r = 0; r < rows; ++r) {
          acc += best[static_cast<size_t>(r)];
          if (u < acc) {
            pick = r;
            break;
          }
        }
      }
      chosen.push_back(pick);
      for (int64_t r = 0; r < rows; ++r) {
        const double dist = SquaredDistance(z.row(r), z.row(pick));
        if (dist < best[static_cast<size_t>(r)]) {
          best[static_cast<size_t>(r)] = dist;
        }
      }
    }
    for (int64_t i = 0; i < K; ++i) {
      const T* src = z.row(chosen[static_cast<size_t>(i)]);
      T* dst = codes.row(i);
      for (int64_t e = 0; e < d; ++e) dst[e] = src[e];
    }
  }

  double SquaredDistance(const T* a, const T* b) const {
    double acc = 0.0;
    for (int64_t e = 0; e < d; ++e) {
      const double diff = static_cast<double>(a[e]) - static_cast<double>(b[e]);
      acc += diff * diff;
    }
    return acc;
  }
};

/// Nearest-neighbor lookup: indices[r] = argmin_i ||z_r - e_i||^2 with ties
/// broken toward the lowest index; z_q rows are the selected codes.
template <typename T>
void Quantize(const Codebook<T>& book, const Tensor<T>& z,
              std::vector<int64_t>* indices, Tensor<T>* z_q) {
  if (z.dim(z.rank() - 1) != book.d) {
    throw std::invalid_argument("quantize: latent dim mismatch");
  }
  const int64_t rows = z.numel() / book.d;
  indices->assign(static_cast<size_t>(rows), 0);
  *z_q = Tensor<T>::Zeros({rows, book.d});
  for (int64_t r = 0; r < rows; ++r) {
    const T* zr = z.row(r);
    int64_t best_i = 0;
    double best_d = book.SquaredDistance(zr, book.codes.row(0));
    for (int64_t i = 1; i < book.K; ++i) {
      const double dist = book.SquaredDistance(zr, book.codes.row(i));
      if (dist < best_d) {
        best_d = dist;
        best_i = i;
      }
    }
    (*indices)[static_cast<size_t>(r)] = best_i;
    const T* code = book.codes.row(best_i);
    T* out = z_q->row(r);
    for (int64_t e = 0; e < book.d; ++e) out[e] = code[e];
  }
}

/// Forward value of the straight-through bottleneck: exactly z_q.  The
/// gradient contract — d(out)/d(z) acts as the identity — is realized by the
/// caller routing the output gradient straight into z.
template <typename T>
Tensor<T> StraightThrough(const Tensor<T>& z, const Tensor<T>& z_q) {
  if (!z.SameShape(z_q)) {
    throw std::invalid_argument("straight_through: shape mismatch");
  }
  return z_q;
}

/// Mean squared error ||z - SG[z_q]||^2 / numel.  Gradient flows only to z:
/// dL/dz = 2 (z - z_q) / numel.
template <typename T>
double CommitmentLoss(const Tensor<T>& z, const Tensor<T>& z_q) {
  if (!z.SameShape(z_q)) {
    throw std::invalid_argument("commitment_loss: shape mismatch");
  }
  double acc = 0.0;
  for (int64_t i = 0; i < z.numel(); ++i) {
    const double diff = static_cast<double>(z[static_cast<size_t>(i)]) -
                        static_cast<double>(z_q[static_cast<size_t>(i)]);
    acc += diff * diff;
  }
  return acc / static_cast<double>(z.numel());
}

/// Adds dL_commit/dz (scaled by `weight`) into grad_z.
template <typename T>
void CommitmentLossBackward(const Tensor<T>& z, const Tensor<T>& z_q,
                            double weight, Tensor<T>* grad_z) {
  const double scale = 2.0 * weight / static_cast<double>(z.numel());
  for (int64_t i = 0; i < z.numel(); ++i) {
    (*grad_z)[static_cast<size_t>(i)] += static_cast<T>(
        scale * (static_cast<double>(z[static_cast<size_t>(i)]) -
                 static_cast<double>(z_q[static_cast<size_t>(i)])));
  }
}

/// EMA codebook maintenance:
///   N_i <- g N_i + (1-g) count_i
///   m_i <- g m_i + (1-g) sum of assigned z
///   e_i <- m_i / N~_i,  N~_i = (N_i + eps) / (sum N + K eps) * sum N
/// Codes never assigned in their lifetime stay untouched.
template <typename T>
void EmaUpdate(Codebook<T>* book, const Tensor<T>& z_batch,
               const std::vector<int64_t>& assignments) {
  const int64_t rows = z_batch.numel() / book->d;
  if (static_cast<int64_t>(assignments.size()) != rows) {
    throw std::invalid_argument("ema_update: assignment count mismatch");
  }
  std::vector<double> count(static_cast<size_t>(book->K), 0.0);
  std::vector<double> sum(static_cast<size_t>(book->K * book->d), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t i = assignments[static_cast<size_t>(r)];
    if (i < 0 || i >= book->K) {
      throw std::out_of_range("ema_update: assignment index out of range");
    }
    count[static_cast<size_t>(i)] += 1.0;
    const T* zr = z_batch.row(r);
    double* si = &sum[static_cast<size_t>(i * book->d)];
    for (int64_t e = 0; e < book->d; ++e) si[e] += static_cast<double>(zr[e]);
  }
  const double g = book->gamma;
  double total_n = 0.0;
  for (int64_t i = 0; i < book->K; ++i) {
    const double n = g * static_cast<double>(
                             book->ema_counts[static_cast<size_t>(i)]) +
                     (1.0 - g) * count[static_cast<size_t>(i)];
    book->ema_counts[static_cast<size_t>(i)] = static_cast<T>(n);
    total_n += n;
    book->lifetime[static_cast<size_t>(i)] +=
        static_cast<int64_t>(count[static_cast<size_t>(i)]);
    T* mi = book->ema_sums.row(i);
    const double* si = &sum[static_cast<size_t>(i * book->d)];
    for (int64_t e = 0; e < book->d; ++e) {
      mi[e] = static_cast<T>(g * static_cast<double>(mi[e]) + (1.0 - g) * si[e]);
    }
  }
  if (total_n <= 0.0) return;
  const double denom = total_n + static_cast<double>(book->K) * book->eps;
  for (int64_t i = 0; i < book->K; ++i) {
    if (book->lifetime[static_cast<size_t>(i)] == 0) continue;
    const double n_smoothed =
        (static_cast<double>(book->ema_counts[static_cast<size_t>(i)]) +
         book->eps) /
        denom * total_n;
    const T* mi = book->ema_sums.row(i);
    T* ei = book->codes.row(i);
    for (int64_t e = 0; e < book->d; ++e) {
      ei[e] = static_cast<T>(static_cast<double>(mi[e]) / n_smoothed);
    }
  }
}

/// Fraction of assignments landing on each code (used by metrics and the
/// utilization criterion).
inline std::vector<double> CodeUsage(const std::vector<int64_t>& assignments,
                                     int64_t K) {
  std::vector<double> usage(static_cast<size_t>(K), 0.0);
  if (assignments.empty()) return usage;
  for (int64_t a : assignments) {
    if (a >= 0 && a < K) usage[static_cast<size_t>(a)] += 1.0;
  }
  for (double& u : usage) u /= static_cast<double>(assignments.size());
  return usage;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_VQ_CODEBOOK_HPP_
