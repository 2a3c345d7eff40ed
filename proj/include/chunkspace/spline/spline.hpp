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

#ifndef CHUNKSPACE_SPLINE_SPLINE_HPP_
#define CHUNKSPACE_SPLINE_SPLINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"

namespace chunkspace {

enum class SplineInterpolation { kZero, kLinear, kCubic };

inline SplineInterpolation ParseInterpolation(const std::string& name) {
  if (name == "zero") return SplineInterpolation::kZero;
  if (name == "linear") return SplineInterpolation::kLinear;
  if (name == "cubic") return SplineInterpolation::kCubic;
  throw std::invalid_argument("unknown spline interpolation: " + name);
}

inline const char* InterpolationName(SplineInterpolation mode) {
  switch (mode) {
    case SplineInterpolation::kZero: return "zero";
    case SplineInterpolation::kLinear: return "linear";
    case SplineInterpolation::kCubic: return "cubic";
  }
  return "?";
}

/// Knot-based control spline over D channels with clamped extrapolation.
///
/// Cubic segments are stored in Hermite form: each knot carries the value
/// and the tangent solved once at construction (not-a-knot end conditions,
/// so four knots of a cubic polynomial reproduce it exactly).  Because a
/// Hermite segment is fully determined by its endpoint values and
/// derivatives, Shift can introduce a resampled boundary knot without
/// changing the function — the shift identity eval(shift(sp,dt), t) ==
/// eval(sp, t+dt) holds to round-off for every mode.
class Spline {
 public:
  Spline() = default;

  Spline(std::vector<double> knot_times, std::vector<double> knot_values,
         int64_t dims, SplineInterpolation mode)
      : times_(std::move(knot_times)),
        values_(std::move(knot_values)),
        dims_(dims),
        mode_(mode) {
    Validate();
    tangents_.assign(values_.size(), 0.0);
    if (mode_ == SplineInterpolation::kCubic) SolveTangents();
  }

  /// P evenly spaced all-zero knots spanning [t0, t1].
  static Spline Zeros(int64_t knots, int64_t dims, double t0, double t1,
                      SplineInterpolation mode) {
    if (knots < 1) throw std::invalid_argument("spline needs at least 1 knot");
    std::vector<double> times(static_cast<size_t>(knots));
    if (knots == 1) {
      times[0] = t0;
    } else {
      for (int64_t i = 0; i < knots; ++i) {
        times[static_cast<size_t>(i)] =
            t0 + (t1 - t0) * static_cast<double>(i) /
                     static_cast<double>(knots - 1);
      }
    }
    return Spline(std::move(times),
                  std::vector<double>(static_cast<size_t>(knots * dims), 0.0),
                  dims, mode);
  }

  int64_t knots() const { return static_cast<int64_t>(times_.size()); }
  int64_t dims() const { return dims_; }
  SplineInterpolation mode() const { return mode_; }
  const std::vector<double>& knot_times() const { return times_; }
  const std::vector<double>& knot_values() const { return values_; }
  double knot_value(int64_t k, int64_t d) const {
    return values_[static_cast<size_t>(k * dims_ + d)];
  }

  /// Interpolates at time t; before the first knot or after the last the
  /// nearest knot value is held (clamped extrapolation).
  std::vector<double> Eval(double t) const {
    std::vector<double> out(static_cast<size_t>(dims_));
    EvalInto(t, out.data());
    return out;
  }

  void EvalInto(double t, double* out) const {
    const int64_t P = knots();
    if (P == 1 || t <= times_.front()) {
      CopyRow(t <= times_.front() ? 0 : P - 1, out);
      return;
    }
    if (t >= times_.back()) {
      CopyRow(P - 1, out);
      return;
    }
    // Segment i such that times_[i] <= t < times_[i+1].
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const int64_t i = static_cast<int64_t>(it - times_.begin()) - 1;
    switch (mode_) {
      case SplineInterpolation::kZero:
        CopyRow(i, out);
        return;
      case SplineInterpolation::kLinear: {
        const double h = times_[static_cast<size_t>(i + 1)] -
                         times_[static_cast<size_t>(i)];
        const double s = (t - times_[static_cast<size_t>(i)]) / h;
        const double* a = &values_[static_cast<size_t>(i * dims_)];
        const double* b = &values_[static_cast<size_t>((i + 1) * dims_)];
        for (int64_t d = 0; d < dims_; ++d) out[d] = a[d] + s * (b[d] - a[d]);
        return;
      }
      case SplineInterpolation::kCubic: {
        const double h = times_[static_cast<size_t>(i + 1)] -
                         times_[static_cast<size_t>(i)];
        const double s = (t - times_[static_cast<size_t>(i)]) / h;
        const double h00 = (2.0 * s - 3.0) * s * s + 1.0;
        const double h10 = ((s - 2.0) * s + 1.0) * s;
        const double h01 = (3.0 - 2.0 * s) * s * s;
        const double h11 = (s - 1.0) * s * s;
        const double* a = &values_[static_cast<size_t>(i * dims_)];
        const double* b = &values_[static_cast<size_t>((i + 1) * dims_)];
        const double* ga = &tangents_[static_cast<size_t>(i * dims_)];
        const double* gb = &tangents_[static_cast<size_t>((i + 1) * dims_)];
        for (int64_t d = 0; d < dims_; ++d) {
          out[d] = h00 * a[d] + h * (h10 * ga[d] + h11 * gb[d]) + h01 * b[d];
        }
        return;
      }
    }
  }

  /// Time derivative at t (zero outside the knot span and in kZero mode).
  std::vector<double> EvalDeriv(double t) const {
    std::vector<double> out(static_cast<size_t>(dims_), 0.0);
    const int64_t P = knots();
    if (P == 1 || mode_ == SplineInterpolation::kZero) return out;
    if (t < times_.front() || t >= times_.back()) return out;
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const int64_t i = std::max<int64_t>(
        0, static_cast<int64_t>(it - times_.begin()) - 1);
    const double h =
        times_[static_cast<size_t>(i + 1)] - times_[static_cast<size_t>(i)];
    const double s = (t - times_[static_cast<size_t>(i)]) / h;
    const double* a = &values_[static_cast<size_t>(i * dims_)];
    const double* b = &values_[static_cast<size_t>((i + 1) * dims_)];
    if (mode_ == SplineInterpolation::kLinear) {
      for (int64_t d = 0; d < dims_; ++d) out[static_cast<size_t>(d)] = (b[d] - a[d]) / h;
      return out;
    }
    const double dh00 = 6.0 * s * (s - 1.0);
    const double dh10 = (3.0 * s - 4.0) * s + 1.0;
    const double dh01 = -dh00;
    const double dh11 = (3.0 * s - 2.0) * s;
    const double* ga = &tangents_[static_cast<size_t>(i * dims_)];
    const double* gb = &tangents_[static_cast<size_t>((i + 1) * dims_)];
    for (int64_t d = 0; d < dims_; ++d) {
      out[static_cast<size_t>(d)] =
          (dh00 * a[d] + dh01 * b[d]) / h + dh10 * ga[d] + dh11 * gb[d];
    }
    return out;
  }

  /// Moves the time origin forward by dt >= 0: eval(shift(sp,dt), t) equals
  /// eval(sp, t+dt) for all t.  Knots behind the new origin are dropped; a
  /// boundary knot sampled from the original curve (value and tangent)
  /// preserves the function exactly.  Past the final knot the result holds
  /// the last value, as clamped extrapolation already guarantees.
  Spline Shift(double dt) const {
    if (dt < 0.0) throw std::invalid_argument("shift requires dt >= 0");
    if (dt == 0.0) return *this;
    const int64_t P = knots();
    if (dt >= times_.back()) {
      // Entirely past the data: constant at the final value.
      Spline out;
      out.times_ = {0.0};
      out.values_.assign(values_.end() - dims_, values_.end());
      out.tangents_.assign(static_cast<size_t>(dims_), 0.0);
      out.dims_ = dims_;
      out.mode_ = mode_;
      return out;
    }
    const auto it = std::lower_bound(times_.begin(), times_.end(), dt);
    int64_t j = static_cast<int64_t>(it - times_.begin());
    Spline out;
    out.dims_ = dims_;
    out.mode_ = mode_;
    if (!(j < P && times_[static_cast<size_t>(j)] == dt)) {
      // dt falls inside a segment: emit a boundary knot at the new origin.
      out.times_.push_back(0.0);
      std::vector<double> v(static_cast<size_t>(dims_));
      EvalInto(dt, v.data());
      out.values_.insert(out.values_.end(), v.begin(), v.end());
      const std::vector<double> g = EvalDeriv(dt);
      out.tangents_.insert(out.tangents_.end(), g.begin(), g.end());
    }
    for (int64_t k = j; k < P; ++k) {
      out.times_.push_back(times_[static_cast<size_t>(k)] - dt);
      const double* v = &values_[static_cast<size_t>(k * dims_)];
      const double* g = &tangents_[static_cast<size_t>(k * dims_)];
      out.values_.insert(out.values_.end(), v, v + dims_);
      out.tangents_.insert(out.tangents_.end(), g, g + dims_);
    }
    return out;
  }

  /// Adds i.i.d. N(0, sigma^2) noise to every knot value.  sigma == 0
  /// returns the spline unchanged.
  Spline Perturb(double sigma, Rng& rng) const {
    if (sigma < 0.0) throw std::invalid_argument("perturb requires sigma >= 0");
    if (sigma == 0.0) return *this;
    std::vector<double> values = values_;
    for (double& v : values) v += rng.normal(0.0, sigma);
    return Spline(times_, std::move(values), dims_, mode_);
  }

  /// Fresh noise: every knot value drawn N(center, sigma^2) where center is
  /// the matching knot of `center_spline` (or zero when null).
  static Spline DrawNoise(const Spline& shape, const Spline* center_spline,
                          double sigma, Rng& rng) {
    std::vector<double> values(shape.values_.size());
    for (size_t i = 0; i < values.size(); ++i) {
      const double center =
          center_spline != nullptr ? center_spline->values_[i] : 0.0;
      values[i] = rng.normal(center, sigma);
    }
    return Spline(shape.times_, std::move(values), shape.dims_, shape.mode_);
  }

 private:
  void Validate() const {
    if (times_.empty()) throw std::invalid_argument("spline needs >= 1 knot");
    if (dims_ < 1) throw std::invalid_argument("spline needs >= 1 channel");
    if (values_.size() != times_.size() * static_cast<size_t>(dims_)) {
      throw std::invalid_argument("spline knot value shape mismatch");
    }
    for (size_t i = 0; i + 1 < times_.size(); ++i) {
      if (!(times_[i] < times_[i + 1])) {
        throw std::invalid_argument("spline knot times must strictly increase");
      }
    }
    for (double t : times_) {
      if (!std::isfinite(t)) throw std::invalid_argument("non-finite knot time");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite knot value");
    }
  }

  void CopyRow(int64_t k, double* out) const {
    const double* v = &values_[static_cast<size_t>(k * dims_)];
    for (int64_t d = 0; d < dims_; ++d) out[d] = v[d];
  }

  // Solves C2 cubic tangents with not-a-knot end conditions.  P <= a few
  // dozen knots, so a dense Gaussian elimination keeps this simple.
  void SolveTangents() {
    const int64_t P = knots();
    if (P == 1) return;
    std::vector<double> h(static_cast<size_t>(P - 1));
    for (int64_t i = 0; i + 1 < P; ++i) {
      h[static_cast<size_t>(i)] = times_[static_cast<size_t>(i + 1)] -
                                  times_[static_cast<size_t>(i)];
    }
    for (int64_t d = 0; d < dims_; ++d) {
      std::vector<double> delta(static_cast<size_t>(P - 1));
      for (int64_t i = 0; i + 1 < P; ++i) {
        delta[static_cast<size_t>(i)] =
            (values_[static_cast<size_t>((i + 1) * dims_ + d)] -
             values_[static_cast<size_t>(i * dims_ + d)]) /
            h[static_cast<size_t>(i)];
      }
      std::vector<double> g(static_cast<size_t>(P), 0.0);
      if (P == 2) {
        g[0] = g[1] = delta[0];
      } else if (P == 3) {
        // Not-a-knot with three points degenerates to the parabola through
        // them; use its exact derivatives.
        const double t0 = times_[0], t1 = times_[1], t2 = times_[2];
        const double c = (delta[1] - delta[0]) / (t2 - t0);  // leading coeff
        g[0] = delta[0] - c * h[0];
        g[1] = delta[0] + c * h[0];
        g[2] = delta[1] + c * h[1];
      } else {
        SolveNotAKnot(h, delta, &g);
      }
      for (int64_t k = 0; k < P; ++k) {
        tangents_[static_cast<size_t>(k * dims_ + d)] =
            g[static_cast<size_t>(k)];
      }
    }
  }

  static void SolveNotAKnot(const std::vector<double>& h,
                            const std::vector<double>& delta,
                            std::vector<double>* g) {
    const int64_t P = static_cast<int64_t>(g->size());
    std::vector<std::vector<double>> A(
        static_cast<size_t>(P), std::vector<double>(static_cast<size_t>(P), 0.0));
    std::vector<double> b(static_cast<size_t>(P), 0.0);
    // Third-derivative continuity across the second knot.
    {
      const double ih0 = 1.0 / (h[0] * h[0]);
      const double ih1 = 1.0 / (h[1] * h[1]);
      A[0][0] = ih0;
      A[0][1] = ih0 - ih1;
      A[0][2] = -ih1;
      b[0] = 2.0 * (delta[0] * ih0 - delta[1] * ih1);
    }
    // C2 continuity at interior knots.
    for (int64_t i = 1; i + 1 < P; ++i) {
      const double il = 1.0 / h[static_cast<size_t>(i - 1)];
      const double ir = 1.0 / h[static_cast<size_t>(i)];
      A[static_cast<size_t>(i)][static_cast<size_t>(i - 1)] = il;
      A[static_cast<size_t>(i)][static_cast<size_t>(i)] = 2.0 * (il + ir);
      A[static_cast<size_t>(i)][static_cast<size_t>(i + 1)] = ir;
      b[static_cast<size_t>(i)] = 3.0 * (delta[static_cast<size_t>(i - 1)] * il +
                                         delta[static_cast<size_t>(i)] * ir);
    }
    // Third-derivative continuity across the second-to-last knot.
    {
      const size_t m = static_cast<size_t>(P - 3);
      const double ihl = 1.0 / (h[m] * h[m]);
      const double ihr = 1.0 / (h[m + 1] * h[m + 1]);
      A[static_cast<size_t>(P - 1)][m] = ihl;
      A[static_cast<size_t>(P - 1)][m + 1] = ihl - ihr;
      A[static_cast<size_t>(P - 1)][m + 2] = -ihr;
      b[static_cast<size_t>(P - 1)] = 2.0 * (delta[m] * ihl - delta[m + 1] * ihr);
    }
    // Gaussian elimination with partial pivoting.
    for (int64_t col = 0; col < P; ++col) {
      int64_t pivot = col;
      for (int64_t r = col + 1; r < P; ++r) {
        if (std::abs(A[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
            std::abs(A[static_cast<size_t>(pivot)][static_cast<size_t>(col)])) {
          pivot = r;
        }
      }
      std::swap(A[static_cast<size_t>(col)], A[static_cast<size_t>(pivot)]);
      std::swap(b[static_cast<size_t>(col)], b[static_cast<size_t>(pivot)]);
      const double diag = A[static_cast<size_t>(col)][static_cast<size_t>(col)];
      if (diag == 0.0) throw std::runtime_error("singular spline system");
      for (int64_t r = col + 1; r < P; ++r) {
        const double f =
            A[static_cast<size_t>(r)][static_cast<size_t>(col)] / diag;
        if (f == 0.0) continue;
        for (int64_t c = col; c < P; ++c) {
          A[static_cast<size_t>(r)][static_cast<size_t>(c)] -=
              f * A[static_cast<size_t>(col)][static_cast<size_t>(c)];
        }
        b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
      }
    }
    for (int64_t r = P - 1; r >= 0; --r) {
      double acc = b[static_cast<size_t>(r)];
      for (int64_t c = r + 1; c < P; ++c) {
        acc -= A[static_cast<size_t>(r)][static_cast<size_t>(c)] *
               (*g)[static_cast<size_t>(c)];
      }
      (*g)[static_cast<size_t>(r)] =
          acc / A[static_cast<size_t>(r)][static_cast<size_t>(r)];
    }
  }

  std::vector<double> times_;     // [P], strictly increasing
  std::vector<double> values_;    // [P * D] row-major
  std::vector<double> tangents_;  // [P * D]; used by kCubic
  int64_t dims_ = 0;
  SplineInterpolation mode_ = SplineInterpolation::kLinear;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_SPLINE_SPLINE_HPP_
