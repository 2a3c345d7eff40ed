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

#ifndef CHUNKSPACE_NN_LAYERS_HPP_
#define CHUNKSPACE_NN_LAYERS_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/core/tensor.hpp"
#include "chunkspace/nn/params.hpp"

namespace chunkspace {

/// Boolean attention mask: entry (i, j) = true lets query token i attend to
/// key token j.  Rows must be non-empty; attention iterates only the allowed
/// keys, so masked tokens get exactly zero weight and the output at query i
/// is bit-for-bit invariant to their content.
class AttentionMask {
 public:
  AttentionMask() = default;

  AttentionMask(int64_t rows, int64_t cols, std::vector<uint8_t> allowed)
      : rows_(rows), cols_(cols), allowed_(std::move(allowed)) {
    if (static_cast<int64_t>(allowed_.size()) != rows_ * cols_) {
      throw std::invalid_argument("attention mask shape mismatch");
    }
    keys_.resize(static_cast<size_t>(rows_));
    for (int64_t i = 0; i < rows_; ++i) {
      for (int64_t j = 0; j < cols_; ++j) {
        if (allowed_[static_cast<size_t>(i * cols_ + j)]) {
          keys_[static_cast<size_t>(i)].push_back(static_cast<int32_t>(j));
        }
      }
      if (keys_[static_cast<size_t>(i)].empty()) {
        throw std::invalid_argument("attention mask row " + std::to_string(i) +
                                    " allows no keys");
      }
    }
  }

  static AttentionMask Full(int64_t tokens) {
    return AttentionMask(tokens, tokens,
                         std::vector<uint8_t>(
                             static_cast<size_t>(tokens * tokens), uint8_t{1}));
  }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  bool Allowed(int64_t i, int64_t j) const {
    return allowed_[static_cast<size_t>(i * cols_ + j)] != 0;
  }
  const std::vector<int32_t>& KeysFor(int64_t query) const {
    return keys_[static_cast<size_t>(query)];
  }

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<uint8_t> allowed_;
  std::vector<std::vector<int32_t>> keys_;
};

namespace detail {

inline void CheckCols(const char* layer, int64_t got, int64_t want) {
  if (got != want) {
    throw std::invalid_argument(std::string(layer) + ": expected " +
                                std::to_string(want) + " input columns, got " +
                                std::to_string(got));
  }
}

}  // namespace detail

/// Affine layer y = x W^T + b over 2-D activations [rows, in] -> [rows, out].
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int64_t in, int64_t out, bool bias = true)
      : name_(std::move(name)), in_(in), out_(out), bias_(bias) {}

  /// Registers parameters.  scale > 0 draws W ~ N(0, scale^2/in) (He-style
  /// fan-in scaling); scale == 0 leaves the layer all-zero.
  void Init(ParameterSet<T>& params, Rng& rng, double scale = 1.0) const {
    Param<T>& w = params.Create(name_ + ".w", {out_, in_});
    if (scale > 0.0) {
      const double stddev = scale / std::sqrt(static_cast<double>(in_));
      for (auto& v : w.value.raw()) v = static_cast<T>(rng.normal(0.0, stddev));
    }
    if (bias_) params.Create(name_ + ".b", {out_});
  }

  struct Cache {
    Tensor<T> x;
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    Cache* cache = nullptr) const {
    detail::CheckCols(name_.c_str(), x.dim(x.rank() - 1), in_);
    const int64_t rows = x.numel() / in_;
    Tensor<T> y({rows, out_});
    const Tensor<T>& w = params.Get(name_ + ".w").value;
    if (bias_) {
      const Tensor<T>& b = params.Get(name_ + ".b").value;
      for (int64_t i = 0; i < rows; ++i) {
        T* yi = y.row(i);
        for (int64_t j = 0; j < out_; ++j) yi[j] = b[static_cast<size_t>(j)];
      }
    }
    MatmulTransposedAccum(x.data(), rows, in_, w.data(), out_, y.data());
    if (cache != nullptr) cache->x = x;
    return y;
  }

  /// Accumulates parameter gradients and returns the input gradient.
  Tensor<T> Backward(ParameterSet<T>& params, const Cache& cache,
                     const Tensor<T>& gy) const {
    const int64_t rows = gy.numel() / out_;
    Param<T>& w = params.Get(name_ + ".w");
    OuterAccum(gy.data(), cache.x.data(), rows, out_, in_, w.grad.data());
    if (bias_) {
      Param<T>& b = params.Get(name_ + ".b");
      for (int64_t i = 0; i < rows; ++i) {
        const T* gyi = gy.row(i);
        for (int64_t j = 0; j < out_; ++j) {
          b.grad[static_cast<size_t>(j)] += gyi[j];
        }
      }
    }
    Tensor<T> gx({rows, in_});
    MatmulAccum(gy.data(), rows, out_, w.value.data(), in_, gx.data());
    return gx;
  }

  const std::string& name() const { return name_; }
  int64_t in() const { return in_; }
  int64_t out() const { return out_; }

 private:
  std::string name_;
  int64_t in_ = 0;
  int64_t out_ = 0;
  bool bias_ = true;
};

/// Per-row layer normalization with learned gain/bias over the last axis.
template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::string name, int64_t dim, double eps = 1e-5)
      : name_(std::move(name)), dim_(dim), eps_(eps) {}

  void Init(ParameterSet<T>& params) const {
    Param<T>& g = params.Create(name_ + ".gain", {dim_});
    g.value.Fill(T(1));
    params.Create(name_ + ".bias", {dim_});
  }

  struct Cache {
    Tensor<T> x_hat;           // normalized input
    std::vector<T> inv_std;    // per row
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    Cache* cache = nullptr) const {
    detail::CheckCols(name_.c_str(), x.dim(x.rank() - 1), dim_);
    const int64_t rows = x.numel() / dim_;
    const Tensor<T>& gain = params.Get(name_ + ".gain").value;
    const Tensor<T>& bias = params.Get(name_ + ".bias").value;
    Tensor<T> y({rows, dim_});
    Tensor<T> x_hat({rows, dim_});
    std::vector<T> inv_std(static_cast<size_t>(rows));
    for (int64_t i = 0; i < rows; ++i) {
      const T* xi = x.row(i);
      T mean = T(0);
      for (int64_t j = 0; j < dim_; ++j) mean += xi[j];
      mean /= static_cast<T>(dim_);
      T var = T(0);
      for (int64_t j = 0; j < dim_; ++j) {
        const T d = xi[j] - mean;
        var += d * d;
      }
      var /= static_cast<T>(dim_);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps_));
      inv_std[static_cast<size_t>(i)] = is;
      T* xh = x_hat.row(i);
      T* yi = y.row(i);
      for (int64_t j = 0; j < dim_; ++j) {
        xh[j] = (xi[j] - mean) * is;
        yi[j] = xh[j] * gain[static_cast<size_t>(j)] +
                bias[static_cast<size_t>(j)];
      }
    }
    if (cache != nullptr) {
      cache->x_hat = std::move(x_hat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Tensor<T> Backward(ParameterSet<T>& params, const Cache& cache,
                     const Tensor<T>& gy) const {
    const int64_t rows = gy.numel() / dim_;
    Param<T>& gain = params.Get(name_ + ".gain");
    Param<T>& bias = params.Get(name_ + ".bias");
    Tensor<T> gx({rows, dim_});
    for (int64_t i = 0; i < rows; ++i) {
      const T* gyi = gy.row(i);
      const T* xh = cache.x_hat.row(i);
      // Gradient through the normalized value.
      T sum_g = T(0);
      T sum_gx = T(0);
      for (int64_t j = 0; j < dim_; ++j) {
        const T gxh = gyi[j] * gain.value[static_cast<size_t>(j)];
        sum_g += gxh;
        sum_gx += gxh * xh[j];
        gain.grad[static_cast<size_t>(j)] += gyi[j] * xh[j];
        bias.grad[static_cast<size_t>(j)] += gyi[j];
      }
      const T is = cache.inv_std[static_cast<size_t>(i)];
      const T inv_n = T(1) / static_cast<T>(dim_);
      T* gxi = gx.row(i);
      for (int64_t j = 0; j < dim_; ++j) {
        const T gxh = gyi[j] * gain.value[static_cast<size_t>(j)];
        gxi[j] = is * (gxh - inv_n * sum_g - inv_n * xh[j] * sum_gx);
      }
    }
    return gx;
  }

 private:
  std::string name_;
  int64_t dim_ = 0;
  double eps_ = 1e-5;
};

/// Exact (erf-based) GELU.
template <typename T>
struct Gelu {
  struct Cache {
    Tensor<T> x;
  };

  static Tensor<T> Forward(const Tensor<T>& x, Cache* cache = nullptr) {
    Tensor<T> y = x;
    for (auto& v : y.raw()) {
      const double u = static_cast<double>(v);
      v = static_cast<T>(0.5 * u * (1.0 + std::erf(u * M_SQRT1_2)));
    }
    if (cache != nullptr) cache->x = x;
    return y;
  }

  static Tensor<T> Backward(const Cache& cache, const Tensor<T>& gy) {
    Tensor<T> gx = gy;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (int64_t i = 0; i < gx.numel(); ++i) {
      const double u = static_cast<double>(cache.x[static_cast<size_t>(i)]);
      const double cdf = 0.5 * (1.0 + std::erf(u * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
      gx[static_cast<size_t>(i)] =
          static_cast<T>(static_cast<double>(gy[static_cast<size_t>(i)]) *
                         (cdf + u * pdf));
    }
    return gx;
  }
};

/// Elementwise tanh (used by the RL policy/value trunks).
template <typename T>
struct TanhLayer {
  struct Cache {
    Tensor<T> y;
  };

  static Tensor<T> Forward(const Tensor<T>& x, Cache* cache = nullptr) {
    Tensor<T> y = x;
    for (auto& v : y.raw()) v = std::tanh(v);
    if (cache != nullptr) cache->y = y;
    return y;
  }

  static Tensor<T> Backward(const Cache& cache, const Tensor<T>& gy) {
    Tensor<T> gx = gy;
    for (int64_t i = 0; i < gx.numel(); ++i) {
      const T y = cache.y[static_cast<size_t>(i)];
      gx[static_cast<size_t>(i)] = gy[static_cast<size_t>(i)] * (T(1) - y * y);
    }
    return gx;
  }
};

/// Masked multi-head self-attention over [B, L, d] activations (passed
/// flattened as [B*L, d]).  Softmax never sees masked keys: per query only
/// the allowed keys are scored, which realizes the additive minus-infinity
/// convention exactly.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::string name, int64_t dim, int64_t heads)
      : name_(std::move(name)),
        dim_(dim),
        heads_(heads),
        proj_q_(name_ + ".q", dim, dim),
        proj_k_(name_ + ".k", dim, dim),
        proj_v_(name_ + ".v", dim, dim),
        proj_o_(name_ + ".o", dim, dim) {
    if (dim % heads != 0) {
      throw std::invalid_argument(name_ + ": heads must divide model dim");
    }
  }

  void Init(ParameterSet<T>& params, Rng& rng, double scale = 1.0) const {
    proj_q_.Init(params, rng, scale);
    proj_k_.Init(params, rng, scale);
    proj_v_.Init(params, rng, scale);
    proj_o_.Init(params, rng, scale);
  }

  struct Cache {
    typename Dense<T>::Cache q_in, k_in, v_in, o_in;
    Tensor<T> q, k, v;      // [B*L, d]
    Tensor<T> probs;        // [B, H, L, L]; zero at masked entries
    int64_t batch = 0;
    int64_t len = 0;
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    int64_t batch, const AttentionMask& mask,
                    Cache* cache = nullptr) const {
    const int64_t rows = x.numel() / dim_;
    const int64_t len = rows / batch;
    if (len * batch != rows) {
      throw std::invalid_argument(name_ + ": rows not divisible by batch");
    }
    if (mask.rows() != len || mask.cols() != len) {
      throw std::invalid_argument(name_ + ": mask size does not match tokens");
    }
    Cache local;
    Cache* c = cache != nullptr ? cache : &local;
    c->batch = batch;
    c->len = len;
    c->q = proj_q_.Forward(params, x, cache ? &c->q_in : nullptr);
    c->k = proj_k_.Forward(params, x, cache ? &c->k_in : nullptr);
    c->v = proj_v_.Forward(params, x, cache ? &c->v_in : nullptr);
    const int64_t hd = dim_ / heads_;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
    Tensor<T> probs({batch, heads_, len, len});
    Tensor<T> attn_out({rows, dim_});
    std::vector<T> scores(static_cast<size_t>(len));
    for (int64_t b = 0; b < batch; ++b) {
      for (int64_t h = 0; h < heads_; ++h) {
        const int64_t off = h * hd;
        for (int64_t i = 0; i < len; ++i) {
          const auto& keys = mask.KeysFor(i);
          const T* qi = c->q.row(b * len + i) + off;
          // Scores for allowed keys only.
          T max_s = -std::numeric_limits<T>::infinity();
          for (size_t n = 0; n < keys.size(); ++n) {
            const T* kj = c->k.row(b * len + keys[n]) + off;
            T s = T(0);
            for (int64_t e = 0; e < hd; ++e) s += qi[e] * kj[e];
            s *= inv_sqrt;
            scores[n] = s;
            if (s > max_s) max_s = s;
          }
          T denom = T(0);
          for (size_t n = 0; n < keys.size(); ++n) {
            scores[n] = std::exp(scores[n] - max_s);
            denom += scores[n];
          }
          T* out = attn_out.row(b * len + i) + off;
          for (int64_t e = 0; e < hd; ++e) out[e] = T(0);
          for (size_t n = 0; n < keys.size(); ++n) {
            const T p = scores[n] / denom;
            probs.at(b, h, i, keys[n]) = p;
            const T* vj = c->v.row(b * len + keys[n]) + off;
            for (int64_t e = 0; e < hd; ++e) out[e] += p * vj[e];
          }
        }
      }
    }
    if (cache != nullptr) c->probs = std::move(probs);
    return proj_o_.Forward(params, attn_out, cache ? &c->o_in : nullptr);
  }

  Tensor<T> Backward(ParameterSet<T>& params, const Cache& c,
                     const AttentionMask& mask, const Tensor<T>& gy) const {
    const int64_t batch = c.batch;
    const int64_t len = c.len;
    const int64_t rows = batch * len;
    const int64_t hd = dim_ / heads_;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
    Tensor<T> g_attn = proj_o_.Backward(params, c.o_in, gy);
    Tensor<T> gq({rows, dim_});
    Tensor<T> gk({rows, dim_});
    Tensor<T> gv({rows, dim_});
    for (int64_t b = 0; b < batch; ++b) {
      for (int64_t h = 0; h < heads_; ++h) {
        const int64_t off = h * hd;
        for (int64_t i = 0; i < len; ++i) {
          const auto& keys = mask.KeysFor(i);
          const T* go = g_attn.row(b * len + i) + off;
          const T* qi = c.q.row(b * len + i) + off;
          // dL/dp_j and the softmax pullback.
          T dot = T(0);
          std::vector<T> gp(keys.size());
          for (size_t n = 0; n < keys.size(); ++n) {
            const T* vj = c.v.row(b * len + keys[n]) + off;
            T g = T(0);
            for (int64_t e = 0; e < hd; ++e) g += go[e] * vj[e];
            gp[n] = g;
            dot += g * c.probs.at(b, h, i, keys[n]);
          }
          T* gqi = gq.row(b * len + i) + off;
          for (size_t n = 0; n < keys.size(); ++n) {
            const T p = c.probs.at(b, h, i, keys[n]);
            const T gs = p * (gp[n] - dot) * inv_sqrt;
            const T* kj = c.k.row(b * len + keys[n]) + off;
            T* gkj = gk.row(b * len + keys[n]) + off;
            T* gvj = gv.row(b * len + keys[n]) + off;
            for (int64_t e = 0; e < hd; ++e) {
              gqi[e] += gs * kj[e];
              gkj[e] += gs * qi[e];
              gvj[e] += p * go[e];
            }
          }
        }
      }
    }
    Tensor<T> gx = proj_q_.Backward(params, c.q_in, gq);
    Tensor<T> gxk = proj_k_.Backward(params, c.k_in, gk);
    Tensor<T> gxv = proj_v_.Backward(params, c.v_in, gv);
    for (int64_t i = 0; i < gx.numel(); ++i) {
      gx[static_cast<size_t>(i)] +=
          gxk[static_cast<size_t>(i)] + gxv[static_cast<size_t>(i)];
    }
    return gx;
  }

 private:
  std::string name_;
  int64_t dim_ = 0;
  int64_t heads_ = 0;
  Dense<T> proj_q_, proj_k_, proj_v_, proj_o_;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_NN_LAYERS_HPP_
