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

#ifndef CHUNKSPACE_NN_TRANSFORMER_HPP_
#define CHUNKSPACE_NN_TRANSFORMER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "chunkspace/nn/layers.hpp"
#include "chunkspace/nn/params.hpp"

namespace chunkspace {

/// Pre-layer-norm transformer block:
///   x = x + Attention(LN1(x));  x = x + FFN(LN2(x))
/// with a GELU feed-forward expansion.
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::string name, int64_t dim, int64_t heads, int64_t ff)
      : name_(std::move(name)),
        ln1_(name_ + ".ln1", dim),
        ln2_(name_ + ".ln2", dim),
        attn_(name_ + ".attn", dim, heads),
        ff1_(name_ + ".ff1", dim, ff),
        ff2_(name_ + ".ff2", ff, dim) {}

  void Init(ParameterSet<T>& params, Rng& rng, double scale = 1.0) const {
    ln1_.Init(params);
    attn_.Init(params, rng, scale);
    ln2_.Init(params);
    ff1_.Init(params, rng, scale);
    ff2_.Init(params, rng, scale);
  }

  struct Cache {
    typename LayerNorm<T>::Cache ln1, ln2;
    typename MultiHeadAttention<T>::Cache attn;
    typename Dense<T>::Cache ff1, ff2;
    typename Gelu<T>::Cache gelu;
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    int64_t batch, const AttentionMask& mask,
                    Cache* cache = nullptr) const {
    Tensor<T> h = ln1_.Forward(params, x, cache ? &cache->ln1 : nullptr);
    Tensor<T> a = attn_.Forward(params, h, batch, mask,
                                cache ? &cache->attn : nullptr);
    Tensor<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) {
      y[static_cast<size_t>(i)] += a[static_cast<size_t>(i)];
    }
    Tensor<T> h2 = ln2_.Forward(params, y, cache ? &cache->ln2 : nullptr);
    Tensor<T> f = ff1_.Forward(params, h2, cache ? &cache->ff1 : nullptr);
    f = Gelu<T>::Forward(f, cache ? &cache->gelu : nullptr);
    f = ff2_.Forward(params, f, cache ? &cache->ff2 : nullptr);
    for (int64_t i = 0; i < y.numel(); ++i) {
      y[static_cast<size_t>(i)] += f[static_cast<size_t>(i)];
    }
    return y;
  }

  Tensor<T> Backward(ParameterSet<T>& params, const Cache& cache,
                     const AttentionMask& mask, const Tensor<T>& gy) const {
    // Feed-forward branch.
    Tensor<T> g = ff2_.Backward(params, cache.ff2, gy);
    g = Gelu<T>::Backward(cache.gelu, g);
    g = ff1_.Backward(params, cache.ff1, g);
    Tensor<T> gmid = ln2_.Backward(params, cache.ln2, g);
    for (int64_t i = 0; i < gmid.numel(); ++i) {
      gmid[static_cast<size_t>(i)] += gy[static_cast<size_t>(i)];
    }
    // Attention branch.
    Tensor<T> ga = attn_.Backward(params, cache.attn, mask, gmid);
    Tensor<T> gx = ln1_.Backward(params, cache.ln1, ga);
    for (int64_t i = 0; i < gx.numel(); ++i) {
      gx[static_cast<size_t>(i)] += gmid[static_cast<size_t>(i)];
    }
    return gx;
  }

 private:
  std::string name_;
  LayerNorm<T> ln1_, ln2_;
  MultiHeadAttention<T> attn_;
  Dense<T> ff1_, ff2_;
};

/// A stack of pre-LN blocks followed by a final layer norm.
template <typename T>
class Transformer {
 public:
  Transformer() = default;
  Transformer(std::string name, int64_t layers, int64_t dim, int64_t heads,
              int64_t ff)
      : name_(std::move(name)), final_ln_(name_ + ".ln_out", dim) {
    blocks_.reserve(static_cast<size_t>(layers));
    for (int64_t l = 0; l < layers; ++l) {
      blocks_.emplace_back(name_ + ".block" + std::to_string(l), dim, heads,
                           ff);
    }
  }

  void Init(ParameterSet<T>& params, Rng& rng, double scale = 1.0) const {
    for (const auto& b : blocks_) b.Init(params, rng, scale);
    final_ln_.Init(params);
  }

  struct Cache {
    std::vector<typename TransformerBlock<T>::Cache> blocks;
    typename LayerNorm<T>::Cache final_ln;
  };

  Tensor<T> Forward(const ParameterSet<T>& params, const Tensor<T>& x,
                    int64_t batch, const AttentionMask& mask,
                    Cache* cache = nullptr) const {
    if (cache != nullptr) cache->blocks.resize(blocks_.size());
    Tensor<T> h = x;
    for (size_t l = 0; l < blocks_.size(); ++l) {
      h = blocks_[l].Forward(params, h, batch, mask,
                             cache ? &cache->blocks[l] : nullptr);
    }
    return final_ln_.Forward(params, h, cache ? &cache->final_ln : nullptr);
  }

  Tensor<T> Backward(ParameterSet<T>& params, const Cache& cache,
                     const AttentionMask& mask, const Tensor<T>& gy) const {
    Tensor<T> g = final_ln_.Backward(params, cache.final_ln, gy);
    for (size_t l = blocks_.size(); l-- > 0;) {
      g = blocks_[l].Backward(params, cache.blocks[l], mask, g);
    }
    return g;
  }

 private:
  std::string name_;
  std::vector<TransformerBlock<T>> blocks_;
  LayerNorm<T> final_ln_;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_NN_TRANSFORMER_HPP_
