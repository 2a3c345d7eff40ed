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

#ifndef CHUNKSPACE_MODEL_CHUNK_MODEL_HPP_
#define CHUNKSPACE_MODEL_CHUNK_MODEL_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/core/rng.hpp"
#include "chunkspace/core/tensor.hpp"
#include "chunkspace/corpus/motion.hpp"
#include "chunkspace/model/config.hpp"
#include "chunkspace/nn/layers.hpp"
#include "chunkspace/nn/params.hpp"
#include "chunkspace/nn/transformer.hpp"
#include "chunkspace/vq/codebook.hpp"

namespace chunkspace {

/// Time of latent token k within a chunk of n steps carrying m tokens:
/// t(k) = k * n / m, in timesteps from the chunk start.
inline double LatentTime(int64_t k, int64_t n, int64_t m) {
  if (k < 0 || k >= m) {
    throw std::out_of_range("latent index " + std::to_string(k) +
                            " outside [0, " + std::to_string(m) + ")");
  }
  return static_cast<double>(k * n) / static_cast<double>(m);
}

/// Causality by token time, not position: query i may attend key j iff
/// time(j) <= time(i).
inline AttentionMask BuildDecoderMask(const std::vector<double>& times) {
  const int64_t L = static_cast<int64_t>(times.size());
  std::vector<uint8_t> allowed(static_cast<size_t>(L * L), 0);
  for (int64_t i = 0; i < L; ++i) {
    for (int64_t j = 0; j < L; ++j) {
      if (times[static_cast<size_t>(j)] <= times[static_cast<size_t>(i)]) {
        allowed[static_cast<size_t>(i * L + j)] = 1;
      }
    }
  }
  return AttentionMask(L, L, std::move(allowed));
}

/// A chunk's worth of latents: code indices in vq mode, continuous vectors
/// (one row per slot) in kl mode.
template <typename T>
struct LatentSeq {
  std::vector<int64_t> indices;  // [m] when vq
  Tensor<T> values;              // [m, latent_dim] when kl
};

/// Conditional chunk autoencoder: a bidirectional transformer encoder that
/// summarizes (q0, action chunk) into m latent tokens, and a time-masked
/// transformer decoder that reconstructs per-step actions from (q0, latents).
template <typename T>
class ChunkModel {
 public:
  ChunkModel() = default;

  ChunkModel(const ModelConfig& config, uint64_t seed) : cfg(config) {
    cfg.Validate();
    Rng rng(Rng::DeriveSeed(seed, 0x6d6f64656c));  // "model"
    const int64_t c = cfg.conditional ? 1 : 0;
    enc_in_act_ = Dense<T>("enc.in_act", cfg.dof, cfg.d_model);
    enc_in_q0_ = Dense<T>("enc.in_q0", cfg.dof, cfg.d_model);
    enc_out_ = Dense<T>("enc.out", cfg.d_model, EncoderHeadDim());
    enc_tf_ = Transformer<T>("enc", cfg.layers, cfg.d_model, cfg.heads,
                             cfg.d_ff);
    dec_in_q0_ = Dense<T>("dec.in_q0", cfg.dof, cfg.d_model);
    dec_in_lat_ = Dense<T>("dec.in_lat", cfg.latent_dim(), cfg.d_model);
    dec_out_ = Dense<T>("dec.out", cfg.d_model, cfg.dof);
    dec_tf_ = Transformer<T>("dec", cfg.layers, cfg.d_model, cfg.heads,
                             cfg.d_ff);

    enc_in_act_.Init(params, rng);
    if (c) enc_in_q0_.Init(params, rng);
    CreateEmbedding("enc.query", cfg.m, rng);
    CreateEmbedding("enc.pos", cfg.n, rng);
    if (c) CreateEmbedding("enc.q0_tok", 1, rng);
    enc_tf_.Init(params, rng);
    enc_out_.Init(params, rng);
    if (c) dec_in_q0_.Init(params, rng);
    dec_in_lat_.Init(params, rng);
    CreateEmbedding("dec.slot", cfg.m, rng);
    CreateEmbedding("dec.query", cfg.n, rng);
    if (c) CreateEmbedding("dec.q0_tok", 1, rng);
    dec_tf_.Init(params, rng);
    dec_out_.Init(params, rng);

    if (cfg.quantization == Quantization::kVq) {
      book = Codebook<T>(cfg.K, cfg.d_latent, cfg.ema_gamma, cfg.ema_eps);
    }
    enc_mask_ = AttentionMask::Full(cfg.encoder_tokens());
    norm.offset.assign(static_cast<size_t>(cfg.dof), 0.0);
    norm.scale.assign(static_cast<size_t>(cfg.dof), 1.0);
  }

  /// Encoder head width: d_latent for vq; (mu, log-variance) pairs for kl.
  int64_t EncoderHeadDim() const {
    return cfg.quantization == Quantization::kKl ? 2 * cfg.kl_latent_dim
                                                 : cfg.d_latent;
  }

  std::vector<double> DecoderTokenTimes(
      const std::vector<int64_t>& query_steps) const {
    std::vector<double> times;
    times.reserve(static_cast<size_t>(cfg.decoder_tokens(
        static_cast<int64_t>(query_steps.size()))));
    if (cfg.conditional) times.push_back(0.0);  // q0 anchors time zero
    for (int64_t k = 0; k < cfg.m; ++k) {
      times.push_back(LatentTime(k, cfg.n, cfg.m));
    }
    for (int64_t s : query_steps) {
      if (s < 0 || s >= cfg.n) {
        throw std::out_of_range("query step " + std::to_string(s) +
                                " outside [0, " + std::to_string(cfg.n) + ")");
      }
      // Actions begin one step after q0.
      times.push_back(static_cast<double>(s) + 1.0);
    }
    return times;
  }

  static std::vector<int64_t> AllSteps(int64_t n) {
    std::vector<int64_t> steps(static_cast<size_t>(n));
    for (int64_t s = 0; s < n; ++s) steps[static_cast<size_t>(s)] = s;
    return steps;
  }

  struct EncodeCache {
    typename Dense<T>::Cache in_act, in_q0, out;
    typename Transformer<T>::Cache tf;
    int64_t batch = 0;
  };

  /// q0s: [B, dof]; chunks: [B*n, dof] (normalized).  Returns the encoder
  /// head outputs at the m query slots, [B*m, EncoderHeadDim()].
  Tensor<T> EncodeBatch(const Tensor<T>& q0s, const Tensor<T>& chunks,
                        EncodeCache* cache = nullptr) const {
    const int64_t B = q0s.numel() / cfg.dof;
    if (chunks.numel() != B * cfg.n * cfg.dof) {
      throw std::invalid_argument("encode: chunk tensor shape mismatch");
    }
    const int64_t c = cfg.conditional ? 1 : 0;
    const int64_t L = cfg.encoder_tokens();
    Tensor<T> proj_a = enc_in_act_.Forward(params, chunks,
                                           cache ? &cache->in_act : nullptr);
    Tensor<T> proj_q;
    if (c) {
      proj_q = enc_in_q0_.Forward(params, q0s, cache ? &cache->in_q0 : nullptr);
    }
    const Tensor<T>& query = params.Get("enc.query").value;
    const Tensor<T>& pos = params.Get("enc.pos").value;
    Tensor<T> x({B * L, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t k = 0; k < cfg.m; ++k) {
        CopyAdd(query.row(k), nullptr, x.row(b * L + k));
      }
      if (c) {
        CopyAdd(proj_q.row(b), params.Get("enc.q0_tok").value.row(0),
                x.row(b * L + cfg.m));
      }
      for (int64_t s = 0; s < cfg.n; ++s) {
        CopyAdd(proj_a.row(b * cfg.n + s), pos.row(s),
                x.row(b * L + cfg.m + c + s));
      }
    }
    Tensor<T> h = enc_tf_.Forward(params, x, B, enc_mask_,
                                  cache ? &cache->tf : nullptr);
    Tensor<T> hq({B * cfg.m, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t k = 0; k < cfg.m; ++k) {
        CopyAdd(h.row(b * L + k), nullptr, hq.row(b * cfg.m + k));
      }
    }
    if (cache != nullptr) cache->batch = B;
    return enc_out_.Forward(params, hq, cache ? &cache->out : nullptr);
  }

  /// Accumulates gradients for every encoder parameter given dL/d(head
  /// output).
  void EncodeBackward(const EncodeCache& cache, const Tensor<T>& dz) {
    const int64_t B = cache.batch;
    const int64_t c = cfg.conditional ? 1 : 0;
    const int64_t L = cfg.encoder_tokens();
    Tensor<T> ghq = enc_out_.Backward(params, cache.out, dz);
    Tensor<T> gh({B * L, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t k = 0; k < cfg.m; ++k) {
        AddInto(ghq.row(b * cfg.m + k), gh.row(b * L + k));
      }
    }
    Tensor<T> gx = enc_tf_.Backward(params, cache.tf, enc_mask_, gh);
    Param<T>& query = params.Get("enc.query");
    Param<T>& pos = params.Get("enc.pos");
    Tensor<T> g_proj_a({B * cfg.n, cfg.d_model});
    Tensor<T> g_proj_q;
    if (c) g_proj_q = Tensor<T>({B, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t k = 0; k < cfg.m; ++k) {
        AddInto(gx.row(b * L + k), query.grad.row(k));
      }
      if (c) {
        AddInto(gx.row(b * L + cfg.m), params.Get("enc.q0_tok").grad.row(0));
        AddInto(gx.row(b * L + cfg.m), g_proj_q.row(b));
      }
      for (int64_t s = 0; s < cfg.n; ++s) {
        AddInto(gx.row(b * L + cfg.m + c + s), pos.grad.row(s));
        AddInto(gx.row(b * L + cfg.m + c + s), g_proj_a.row(b * cfg.n + s));
      }
    }
    enc_in_act_.Backward(params, cache.in_act, g_proj_a);
    if (c) enc_in_q0_.Backward(params, cache.in_q0, g_proj_q);
  }

  struct DecodeCache {
    typename Dense<T>::Cache in_q0, in_lat, out;
    typename Transformer<T>::Cache tf;
    AttentionMask mask;
    std::vector<int64_t> query_steps;
    int64_t batch = 0;
  };

  /// q0s: [B, dof]; latents: [B*m, latent_dim()] continuous latent vectors
  /// (quantized codes in vq mode).  Returns actions [B*|Q|, dof].
  Tensor<T> DecodeBatchLatents(const Tensor<T>& q0s, const Tensor<T>& latents,
                               const std::vector<int64_t>& query_steps,
                               DecodeCache* cache = nullptr) const {
    const int64_t B = q0s.numel() / cfg.dof;
    if (latents.numel() != B * cfg.m * cfg.latent_dim()) {
      throw std::invalid_argument("decode: latent tensor shape mismatch");
    }
    const int64_t c = cfg.conditional ? 1 : 0;
    const int64_t Q = static_cast<int64_t>(query_steps.size());
    const int64_t L = cfg.decoder_tokens(Q);
    AttentionMask local_mask = BuildDecoderMask(DecoderTokenTimes(query_steps));
    Tensor<T> proj_l = dec_in_lat_.Forward(params, latents,
                                           cache ? &cache->in_lat : nullptr);
    Tensor<T> proj_q;
    if (c) {
      proj_q = dec_in_q0_.Forward(params, q0s, cache ? &cache->in_q0 : nullptr);
    }
    const Tensor<T>& slot = params.Get("dec.slot").value;
    const Tensor<T>& query = params.Get("dec.query").value;
    Tensor<T> x({B * L, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      if (c) {
        CopyAdd(proj_q.row(b), params.Get("dec.q0_tok").value.row(0),
                x.row(b * L));
      }
      for (int64_t k = 0; k < cfg.m; ++k) {
        CopyAdd(proj_l.row(b * cfg.m + k), slot.row(k), x.row(b * L + c + k));
      }
      for (int64_t i = 0; i < Q; ++i) {
        CopyAdd(query.row(query_steps[static_cast<size_t>(i)]), nullptr,
                x.row(b * L + c + cfg.m + i));
      }
    }
    Tensor<T> h = dec_tf_.Forward(params, x, B, local_mask,
                                  cache ? &cache->tf : nullptr);
    Tensor<T> hq({B * Q, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t i = 0; i < Q; ++i) {
        CopyAdd(h.row(b * L + c + cfg.m + i), nullptr, hq.row(b * Q + i));
      }
    }
    if (cache != nullptr) {
      cache->mask = std::move(local_mask);
      cache->query_steps = query_steps;
      cache->batch = B;
    }
    return dec_out_.Forward(params, hq, cache ? &cache->out : nullptr);
  }

  /// Accumulates decoder parameter gradients; returns dL/d(latents)
  /// [B*m, latent_dim()].
  Tensor<T> DecodeBackward(const DecodeCache& cache, const Tensor<T>& dy) {
    const int64_t B = cache.batch;
    const int64_t c = cfg.conditional ? 1 : 0;
    const int64_t Q = static_cast<int64_t>(cache.query_steps.size());
    const int64_t L = cfg.decoder_tokens(Q);
    Tensor<T> ghq = dec_out_.Backward(params, cache.out, dy);
    Tensor<T> gh({B * L, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t i = 0; i < Q; ++i) {
        AddInto(ghq.row(b * Q + i), gh.row(b * L + c + cfg.m + i));
      }
    }
    Tensor<T> gx = dec_tf_.Backward(params, cache.tf, cache.mask, gh);
    Param<T>& slot = params.Get("dec.slot");
    Param<T>& query = params.Get("dec.query");
    Tensor<T> g_proj_l({B * cfg.m, cfg.d_model});
    Tensor<T> g_proj_q;
    if (c) g_proj_q = Tensor<T>({B, cfg.d_model});
    for (int64_t b = 0; b < B; ++b) {
      if (c) {
        AddInto(gx.row(b * L), params.Get("dec.q0_tok").grad.row(0));
        AddInto(gx.row(b * L), g_proj_q.row(b));
      }
      for (int64_t k = 0; k < cfg.m; ++k) {
        AddInto(gx.row(b * L + c + k), slot.grad.row(k));
        AddInto(gx.row(b * L + c + k), g_proj_l.row(b * cfg.m + k));
      }
      for (int64_t i = 0; i < Q; ++i) {
        AddInto(gx.row(b * L + c + cfg.m + i),
                query.grad.row(cache.query_steps[static_cast<size_t>(i)]));
      }
    }
    if (c) dec_in_q0_.Backward(params, cache.in_q0, g_proj_q);
    return dec_in_lat_.Backward(params, cache.in_lat, g_proj_l);
  }

  /// Single-sample encode: returns the pre-quantization latents
  /// [m, d_latent] (vq) or the posterior means [m, kl_latent_dim] (kl).
  Tensor<T> Encode(const std::vector<T>& q0,
                   const Tensor<T>& chunk) const {
    Tensor<T> q0s({1, cfg.dof});
    for (int64_t j = 0; j < cfg.dof; ++j) {
      q0s[static_cast<size_t>(j)] = q0[static_cast<size_t>(j)];
    }
    Tensor<T> head = EncodeBatch(q0s, chunk);
    if (cfg.quantization == Quantization::kVq) return head;
    Tensor<T> mu({cfg.m, cfg.kl_latent_dim});
    for (int64_t k = 0; k < cfg.m; ++k) {
      for (int64_t e = 0; e < cfg.kl_latent_dim; ++e) {
        mu.at(k, e) = head.at(k, e);
      }
    }
    return mu;
  }

  /// Looks up latent vectors for a LatentSeq (codebook rows in vq mode).
  Tensor<T> LatentVectors(const LatentSeq<T>& seq) const {
    if (cfg.quantization == Quantization::kVq) {
      if (static_cast<int64_t>(seq.indices.size()) != cfg.m) {
        throw std::invalid_argument("latent sequence must have m indices");
      }
      Tensor<T> values({cfg.m, cfg.d_latent});
      for (int64_t k = 0; k < cfg.m; ++k) {
        const int64_t idx = seq.indices[static_cast<size_t>(k)];
        if (idx < 0 || idx >= cfg.K) {
          throw std::out_of_range("code index out of range");
        }
        CopyAdd(book.codes.row(idx), nullptr, values.row(k), cfg.d_latent);
      }
      return values;
    }
    if (seq.values.numel() != cfg.m * cfg.kl_latent_dim) {
      throw std::invalid_argument("latent sequence value shape mismatch");
    }
    return seq.values;
  }

  /// Single-sample decode at the given query steps -> [|Q|, dof].
  Tensor<T> Decode(const std::vector<T>& q0, const LatentSeq<T>& seq,
                   const std::vector<int64_t>& query_steps) const {
    Tensor<T> q0s({1, cfg.dof});
    for (int64_t j = 0; j < cfg.dof; ++j) {
      q0s[static_cast<size_t>(j)] = q0[static_cast<size_t>(j)];
    }
    return DecodeBatchLatents(q0s, LatentVectors(seq), query_steps);
  }

  /// Decodes a full chunk with every slot set to the same code (vq mode).
  Tensor<T> DecodeChunkFromCode(const std::vector<T>& q0, int64_t code) const {
    LatentSeq<T> seq;
    seq.indices.assign(static_cast<size_t>(cfg.m), code);
    return Decode(q0, seq, AllSteps(cfg.n));
  }

  ModelConfig cfg;
  ParameterSet<T> params;
  Codebook<T> book;
  NormalizationStats norm;

 private:
  void CreateEmbedding(const std::string& name, int64_t rows, Rng& rng) {
    Param<T>& p = params.Create(name, {rows, cfg.d_model});
    for (auto& v : p.value.raw()) v = static_cast<T>(rng.normal(0.0, 0.02));
  }

  // dst = src (+ add); rows are d_model wide unless stated otherwise.
  void CopyAdd(const T* src, const T* add, T* dst,
               int64_t width = -1) const {
    if (width < 0) width = cfg.d_model;
    for (int64_t e = 0; e < width; ++e) {
      dst[e] = add != nullptr ? src[e] + add[e] : src[e];
    }
  }

  void AddInto(const T* src, T* dst, int64_t width = -1) const {
    if (width < 0) width = cfg.d_model;
    for (int64_t e = 0; e < width; ++e) dst[e] += src[e];
  }

  Dense<T> enc_in_act_, enc_in_q0_, enc_out_;
  Dense<T> dec_in_q0_, dec_in_lat_, dec_out_;
  Transformer<T> enc_tf_, dec_tf_;
  AttentionMask enc_mask_;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_MODEL_CHUNK_MODEL_HPP_
