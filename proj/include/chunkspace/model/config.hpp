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

#ifndef CHUNKSPACE_MODEL_CONFIG_HPP_
#define CHUNKSPACE_MODEL_CONFIG_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace chunkspace {

enum class Quantization { kVq, kKl };

inline Quantization ParseQuantization(const std::string& s) {
  if (s == "vq") return Quantization::kVq;
  if (s == "kl") return Quantization::kKl;
  throw std::invalid_argument("unknown quantization variant: " + s);
}

inline const char* QuantizationName(Quantization q) {
  return q == Quantization::kVq ? "vq" : "kl";
}

/// Architecture and loss settings for the chunk autoencoder.  Paper-scale
/// transformer dims are 128/3/4/512; the desk default trains in minutes on
/// one CPU core.
struct ModelConfig {
  int64_t dof = 11;        // action dimension D
  int64_t n = 50;          // chunk length (timesteps)
  int64_t m = 5;           // latent tokens per chunk
  int64_t K = 4;           // codebook size
  int64_t d_latent = 16;   // vq code dimension
  int64_t d_model = 32;    // transformer width (paper: 128)
  int64_t layers = 2;      // transformer depth (paper: 3)
  int64_t heads = 2;       // attention heads (paper: 4)
  int64_t d_ff = 128;      // feed-forward width (paper: 512)
  double lambda_commit = 0.1;
  bool conditional = true;
  Quantization quantization = Quantization::kVq;
  int64_t kl_latent_dim = 6;
  double beta_kl = 1e-3;
  double ema_gamma = 0.99;
  double ema_eps = 1e-5;

  /// Latent vector width entering the decoder.
  int64_t latent_dim() const {
    return quantization == Quantization::kKl ? kl_latent_dim : d_latent;
  }

  /// Encoder token count: [m queries][q0 when conditional][n action rows].
  int64_t encoder_tokens() const { return m + (conditional ? 1 : 0) + n; }

  /// Decoder token count for q query steps.
  int64_t decoder_tokens(int64_t queries) const {
    return (conditional ? 1 : 0) + m + queries;
  }

  void Validate() const {
    if (dof < 1) throw std::invalid_argument("dof must be >= 1");
    if (n < 1 || m < 1) throw std::invalid_argument("n and m must be >= 1");
    if (n % m != 0) throw std::invalid_argument("n must be divisible by m");
    if (d_latent < 1) throw std::invalid_argument("d_latent must be >= 1");
    if (quantization == Quantization::kVq && K < 2) {
      throw std::invalid_argument("vq quantization needs K >= 2");
    }
    if (quantization == Quantization::kKl && kl_latent_dim < 1) {
      throw std::invalid_argument("kl_latent_dim must be >= 1");
    }
    if (d_model < 1 || layers < 1 || heads < 1 || d_ff < 1) {
      throw std::invalid_argument("transformer dims must be >= 1");
    }
    if (d_model % heads != 0) {
      throw std::invalid_argument("heads must divide d_model");
    }
    if (lambda_commit < 0.0 || beta_kl < 0.0) {
      throw std::invalid_argument("loss weights must be >= 0");
    }
  }

  static ModelConfig Desk() { return ModelConfig{}; }

  static ModelConfig PaperScale() {
    ModelConfig c;
    c.d_model = 128;
    c.layers = 3;
    c.heads = 4;
    c.d_ff = 512;
    return c;
  }
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_MODEL_CONFIG_HPP_
