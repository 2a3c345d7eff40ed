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

#ifndef CHUNKSPACE_MODEL_TRAINER_HPP_
#define CHUNKSPACE_MODEL_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkspace/corpus/chunks.hpp"
#include "chunkspace/corpus/motion.hpp"
#include "chunkspace/model/chunk_model.hpp"
#include "chunkspace/vq/codebook.hpp"

namespace chunkspace {

struct TrainOptions {
  int64_t epochs = 40;
  int64_t batch_size = 64;
  double lr = 3e-4;
  int64_t stride = 10;        // chunk window stride over the corpus
  double val_fraction = 0.1;  // last fraction of chunks held out
  uint64_t seed = 0;
  double divergence_factor = 10.0;
  int64_t divergence_epochs = 3;
};

struct EpochMetrics {
  int64_t epoch = 0;
  double train_l1 = 0.0;
  double val_l1 = 0.0;
  std::vector<double> code_usage;  // validation assignment fractions (vq)
};

struct TrainResult {
  std::vector<EpochMetrics> trace;
  double final_val_l1 = 0.0;
};

/// True when the loss has exceeded `factor` times the initial loss for the
/// last `window` consecutive epochs (the divergence-abort rule).
inline bool TrainingDiverged(const std::vector<double>& epoch_losses,
                             double initial_loss, double factor,
                             int64_t window) {
  if (static_cast<int64_t>(epoch_losses.size()) < window) return false;
  for (size_t i = epoch_losses.size() - static_cast<size_t>(window);
       i < epoch_losses.size(); ++i) {
    if (!(epoch_losses[i] > factor * initial_loss)) return false;
  }
  return true;
}

namespace detail {

template <typename T>
void FillBatch(const std::vector<ChunkSample>& samples,
               const std::vector<int64_t>& order, int64_t begin, int64_t end,
               int64_t dof, int64_t n, Tensor<T>* q0s, Tensor<T>* chunks) {
  const int64_t B = end - begin;
  *q0s = Tensor<T>({B, dof});
  *chunks = Tensor<T>({B * n, dof});
  for (int64_t b = 0; b < B; ++b) {
    const ChunkSample& s = samples[static_cast<size_t>(
        order[static_cast<size_t>(begin + b)])];
    for (int64_t j = 0; j < dof; ++j) {
      q0s->at(b, j) = static_cast<T>(s.q0[static_cast<size_t>(j)]);
    }
    for (int64_t t = 0; t < n; ++t) {
      for (int64_t j = 0; j < dof; ++j) {
        chunks->at(b * n + t, j) =
            static_cast<T>(s.actions[static_cast<size_t>(t * dof + j)]);
      }
    }
  }
}

inline std::vector<int64_t> Iota(int64_t count) {
  std::vector<int64_t> v(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) v[static_cast<size_t>(i)] = i;
  return v;
}

}  // namespace detail

/// Mean absolute reconstruction error of the model on (normalized) chunk
/// samples, decoding with quantized codes (vq) or posterior means (kl).
/// Also reports validation code usage in vq mode.
template <typename T>
double EvaluateL1(const ChunkModel<T>& model,
                  const std::vector<ChunkSample>& samples,
                  int64_t batch_size = 256,
                  std::vector<double>* code_usage = nullptr) {
  const ModelConfig& cfg = model.cfg;
  const std::vector<int64_t> order =
      detail::Iota(static_cast<int64_t>(samples.size()));
  const std::vector<int64_t> all_steps = ChunkModel<T>::AllSteps(cfg.n);
  double abs_sum = 0.0;
  int64_t abs_count = 0;
  std::vector<int64_t> assignments;
  for (int64_t begin = 0; begin < static_cast<int64_t>(samples.size());
       begin += batch_size) {
    const int64_t end = std::min<int64_t>(
        begin + batch_size, static_cast<int64_t>(samples.size()));
    Tensor<T> q0s, chunks;
    detail::FillBatch(samples, order, begin, end, cfg.dof, cfg.n, &q0s,
                      &chunks);
    Tensor<T> head = model.EncodeBatch(q0s, chunks);
    Tensor<T> latents;
    if (cfg.quantization == Quantization::kVq) {
      std::vector<int64_t> idx;
      Quantize(model.book, head, &idx, &latents);
      assignments.insert(assignments.end(), idx.begin(), idx.end());
    } else {
      const int64_t rows = head.numel() / model.EncoderHeadDim();
      latents = Tensor<T>({rows, cfg.kl_latent_dim});
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t e = 0; e < cfg.kl_latent_dim; ++e) {
          latents.at(r, e) = head.at(r, e);  // posterior mean
        }
      }
    }
    Tensor<T> pred = model.DecodeBatchLatents(q0s, latents, all_steps);
    for (int64_t i = 0; i < pred.numel(); ++i) {
      abs_sum += std::abs(static_cast<double>(pred[static_cast<size_t>(i)]) -
                          static_cast<double>(chunks[static_cast<size_t>(i)]));
    }
    abs_count += pred.numel();
  }
  if (code_usage != nullptr) {
    *code_usage = cfg.quantization == Quantization::kVq
                      ? CodeUsage(assignments, cfg.K)
                      : std::vector<double>{};
  }
  return abs_count > 0 ? abs_sum / static_cast<double>(abs_count) : 0.0;
}

/// Loss pieces reported by a single optimizer step.
template <typename T>
struct StepStats {
  double loss = 0.0;
  double recon_l1 = 0.0;
  double aux = 0.0;  // commitment (vq) or KL divergence (kl)
};

/// Gradient pass for one batch: populates parameter grads and returns the
/// loss pieces plus the encoder outputs and vq assignments (needed for the
/// codebook EMA).  No parameter or codebook update happens here, so tests
/// can compare the analytic grads against finite differences.
template <typename T>
struct GradStats {
  double loss = 0.0;
  double recon_l1 = 0.0;
  double aux = 0.0;  // commitment (vq) or KL divergence (kl)
  Tensor<T> head;
  std::vector<int64_t> indices;
};

template <typename T>
GradStats<T> ComputeGradients(ChunkModel<T>* model, const Tensor<T>& q0s,
                              const Tensor<T>& chunks, Rng* kl_noise_rng) {
  const ModelConfig& cfg = model->cfg;
  const int64_t B = q0s.numel() / cfg.dof;
  const std::vector<int64_t> all_steps = ChunkModel<T>::AllSteps(cfg.n);
  typename ChunkModel<T>::EncodeCache enc_cache;
  typename ChunkModel<T>::DecodeCache dec_cache;
  model->params.ZeroGrads();

  Tensor<T> head = model->EncodeBatch(q0s, chunks, &enc_cache);
  GradStats<T> stats;
  Tensor<T> dhead(head.shape());

  if (cfg.quantization == Quantization::kVq) {
    std::vector<int64_t> indices;
    Tensor<T> z_q;
    Quantize(model->book, head, &indices, &z_q);
    Tensor<T> pred =
        model->DecodeBatchLatents(q0s, StraightThrough(head, z_q), all_steps,
                                  &dec_cache);
    const int64_t count = pred.numel();
    Tensor<T> dpred(pred.shape());
    double abs_sum = 0.0;
    for (int64_t i = 0; i < count; ++i) {
      const double diff = static_cast<double>(pred[static_cast<size_t>(i)]) -
                          static_cast<double>(chunks[static_cast<size_t>(i)]);
      abs_sum += std::abs(diff);
      dpred[static_cast<size_t>(i)] = static_cast<T>(
          (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
          static_cast<double>(count));
    }
    stats.recon_l1 = abs_sum / static_cast<double>(count);
    stats.aux = CommitmentLoss(head, z_q);
    stats.loss = stats.recon_l1 + cfg.lambda_commit * stats.aux;
    // Straight-through: the decoder's latent gradient flows into the
    // encoder output unchanged; the commitment term adds its pull.
    dhead = model->DecodeBackward(dec_cache, dpred);
    CommitmentLossBackward(head, z_q, cfg.lambda_commit, &dhead);
    model->EncodeBackward(enc_cache, dhead);
    if (!std::isfinite(stats.loss)) {
      std::ostringstream os;
      os << "non-finite training loss (recon=" << stats.recon_l1
         << ", commit=" << stats.aux << ", batch rows=" << B << ")";
      throw std::runtime_error(os.str());
    }
    stats.head = std::move(head);
    stats.indices = std::move(indices);
  } else {
    const int64_t kd = cfg.kl_latent_dim;
    const int64_t rows = head.numel() / model->EncoderHeadDim();
    Tensor<T> z({rows, kd});
    Tensor<T> epsilon({rows, kd});
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t e = 0; e < kd; ++e) {
        const double mu = static_cast<double>(head.at(r, e));
        const double log_var = static_cast<double>(head.at(r, kd + e));
        const double noise =
            kl_noise_rng != nullptr ? kl_noise_rng->normal() : 0.0;
        epsilon.at(r, e) = static_cast<T>(noise);
        z.at(r, e) = static_cast<T>(mu + std::exp(0.5 * log_var) * noise);
      }
    }
    Tensor<T> pred = model->DecodeBatchLatents(q0s, z, all_steps, &dec_cache);
    const int64_t count = pred.numel();
    Tensor<T> dpred(pred.shape());
    double abs_sum = 0.0;
    for (int64_t i = 0; i < count; ++i) {
      const double diff = static_cast<double>(pred[static_cast<size_t>(i)]) -
                          static_cast<double>(chunks[static_cast<size_t>(i)]);
      abs_sum += std::abs(diff);
      dpred[static_cast<size_t>(i)] = static_cast<T>(
          (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
          static_cast<double>(count));
    }
    stats.recon_l1 = abs_sum / static_cast<double>(count);
    // KL(N(mu, sigma^2) || N(0, 1)) averaged over latent elements.
    const int64_t kl_count = rows * kd;
    double kl_sum = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t e = 0; e < kd; ++e) {
        const double mu = static_cast<double>(head.at(r, e));
        const double log_var = static_cast<double>(head.at(r, kd + e));
        kl_sum += 0.5 * (mu * mu + std::exp(log_var) - 1.0 - log_var);
      }
    }
    stats.aux = kl_sum / static_cast<double>(kl_count);
    stats.loss = stats.recon_l1 + cfg.beta_kl * stats.aux;
    Tensor<T> dz = model->DecodeBackward(dec_cache, dpred);
    const double kl_scale = cfg.beta_kl / static_cast<double>(kl_count);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t e = 0; e < kd; ++e) {
        const double mu = static_cast<double>(head.at(r, e));
        const double log_var = static_cast<double>(head.at(r, kd + e));
        const double dz_re = static_cast<double>(dz.at(r, e));
        const double eps_re = static_cast<double>(epsilon.at(r, e));
        dhead.at(r, e) = static_cast<T>(dz_re + kl_scale * mu);
        dhead.at(r, kd + e) = static_cast<T>(
            dz_re * eps_re * 0.5 * std::exp(0.5 * log_var) +
            kl_scale * 0.5 * (std::exp(log_var) - 1.0));
      }
    }
    model->EncodeBackward(enc_cache, dhead);
    if (!std::isfinite(stats.loss)) {
      std::ostringstream os;
      os << "non-finite training loss (recon=" << stats.recon_l1
         << ", kl=" << stats.aux << ", batch rows=" << B << ")";
      throw std::runtime_error(os.str());
    }
    stats.head = std::move(head);
  }
  return stats;
}

/// One optimizer step on a batch; returns (loss, recon L1) and performs the
/// EMA codebook update in vq mode.  Exposed separately so tests can drive
/// single steps.
template <typename T>
StepStats<T> TrainStep(ChunkModel<T>* model, const Tensor<T>& q0s,
                       const Tensor<T>& chunks, double lr, Rng* kl_noise_rng) {
  GradStats<T> grads = ComputeGradients(model, q0s, chunks, kl_noise_rng);
  model->params.AdamStep(lr);
  if (model->cfg.quantization == Quantization::kVq) {
    EmaUpdate(&model->book, grads.head, grads.indices);
  }
  StepStats<T> stats;
  stats.loss = grads.loss;
  stats.recon_l1 = grads.recon_l1;
  stats.aux = grads.aux;
  return stats;
}

/// Full training loop: normalizes the corpus in place of the model's stats,
/// extracts strided chunks, holds out the trailing fraction for validation,
/// and runs seeded epochs.  Aborts (throws) when the loss exceeds
/// `divergence_factor` times the first epoch's loss for `divergence_epochs`
/// consecutive epochs.
template <typename T>
TrainResult TrainChunkModel(
    ChunkModel<T>* model, const MotionSequence& corpus,
    const TrainOptions& opts,
    const std::function<void(const EpochMetrics&)>& on_epoch = nullptr) {
  const ModelConfig& cfg = model->cfg;
  if (corpus.dof != cfg.dof) {
    throw std::invalid_argument("corpus dof does not match model dof");
  }
  model->norm = ComputeNormalization(corpus);
  MotionSequence normalized = ApplyNormalization(corpus, model->norm);
  ChunkSplit split =
      SplitChunks(ExtractChunks(normalized, cfg.n, opts.stride),
                  opts.val_fraction);
  if (split.train.empty()) {
    throw std::invalid_argument("no training chunks after split");
  }

  Rng kl_noise(Rng::DeriveSeed(opts.seed, 0x6b6c6e));  // "kln"
  const int64_t n_train = static_cast<int64_t>(split.train.size());
  TrainResult result;
  std::vector<double> epoch_losses;
  double initial_loss = 0.0;
  bool codebook_seeded = cfg.quantization != Quantization::kVq;

  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<int64_t> order = detail::Iota(n_train);
    Rng shuffle_rng(Rng::DeriveSeed(opts.seed, 0x736866,
                                    static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    double l1_sum = 0.0;
    int64_t row_sum = 0;
    for (int64_t begin = 0; begin < n_train; begin += opts.batch_size) {
      const int64_t end = std::min<int64_t>(begin + opts.batch_size, n_train);
      Tensor<T> q0s, chunks;
      detail::FillBatch(split.train, order, begin, end, cfg.dof, cfg.n, &q0s,
                        &chunks);
      if (!codebook_seeded) {
        // Seed the codes from the first batch's encoder outputs so no code
        // starts dead.
        Tensor<T> head = model->EncodeBatch(q0s, chunks);
        Rng init_rng(Rng::DeriveSeed(opts.seed, 0x636b696e));  // "ckin"
        model->book.InitFromBatch(head, init_rng);
        codebook_seeded = true;
      }
      StepStats<T> stats = TrainStep(model, q0s, chunks, opts.lr, &kl_noise);
      const int64_t rows = end - begin;
      loss_sum += stats.loss * static_cast<double>(rows);
      l1_sum += stats.recon_l1 * static_cast<double>(rows);
      row_sum += rows;
    }
    const double epoch_loss = loss_sum / static_cast<double>(row_sum);
    if (epoch == 0) initial_loss = epoch_loss;
    epoch_losses.push_back(epoch_loss);
    if (TrainingDiverged(epoch_losses, initial_loss, opts.divergence_factor,
                         opts.divergence_epochs)) {
      std::ostringstream os;
      os << "training diverged: loss " << epoch_loss << " > "
         << opts.divergence_factor << "x initial " << initial_loss << " for "
         << opts.divergence_epochs << " epochs";
      throw std::runtime_error(os.str());
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_l1 = l1_sum / static_cast<double>(row_sum);
    metrics.val_l1 = split.val.empty()
                         ? metrics.train_l1
                         : EvaluateL1(*model, split.val, opts.batch_size,
                                      &metrics.code_usage);
    result.trace.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  result.final_val_l1 =
      result.trace.empty() ? 0.0 : result.trace.back().val_l1;
  return result;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_MODEL_TRAINER_HPP_
