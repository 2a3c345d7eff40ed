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

#ifndef CHUNKSPACE_IO_CHECKPOINT_HPP_
#define CHUNKSPACE_IO_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkspace/model/chunk_model.hpp"
#include "chunkspace/model/config.hpp"

namespace chunkspace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

inline constexpr char kCheckpointMagic[7] = {'V', 'Q', 'A', 'C', 'E', '1',
                                             '\0'};

inline nlohmann::json ModelConfigToJson(const ModelConfig& cfg) {
  return nlohmann::json{{"dof", cfg.dof},
                        {"n", cfg.n},
                        {"m", cfg.m},
                        {"K", cfg.K},
                        {"d_latent", cfg.d_latent},
                        {"d_model", cfg.d_model},
                        {"layers", cfg.layers},
                        {"heads", cfg.heads},
                        {"d_ff", cfg.d_ff},
                        {"lambda_commit", cfg.lambda_commit},
                        {"conditional", cfg.conditional},
                        {"quantization", QuantizationName(cfg.quantization)},
                        {"kl_latent_dim", cfg.kl_latent_dim},
                        {"beta_kl", cfg.beta_kl},
                        {"ema_gamma", cfg.ema_gamma},
                        {"ema_eps", cfg.ema_eps}};
}

inline ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.dof = j.at("dof").get<int64_t>();
  cfg.n = j.at("n").get<int64_t>();
  cfg.m = j.at("m").get<int64_t>();
  cfg.K = j.at("K").get<int64_t>();
  cfg.d_latent = j.at("d_latent").get<int64_t>();
  cfg.d_model = j.at("d_model").get<int64_t>();
  cfg.layers = j.at("layers").get<int64_t>();
  cfg.heads = j.at("heads").get<int64_t>();
  cfg.d_ff = j.at("d_ff").get<int64_t>();
  cfg.lambda_commit = j.at("lambda_commit").get<double>();
  cfg.conditional = j.at("conditional").get<bool>();
  cfg.quantization = ParseQuantization(j.at("quantization").get<std::string>());
  cfg.kl_latent_dim = j.at("kl_latent_dim").get<int64_t>();
  cfg.beta_kl = j.at("beta_kl").get<double>();
  cfg.ema_gamma = j.at("ema_gamma").get<double>();
  cfg.ema_eps = j.at("ema_eps").get<double>();
  cfg.Validate();
  return cfg;
}

/// Writes the container: magic `VQACE1\0`, 4-byte little-endian JSON
/// length, JSON metadata (architecture, variant flags, normalization stats,
/// codebook contents, tensor manifest), then the named tensors as
/// little-endian float32 in manifest order.
/// Writes a generic parameter container: magic, length-prefixed JSON
/// metadata (a "tensors" manifest is appended), then f32 little-endian
/// payloads in manifest order.  Model checkpoints and serialized policies
/// share this layout.
template <typename T>
void SaveParamsFile(const ParameterSet<T>& params, nlohmann::json meta,
                    const std::string& path) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const std::string& name : params.names()) {
    const auto& p = params.Get(name);
    manifest.push_back({{"name", name}, {"shape", p.value.shape()}});
  }
  meta["tensors"] = manifest;

  const std::string meta_str = meta.dump();
  if (meta_str.size() > 0xffffffffull) {
    throw std::runtime_error("checkpoint metadata too large");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint32_t len = static_cast<uint32_t>(meta_str.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  std::vector<float> buffer;
  for (const std::string& name : params.names()) {
    const auto& value = params.Get(name).value;
    buffer.resize(static_cast<size_t>(value.numel()));
    for (int64_t i = 0; i < value.numel(); ++i) {
      buffer[static_cast<size_t>(i)] =
          static_cast<float>(value[static_cast<size_t>(i)]);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

/// Fills an existing ParameterSet from a container written by
/// SaveParamsFile.  Parameter names, order, and shapes must match the
/// manifest exactly.  Returns the metadata.
template <typename T>
nlohmann::json LoadParamsFile(ParameterSet<T>* params,
                              const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  const nlohmann::json meta = nlohmann::json::parse(meta_str);
  const nlohmann::json& manifest = meta.at("tensors");
  if (manifest.size() != params->size()) {
    throw std::runtime_error("tensor manifest size mismatch: " + path);
  }
  std::vector<float> buffer;
  for (size_t i = 0; i < params->size(); ++i) {
    auto& p = params->at(i);
    const nlohmann::json& entry = manifest.at(i);
    if (entry.at("name").template get<std::string>() != params->names()[i]) {
      throw std::runtime_error("tensor name mismatch at index " +
                               std::to_string(i) + ": " + path);
    }
    const auto shape = entry.at("shape").template get<std::vector<int64_t>>();
    if (shape != p.value.shape()) {
      throw std::runtime_error("tensor shape mismatch for " +
                               params->names()[i] + ": " + path);
    }
    buffer.resize(static_cast<size_t>(p.value.numel()));
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    for (int64_t e = 0; e < p.value.numel(); ++e) {
      p.value[static_cast<size_t>(e)] =
          static_cast<T>(buffer[static_cast<size_t>(e)]);
    }
  }
  return meta;
}

template <typename T>
void SaveCheckpoint(const ChunkModel<T>& model, const std::string& path) {
  nlohmann::json meta;
  meta["model"] = ModelConfigToJson(model.cfg);
  meta["normalization"] = {{"offset", model.norm.offset},
                           {"scale", model.norm.scale}};
  if (model.cfg.quantization == Quantization::kVq) {
    nlohmann::json book;
    book["codes"] = std::vector<std::vector<double>>();
    book["ema_sums"] = std::vector<std::vector<double>>();
    for (int64_t i = 0; i < model.book.K; ++i) {
      std::vector<double> code(static_cast<size_t>(model.book.d));
      std::vector<double> sum(static_cast<size_t>(model.book.d));
      for (int64_t e = 0; e < model.book.d; ++e) {
        code[static_cast<size_t>(e)] =
            static_cast<double>(model.book.codes.at(i, e));
        sum[static_cast<size_t>(e)] =
            static_cast<double>(model.book.ema_sums.at(i, e));
      }
      book["codes"].push_back(code);
      book["ema_sums"].push_back(sum);
    }
    std::vector<double> counts(static_cast<size_t>(model.book.K));
    for (int64_t i = 0; i < model.book.K; ++i) {
      counts[static_cast<size_t>(i)] =
          static_cast<double>(model.book.ema_counts[static_cast<size_t>(i)]);
    }
    book["ema_counts"] = counts;
    book["lifetime"] = model.book.lifetime;
    meta["codebook"] = book;
  }
  SaveParamsFile(model.params, std::move(meta), path);
}

template <typename T = float>
ChunkModel<T> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint metadata: " + path);
  nlohmann::json meta = nlohmann::json::parse(meta_str);

  ModelConfig cfg = ModelConfigFromJson(meta.at("model"));
  ChunkModel<T> model(cfg, /*seed=*/0);
  model.norm.offset = meta.at("normalization").at("offset")
                          .template get<std::vector<double>>();
  model.norm.scale = meta.at("normalization").at("scale")
                         .template get<std::vector<double>>();
  if (cfg.quantization == Quantization::kVq) {
    const nlohmann::json& book = meta.at("codebook");
    for (int64_t i = 0; i < cfg.K; ++i) {
      for (int64_t e = 0; e < cfg.d_latent; ++e) {
        model.book.codes.at(i, e) = static_cast<T>(
            book.at("codes").at(static_cast<size_t>(i))
                .at(static_cast<size_t>(e)).template get<double>());
        model.book.ema_sums.at(i, e) = static_cast<T>(
            book.at("ema_sums").at(static_cast<size_t>(i))
                .at(static_cast<size_t>(e)).template get<double>());
      }
      model.book.ema_counts[static_cast<size_t>(i)] = static_cast<T>(
          book.at("ema_counts").at(static_cast<size_t>(i))
              .template get<double>());
      model.book.lifetime[static_cast<size_t>(i)] =
          book.at("lifetime").at(static_cast<size_t>(i))
              .template get<int64_t>();
    }
  }

  const nlohmann::json& manifest = meta.at("tensors");
  if (manifest.size() != model.params.names().size()) {
    throw std::runtime_error("checkpoint tensor manifest size mismatch");
  }
  std::vector<float> buffer;
  for (size_t i = 0; i < manifest.size(); ++i) {
    const std::string name = manifest[i].at("name").get<std::string>();
    const std::vector<int64_t> shape =
        manifest[i].at("shape").get<std::vector<int64_t>>();
    if (name != model.params.names()[i]) {
      throw std::runtime_error("checkpoint tensor order mismatch at '" + name +
                               "', expected '" + model.params.names()[i] + "'");
    }
    auto& p = model.params.Get(name);
    if (shape != p.value.shape()) {
      throw std::runtime_error("checkpoint tensor shape mismatch for '" +
                               name + "'");
    }
    buffer.resize(static_cast<size_t>(p.value.numel()));
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated tensor data for '" + name +
                                      "' in " + path);
    for (int64_t k = 0; k < p.value.numel(); ++k) {
      p.value[static_cast<size_t>(k)] =
          static_cast<T>(buffer[static_cast<size_t>(k)]);
    }
  }
  return model;
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_IO_CHECKPOINT_HPP_
