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

#ifndef CHUNKSPACE_IO_RUN_CONFIG_HPP_
#define CHUNKSPACE_IO_RUN_CONFIG_HPP_

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chunkspace/env/toy_env.hpp"
#include "chunkspace/model/config.hpp"
#include "chunkspace/model/trainer.hpp"
#include "chunkspace/mpc/plan.hpp"
#include "chunkspace/rl/augmented.hpp"
#include "chunkspace/rl/ppo.hpp"

namespace chunkspace {

/// Invalid or malformed configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Synthetic-corpus generation settings.
struct CorpusConfig {
  uint64_t seed = 7;
  double minutes = 4.0;
  int64_t dof = 11;
  int64_t synergies = 3;
  double rate_hz = 50.0;
  double segment_min_s = 1.0;
  double segment_max_s = 3.0;
};

/// Full pipeline configuration: one JSON document, strict keys, and a
/// resolved snapshot written beside every run's outputs.
struct RunConfig {
  uint64_t seed = 0;
  CorpusConfig corpus;
  ModelConfig model;
  TrainOptions train;
  PlannerConfig planner;
  EnvSpec env;
  RLConfig rl;
  PpoConfig ppo;
};

namespace detail {

inline void CheckKeys(const nlohmann::json& obj, const std::string& where,
                      std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigError("config: " + where + " must be a JSON object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (std::string_view key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void ReadField(const nlohmann::json& obj, const std::string& where,
               const char* key, T* out) {
  if (!obj.contains(key)) return;
  try {
    *out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for " + where + "." + key + ": " +
                      e.what());
  }
}

template <typename Enum, typename Parser>
void ReadEnum(const nlohmann::json& obj, const std::string& where,
              const char* key, Enum* out, Parser parse) {
  if (!obj.contains(key)) return;
  std::string name;
  ReadField(obj, where, key, &name);
  try {
    *out = parse(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: " + where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline void ParseCorpusConfig(const nlohmann::json& j, CorpusConfig* cfg) {
  detail::CheckKeys(j, "corpus",
                    {"seed", "minutes", "dof", "synergies", "rate_hz",
                     "segment_min_s", "segment_max_s"});
  detail::ReadField(j, "corpus", "seed", &cfg->seed);
  detail::ReadField(j, "corpus", "minutes", &cfg->minutes);
  detail::ReadField(j, "corpus", "dof", &cfg->dof);
  detail::ReadField(j, "corpus", "synergies", &cfg->synergies);
  detail::ReadField(j, "corpus", "rate_hz", &cfg->rate_hz);
  detail::ReadField(j, "corpus", "segment_min_s", &cfg->segment_min_s);
  detail::ReadField(j, "corpus", "segment_max_s", &cfg->segment_max_s);
}

inline void ParseModelConfig(const nlohmann::json& j, ModelConfig* cfg) {
  detail::CheckKeys(
      j, "model",
      {"dof", "n", "m", "K", "d_latent", "d_model", "layers", "heads", "d_ff",
       "lambda_commit", "conditional", "quantization", "kl_latent_dim",
       "beta_kl", "ema_gamma", "ema_eps"});
  detail::ReadField(j, "model", "dof", &cfg->dof);
  detail::ReadField(j, "model", "n", &cfg->n);
  detail::ReadField(j, "model", "m", &cfg->m);
  detail::ReadField(j, "model", "K", &cfg->K);
  detail::ReadField(j, "model", "d_latent", &cfg->d_latent);
  detail::ReadField(j, "model", "d_model", &cfg->d_model);
  detail::ReadField(j, "model", "layers", &cfg->layers);
  detail::ReadField(j, "model", "heads", &cfg->heads);
  detail::ReadField(j, "model", "d_ff", &cfg->d_ff);
  detail::ReadField(j, "model", "lambda_commit", &cfg->lambda_commit);
  detail::ReadField(j, "model", "conditional", &cfg->conditional);
  detail::ReadEnum(j, "model", "quantization", &cfg->quantization,
                   ParseQuantization);
  detail::ReadField(j, "model", "kl_latent_dim", &cfg->kl_latent_dim);
  detail::ReadField(j, "model", "beta_kl", &cfg->beta_kl);
  detail::ReadField(j, "model", "ema_gamma", &cfg->ema_gamma);
  detail::ReadField(j, "model", "ema_eps", &cfg->ema_eps);
}

inline void ParseTrainOptions(const nlohmann::json& j, TrainOptions* cfg) {
  detail::CheckKeys(j, "train",
                    {"epochs", "batch_size", "lr", "stride", "val_fraction",
                     "seed", "divergence_factor", "divergence_epochs"});
  detail::ReadField(j, "train", "epochs", &cfg->epochs);
  detail::ReadField(j, "train", "batch_size", &cfg->batch_size);
  detail::ReadField(j, "train", "lr", &cfg->lr);
  detail::ReadField(j, "train", "stride", &cfg->stride);
  detail::ReadField(j, "train", "val_fraction", &cfg->val_fraction);
  detail::ReadField(j, "train", "seed", &cfg->seed);
  detail::ReadField(j, "train", "divergence_factor", &cfg->divergence_factor);
  detail::ReadField(j, "train", "divergence_epochs", &cfg->divergence_epochs);
}

inline void ParsePlannerConfig(const nlohmann::json& j, PlannerConfig* cfg) {
  detail::CheckKeys(j, "planner",
                    {"mode", "n_traj", "flip_prob", "sigma", "sigma_baseline",
                     "horizon_s",
                     "noise_knots", "interpolation", "sigma_z", "latent_knots",
                     "seed"});
  detail::ReadEnum(j, "planner", "mode", &cfg->mode, ParsePlannerMode);
  detail::ReadField(j, "planner", "n_traj", &cfg->n_traj);
  detail::ReadField(j, "planner", "flip_prob", &cfg->flip_prob);
  detail::ReadField(j, "planner", "sigma", &cfg->sigma);
  detail::ReadField(j, "planner", "sigma_baseline", &cfg->sigma_baseline);
  detail::ReadField(j, "planner", "horizon_s", &cfg->horizon_s);
  detail::ReadField(j, "planner", "noise_knots", &cfg->noise_knots);
  detail::ReadEnum(j, "planner", "interpolation", &cfg->interpolation,
                   ParseInterpolation);
  detail::ReadField(j, "planner", "sigma_z", &cfg->sigma_z);
  detail::ReadField(j, "planner", "latent_knots", &cfg->latent_knots);
  detail::ReadField(j, "planner", "seed", &cfg->seed);
}

inline void ParseEnvSpec(const nlohmann::json& j, EnvSpec* cfg) {
  detail::CheckKeys(j, "env",
                    {"task", "dof", "dt", "v_max", "w_track", "w_effort",
                     "w_goal", "success_bonus", "hold_tol", "hold_steps",
                     "episode_steps", "goal_step"});
  detail::ReadEnum(j, "env", "task", &cfg->task, ParseTask);
  detail::ReadField(j, "env", "dof", &cfg->dof);
  detail::ReadField(j, "env", "dt", &cfg->dt);
  detail::ReadField(j, "env", "v_max", &cfg->v_max);
  detail::ReadField(j, "env", "w_track", &cfg->w_track);
  detail::ReadField(j, "env", "w_effort", &cfg->w_effort);
  detail::ReadField(j, "env", "w_goal", &cfg->w_goal);
  detail::ReadField(j, "env", "success_bonus", &cfg->success_bonus);
  detail::ReadField(j, "env", "hold_tol", &cfg->hold_tol);
  detail::ReadField(j, "env", "hold_steps", &cfg->hold_steps);
  detail::ReadField(j, "env", "episode_steps", &cfg->episode_steps);
  detail::ReadField(j, "env", "goal_step", &cfg->goal_step);
}

inline void ParseRLConfig(const nlohmann::json& j, RLConfig* cfg) {
  detail::CheckKeys(j, "rl", {"n_c", "residual_bound", "select_bound"});
  detail::ReadField(j, "rl", "n_c", &cfg->n_c);
  detail::ReadField(j, "rl", "residual_bound", &cfg->residual_bound);
  detail::ReadField(j, "rl", "select_bound", &cfg->select_bound);
}

inline void ParsePpoConfig(const nlohmann::json& j, PpoConfig* cfg) {
  detail::CheckKeys(
      j, "ppo",
      {"n_envs", "horizon", "iterations", "epochs", "minibatches", "lr",
       "gamma", "lam", "clip", "vf_coef", "ent_coef", "max_grad_norm",
       "hidden", "init_log_std", "seed"});
  detail::ReadField(j, "ppo", "n_envs", &cfg->n_envs);
  detail::ReadField(j, "ppo", "horizon", &cfg->horizon);
  detail::ReadField(j, "ppo", "iterations", &cfg->iterations);
  detail::ReadField(j, "ppo", "epochs", &cfg->epochs);
  detail::ReadField(j, "ppo", "minibatches", &cfg->minibatches);
  detail::ReadField(j, "ppo", "lr", &cfg->lr);
  detail::ReadField(j, "ppo", "gamma", &cfg->gamma);
  detail::ReadField(j, "ppo", "lam", &cfg->lam);
  detail::ReadField(j, "ppo", "clip", &cfg->clip);
  detail::ReadField(j, "ppo", "vf_coef", &cfg->vf_coef);
  detail::ReadField(j, "ppo", "ent_coef", &cfg->ent_coef);
  detail::ReadField(j, "ppo", "max_grad_norm", &cfg->max_grad_norm);
  detail::ReadField(j, "ppo", "hidden", &cfg->hidden);
  detail::ReadField(j, "ppo", "init_log_std", &cfg->init_log_std);
  detail::ReadField(j, "ppo", "seed", &cfg->seed);
}

/// Parses a full run config; every section is optional, every key strict.
inline RunConfig ParseRunConfig(const nlohmann::json& j) {
  detail::CheckKeys(j, "config",
                    {"seed", "corpus", "model", "train", "planner", "env",
                     "rl", "ppo"});
  RunConfig cfg;
  detail::ReadField(j, "config", "seed", &cfg.seed);
  if (j.contains("corpus")) ParseCorpusConfig(j.at("corpus"), &cfg.corpus);
  if (j.contains("model")) ParseModelConfig(j.at("model"), &cfg.model);
  if (j.contains("train")) ParseTrainOptions(j.at("train"), &cfg.train);
  if (j.contains("planner")) ParsePlannerConfig(j.at("planner"), &cfg.planner);
  if (j.contains("env")) ParseEnvSpec(j.at("env"), &cfg.env);
  if (j.contains("rl")) ParseRLConfig(j.at("rl"), &cfg.rl);
  if (j.contains("ppo")) ParsePpoConfig(j.at("ppo"), &cfg.ppo);
  return cfg;
}

inline RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return ParseRunConfig(j);
}

/// Serializes every resolved field (defaults included) for provenance.
inline nlohmann::json RunConfigToJson(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["corpus"] = {{"seed", cfg.corpus.seed},
                 {"minutes", cfg.corpus.minutes},
                 {"dof", cfg.corpus.dof},
                 {"synergies", cfg.corpus.synergies},
                 {"rate_hz", cfg.corpus.rate_hz},
                 {"segment_min_s", cfg.corpus.segment_min_s},
                 {"segment_max_s", cfg.corpus.segment_max_s}};
  j["model"] = {{"dof", cfg.model.dof},
                {"n", cfg.model.n},
                {"m", cfg.model.m},
                {"K", cfg.model.K},
                {"d_latent", cfg.model.d_latent},
                {"d_model", cfg.model.d_model},
                {"layers", cfg.model.layers},
                {"heads", cfg.model.heads},
                {"d_ff", cfg.model.d_ff},
                {"lambda_commit", cfg.model.lambda_commit},
                {"conditional", cfg.model.conditional},
                {"quantization", QuantizationName(cfg.model.quantization)},
                {"kl_latent_dim", cfg.model.kl_latent_dim},
                {"beta_kl", cfg.model.beta_kl},
                {"ema_gamma", cfg.model.ema_gamma},
                {"ema_eps", cfg.model.ema_eps}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr", cfg.train.lr},
                {"stride", cfg.train.stride},
                {"val_fraction", cfg.train.val_fraction},
                {"seed", cfg.train.seed},
                {"divergence_factor", cfg.train.divergence_factor},
                {"divergence_epochs", cfg.train.divergence_epochs}};
  j["planner"] = {{"mode", PlannerModeName(cfg.planner.mode)},
                  {"n_traj", cfg.planner.n_traj},
                  {"flip_prob", cfg.planner.flip_prob},
                  {"sigma", cfg.planner.sigma},
                  {"sigma_baseline", cfg.planner.sigma_baseline},
                  {"horizon_s", cfg.planner.horizon_s},
                  {"noise_knots", cfg.planner.noise_knots},
                  {"interpolation", InterpolationName(cfg.planner.interpolation)},
                  {"sigma_z", cfg.planner.sigma_z},
                  {"latent_knots", cfg.planner.latent_knots},
                  {"seed", cfg.planner.seed}};
  j["env"] = {{"task", TaskName(cfg.env.task)},
              {"dof", cfg.env.dof},
              {"dt", cfg.env.dt},
              {"v_max", cfg.env.v_max},
              {"w_track", cfg.env.w_track},
              {"w_effort", cfg.env.w_effort},
              {"w_goal", cfg.env.w_goal},
              {"success_bonus", cfg.env.success_bonus},
              {"hold_tol", cfg.env.hold_tol},
              {"hold_steps", cfg.env.hold_steps},
              {"episode_steps", cfg.env.episode_steps},
              {"goal_step", cfg.env.goal_step}};
  j["rl"] = {{"n_c", cfg.rl.n_c},
             {"residual_bound", cfg.rl.residual_bound},
             {"select_bound", cfg.rl.select_bound}};
  j["ppo"] = {{"n_envs", cfg.ppo.n_envs},
              {"horizon", cfg.ppo.horizon},
              {"iterations", cfg.ppo.iterations},
              {"epochs", cfg.ppo.epochs},
              {"minibatches", cfg.ppo.minibatches},
              {"lr", cfg.ppo.lr},
              {"gamma", cfg.ppo.gamma},
              {"lam", cfg.ppo.lam},
              {"clip", cfg.ppo.clip},
              {"vf_coef", cfg.ppo.vf_coef},
              {"ent_coef", cfg.ppo.ent_coef},
              {"max_grad_norm", cfg.ppo.max_grad_norm},
              {"hidden", cfg.ppo.hidden},
              {"init_log_std", cfg.ppo.init_log_std},
              {"seed", cfg.ppo.seed}};
  return j;
}

/// Writes the fully-resolved config snapshot beside a run's outputs.
inline void WriteResolvedConfig(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << RunConfigToJson(cfg).dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("failed writing " + path);
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_IO_RUN_CONFIG_HPP_
