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

// Command-line front end for the chunkspace pipeline: synthetic corpus
// generation, chunk-autoencoder training and evaluation, latent-sampling
// MPC episodes and budget sweeps, and chunked/baseline RL runs.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime abort.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chunkspace/corpus/csv.hpp"
#include "chunkspace/corpus/synergy.hpp"
#include "chunkspace/env/toy_env.hpp"
#include "chunkspace/io/checkpoint.hpp"
#include "chunkspace/io/run_config.hpp"
#include "chunkspace/model/trainer.hpp"
#include "chunkspace/mpc/planner.hpp"
#include "chunkspace/rl/augmented.hpp"
#include "chunkspace/rl/ppo.hpp"

namespace {

using nlohmann::json;
namespace cs = chunkspace;

cs::RunConfig LoadConfigOrDefault(const std::string& path) {
  if (path.empty()) return cs::RunConfig{};
  return cs::LoadRunConfig(path);
}

bool ParseOnOff(const std::string& value, const char* flag) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw cs::ConfigError(std::string("config: ") + flag +
                        " must be 'on' or 'off'");
}

cs::TaskKind ParseEnvFlag(const std::string& value) {
  if (value == "a" || value == "A") return cs::TaskKind::kTracking;
  if (value == "b" || value == "B") return cs::TaskKind::kReachHold;
  return cs::ParseTask(value);
}

void EnsureDir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

cs::ToyEnv BuildEnv(const cs::RunConfig& cfg, cs::TaskKind task,
                    const std::string& corpus_path) {
  cs::EnvSpec spec = cfg.env;
  spec.task = task;
  if (task == cs::TaskKind::kTracking) {
    if (corpus_path.empty()) {
      throw cs::ConfigError("config: tracking env needs --corpus");
    }
    const cs::MotionSequence corpus = cs::LoadCorpus(corpus_path);
    return cs::ToyEnv::Tracking(spec, corpus, cfg.train.val_fraction);
  }
  const cs::SynergyGenerator gen = cs::SynergyGenerator::Random(
      cfg.corpus.seed, spec.dof, cfg.corpus.synergies,
      cfg.corpus.segment_min_s, cfg.corpus.segment_max_s);
  return cs::ToyEnv::ReachHold(spec, gen);
}

int RunGenCorpus(const cs::RunConfig& cfg, const std::string& out_path) {
  const cs::SynergyGenerator gen = cs::SynergyGenerator::Random(
      cfg.corpus.seed, cfg.corpus.dof, cfg.corpus.synergies,
      cfg.corpus.segment_min_s, cfg.corpus.segment_max_s);
  const cs::MotionSequence seq =
      cs::GenerateCorpus(gen, cfg.corpus.minutes * 60.0, cfg.corpus.rate_hz);
  cs::SaveCorpus(seq, out_path);
  cs::WriteResolvedConfig(cfg, out_path + ".config.json");
  json out;
  out["rows"] = seq.frames();
  out["rate_hz"] = seq.rate_hz;
  out["dof"] = seq.dof;
  out["path"] = out_path;
  std::cout << out.dump() << "\n";
  return 0;
}

int RunTrain(const cs::RunConfig& cfg, const std::string& corpus_path,
             const std::string& out_dir) {
  EnsureDir(out_dir);
  const cs::MotionSequence corpus = cs::LoadCorpus(corpus_path);
  cs::ChunkModel<float> model(cfg.model, cfg.train.seed);
  std::ofstream metrics(out_dir + "/train_metrics.jsonl");
  if (!metrics) {
    throw std::runtime_error("cannot open " + out_dir + "/train_metrics.jsonl");
  }
  const cs::TrainResult result = cs::TrainChunkModel(
      &model, corpus, cfg.train, [&](const cs::EpochMetrics& m) {
        json line;
        line["epoch"] = m.epoch;
        line["train_l1"] = m.train_l1;
        line["val_l1"] = m.val_l1;
        if (!m.code_usage.empty()) line["code_usage"] = m.code_usage;
        metrics << line.dump() << "\n";
        metrics.flush();
        std::cerr << "epoch " << m.epoch << " train_l1 " << m.train_l1
                  << " val_l1 " << m.val_l1 << "\n";
      });
  const std::string ckpt = out_dir + "/model.ckpt";
  cs::SaveCheckpoint(model, ckpt);
  cs::WriteResolvedConfig(cfg, out_dir + "/config.json");
  json out;
  out["final_val_l1"] = result.final_val_l1;
  out["epochs"] = static_cast<int64_t>(result.trace.size());
  out["checkpoint"] = ckpt;
  std::cout << out.dump() << "\n";
  return 0;
}

struct EvalData {
  cs::ChunkModel<float> model;
  std::vector<cs::ChunkSample> val;
};

EvalData LoadEvalData(const cs::RunConfig& cfg, const std::string& ckpt_path,
                      const std::string& corpus_path) {
  EvalData data;
  data.model = cs::LoadCheckpoint<float>(ckpt_path);
  const cs::MotionSequence corpus = cs::LoadCorpus(corpus_path);
  const cs::MotionSequence normalized =
      cs::ApplyNormalization(corpus, data.model.norm);
  cs::ChunkSplit split = cs::SplitChunks(
      cs::ExtractChunks(normalized, data.model.cfg.n, cfg.train.stride),
      cfg.train.val_fraction);
  data.val = std::move(split.val);
  return data;
}

int RunEvalRecon(const cs::RunConfig& cfg, const std::string& ckpt_path,
                 const std::string& corpus_path) {
  const EvalData data = LoadEvalData(cfg, ckpt_path, corpus_path);
  const double val_l1 =
      cs::EvaluateL1(data.model, data.val, cfg.train.batch_size);
  json out;
  out["val_l1"] = val_l1;
  out["val_chunks"] = static_cast<int64_t>(data.val.size());
  std::cout << out.dump() << "\n";
  return 0;
}

int RunCodebookStats(const cs::RunConfig& cfg, const std::string& ckpt_path,
                     const std::string& corpus_path) {
  const EvalData data = LoadEvalData(cfg, ckpt_path, corpus_path);
  if (data.model.cfg.quantization != cs::Quantization::kVq) {
    throw cs::ConfigError("config: codebook-stats needs a vq checkpoint");
  }
  std::vector<double> usage;
  const double val_l1 =
      cs::EvaluateL1(data.model, data.val, cfg.train.batch_size, &usage);
  double min_usage = 1.0;
  for (double u : usage) min_usage = std::min(min_usage, u);
  json out;
  out["usage"] = usage;
  out["min_usage"] = min_usage;
  out["val_l1"] = val_l1;
  std::cout << out.dump() << "\n";
  return 0;
}

int RunMpc(const cs::RunConfig& cfg, const std::string& ckpt_path,
           const std::string& corpus_path, cs::TaskKind task,
           int64_t episode_steps, const std::string& out_path) {
  const cs::ToyEnv env = BuildEnv(cfg, task, corpus_path);
  std::optional<cs::ChunkModel<float>> model;
  std::optional<cs::ModelDecoder<float>> decoder;
  if (cfg.planner.mode != cs::PlannerMode::kBaselineSpline) {
    if (ckpt_path.empty()) {
      throw cs::ConfigError("config: latent planner modes need --checkpoint");
    }
    model = cs::LoadCheckpoint<float>(ckpt_path);
    decoder.emplace(&*model);
  }
  cs::PlannerConfig planner_cfg = cfg.planner;
  planner_cfg.seed = cs::Rng::DeriveSeed(cfg.seed, 0x706c6e);  // "pln"
  const uint64_t env_seed = cs::Rng::DeriveSeed(cfg.seed, 0x656e76);  // "env"
  const cs::EpisodeStats stats = cs::RunPlannedEpisode(
      decoder ? &*decoder : nullptr, env, planner_cfg, env_seed,
      episode_steps > 0 ? episode_steps : cfg.env.episode_steps);
  json out;
  out["mode"] = cs::PlannerModeName(planner_cfg.mode);
  out["episode_cost"] = stats.episode_cost;
  out["successes"] = stats.successes;
  out["success_rate"] = stats.success_rate;
  out["wall_ms_per_step"] = stats.wall_ms_per_step;
  out["steps"] = stats.steps;
  std::cout << out.dump() << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open " + out_path);
    f << out.dump(2) << "\n";
    cs::WriteResolvedConfig(cfg, out_path + ".config.json");
  }
  return 0;
}

int RunSweep(const cs::RunConfig& cfg, const std::string& ckpt_path,
             const std::string& corpus_path,
             const std::vector<int64_t>& n_list, int64_t seeds,
             int64_t episode_steps, const std::string& out_path) {
  if (n_list.empty()) throw cs::ConfigError("config: sweep needs --n-traj");
  const cs::ToyEnv env = BuildEnv(cfg, cs::TaskKind::kTracking, corpus_path);
  const cs::ChunkModel<float> model = cs::LoadCheckpoint<float>(ckpt_path);
  const cs::ModelDecoder<float> decoder(&model);
  cs::PlannerConfig base_cfg = cfg.planner;
  base_cfg.seed = cfg.seed;
  const std::vector<cs::PlannerMode> modes = {
      cs::PlannerMode::kLatentVq, cs::PlannerMode::kBaselineSpline};
  const std::vector<cs::SweepRow> rows = cs::BudgetSweep(
      &decoder, env, base_cfg, modes, n_list, seeds,
      episode_steps > 0 ? episode_steps : cfg.env.episode_steps);
  cs::WriteSweepCsv(rows, out_path);
  cs::WriteResolvedConfig(cfg, out_path + ".config.json");
  // Per-(mode, N) summary table.
  for (cs::PlannerMode mode : modes) {
    for (int64_t n : n_list) {
      double sum = 0.0;
      double sum_sq = 0.0;
      int64_t count = 0;
      for (const cs::SweepRow& row : rows) {
        if (row.mode == cs::PlannerModeName(mode) && row.n_traj == n) {
          sum += row.episode_cost;
          sum_sq += row.episode_cost * row.episode_cost;
          ++count;
        }
      }
      const double mean = sum / static_cast<double>(count);
      const double var =
          sum_sq / static_cast<double>(count) - mean * mean;
      std::cout << cs::PlannerModeName(mode) << " N=" << n << " mean_cost "
                << mean << " std " << std::sqrt(std::max(0.0, var)) << "\n";
    }
  }
  return 0;
}

int RunRl(const cs::RunConfig& cfg, bool chunked, const std::string& ckpt_path,
          const std::string& corpus_path, cs::TaskKind task,
          const std::string& out_dir) {
  EnsureDir(out_dir);
  const cs::ToyEnv env = BuildEnv(cfg, task, corpus_path);
  cs::PpoConfig ppo_cfg = cfg.ppo;
  ppo_cfg.seed = cs::Rng::DeriveSeed(cfg.seed, 0x70706f);  // "ppo"

  std::ofstream metrics(out_dir + "/rl_metrics.jsonl");
  if (!metrics) {
    throw std::runtime_error("cannot open " + out_dir + "/rl_metrics.jsonl");
  }
  const auto on_iter = [&](const cs::PpoIterMetrics& m) {
    json line;
    line["iter"] = m.iter;
    line["env_steps"] = m.env_steps;
    line["mean_return"] = m.mean_return;
    line["success_rate"] = m.success_rate;
    metrics << line.dump() << "\n";
    metrics.flush();
    std::cerr << "iter " << m.iter << " steps " << m.env_steps << " return "
              << m.mean_return << " success " << m.success_rate << "\n";
  };

  cs::PpoResult result;
  json policy_meta;
  policy_meta["kind"] = "ppo_policy";
  policy_meta["chunked"] = chunked;
  if (chunked) {
    if (ckpt_path.empty()) {
      throw cs::ConfigError("config: chunked rl needs --checkpoint");
    }
    const cs::ChunkModel<float> model = cs::LoadCheckpoint<float>(ckpt_path);
    const cs::ModelCodeDecoder<float> decoder(&model, cfg.rl.n_c);
    const cs::AugmentedEnv aug(&env, &decoder, cfg.rl);
    const cs::ChunkedPolicyEnv adapter(&aug);
    cs::PpoAgent<float> agent(adapter.obs_dim(), adapter.action_dim(),
                              ppo_cfg);
    result = cs::TrainPolicy(adapter, ppo_cfg, on_iter, 0.5, &agent);
    policy_meta["obs_dim"] = adapter.obs_dim();
    policy_meta["act_dim"] = adapter.action_dim();
    cs::SaveParamsFile(agent.params, policy_meta, out_dir + "/policy.ckpt");
  } else {
    const cs::RawPolicyEnv adapter(&env);
    cs::PpoAgent<float> agent(adapter.obs_dim(), adapter.action_dim(),
                              ppo_cfg);
    result = cs::TrainPolicy(adapter, ppo_cfg, on_iter, 0.5, &agent);
    policy_meta["obs_dim"] = adapter.obs_dim();
    policy_meta["act_dim"] = adapter.action_dim();
    cs::SaveParamsFile(agent.params, policy_meta, out_dir + "/policy.ckpt");
  }
  cs::WriteResolvedConfig(cfg, out_dir + "/config.json");
  json out;
  out["chunked"] = chunked;
  out["steps_to_success"] = result.steps_to_success;
  out["final_success_rate"] =
      result.curve.empty() ? 0.0 : result.curve.back().success_rate;
  out["final_mean_return"] =
      result.curve.empty() ? 0.0 : result.curve.back().mean_return;
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chunkspace: vector-quantized action-chunk models, "
               "latent-sampling MPC, and chunked RL"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run config JSON")
      ->envname("CHUNKSPACE_CONFIG");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  std::string gen_out = "corpus.csv";
  std::optional<uint64_t> gen_seed;
  std::optional<double> gen_minutes;
  std::optional<int64_t> gen_dof;
  gen->add_option("--out", gen_out, "output CSV path");
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->add_option("--minutes", gen_minutes, "corpus duration in minutes");
  gen->add_option("--dof", gen_dof, "degrees of freedom");

  // train
  auto* train = app.add_subcommand("train", "train the chunk autoencoder");
  std::string train_corpus;
  std::string train_out = "run";
  std::string train_variant;
  std::string train_conditional;
  std::optional<uint64_t> train_seed;
  std::optional<int64_t> train_epochs;
  train->add_option("--corpus", train_corpus, "corpus CSV")->required();
  train->add_option("--out-dir", train_out, "output directory");
  train->add_option("--variant", train_variant, "vq|kl");
  train->add_option("--conditional", train_conditional, "on|off");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--epochs", train_epochs, "override epoch count");

  // eval-recon
  auto* eval = app.add_subcommand("eval-recon", "validation reconstruction L1");
  std::string eval_ckpt;
  std::string eval_corpus;
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("--corpus", eval_corpus, "corpus CSV")->required();

  // codebook-stats
  auto* stats = app.add_subcommand("codebook-stats", "code usage fractions");
  std::string stats_ckpt;
  std::string stats_corpus;
  stats->add_option("--checkpoint", stats_ckpt, "model checkpoint")
      ->required();
  stats->add_option("--corpus", stats_corpus, "corpus CSV")->required();

  // mpc
  auto* mpc = app.add_subcommand("mpc", "run one planned episode");
  std::string mpc_ckpt;
  std::string mpc_corpus;
  std::string mpc_mode;
  std::string mpc_env = "a";
  std::string mpc_out;
  std::optional<uint64_t> mpc_seed;
  std::optional<int64_t> mpc_n_traj;
  int64_t mpc_steps = 0;
  mpc->add_option("--checkpoint", mpc_ckpt, "model checkpoint");
  mpc->add_option("--corpus", mpc_corpus, "corpus CSV (tracking env)");
  mpc->add_option("--mode", mpc_mode,
                  "latent_vq|latent_kl_spline|baseline_spline");
  mpc->add_option("--env", mpc_env, "a|b (tracking|reach_hold)");
  mpc->add_option("--seed", mpc_seed, "episode seed");
  mpc->add_option("--n-traj", mpc_n_traj, "candidates per step");
  mpc->add_option("--episode-steps", mpc_steps, "episode length");
  mpc->add_option("--out", mpc_out, "metrics JSON path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "planning-budget sweep (Env A)");
  std::string sweep_ckpt;
  std::string sweep_corpus;
  std::string sweep_out = "sweep.csv";
  std::vector<int64_t> sweep_n;
  int64_t sweep_seeds = 5;
  int64_t sweep_steps = 0;
  std::optional<uint64_t> sweep_seed;
  sweep->add_option("--checkpoint", sweep_ckpt, "model checkpoint")
      ->required();
  sweep->add_option("--corpus", sweep_corpus, "corpus CSV")->required();
  sweep->add_option("--n-traj", sweep_n, "candidate counts")
      ->delimiter(',')
      ->required();
  sweep->add_option("--seeds", sweep_seeds, "seeds per (mode, N)");
  sweep->add_option("--episode-steps", sweep_steps, "episode length");
  sweep->add_option("--seed", sweep_seed, "base seed");
  sweep->add_option("--out", sweep_out, "output CSV path");

  // rl
  auto* rl = app.add_subcommand("rl", "train a policy with PPO");
  std::string rl_chunked = "on";
  std::string rl_ckpt;
  std::string rl_corpus;
  std::string rl_env = "b";
  std::string rl_out = "rl_run";
  std::optional<uint64_t> rl_seed;
  std::optional<int64_t> rl_iters;
  rl->add_option("--chunked", rl_chunked, "on|off");
  rl->add_option("--checkpoint", rl_ckpt, "model checkpoint (chunked)");
  rl->add_option("--corpus", rl_corpus, "corpus CSV (tracking env)");
  rl->add_option("--env", rl_env, "a|b (tracking|reach_hold)");
  rl->add_option("--seed", rl_seed, "training seed");
  rl->add_option("--iterations", rl_iters, "override iteration count");
  rl->add_option("--out-dir", rl_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    cs::RunConfig cfg = LoadConfigOrDefault(config_path);
    if (gen->parsed()) {
      if (gen_seed) cfg.corpus.seed = *gen_seed;
      if (gen_minutes) cfg.corpus.minutes = *gen_minutes;
      if (gen_dof) cfg.corpus.dof = *gen_dof;
      return RunGenCorpus(cfg, gen_out);
    }
    if (train->parsed()) {
      if (!train_variant.empty()) {
        cfg.model.quantization = cs::ParseQuantization(train_variant);
      }
      if (!train_conditional.empty()) {
        cfg.model.conditional = ParseOnOff(train_conditional, "--conditional");
      }
      if (train_seed) cfg.train.seed = *train_seed;
      if (train_epochs) cfg.train.epochs = *train_epochs;
      return RunTrain(cfg, train_corpus, train_out);
    }
    if (eval->parsed()) return RunEvalRecon(cfg, eval_ckpt, eval_corpus);
    if (stats->parsed()) return RunCodebookStats(cfg, stats_ckpt, stats_corpus);
    if (mpc->parsed()) {
      if (!mpc_mode.empty()) cfg.planner.mode = cs::ParsePlannerMode(mpc_mode);
      if (mpc_n_traj) cfg.planner.n_traj = *mpc_n_traj;
      if (mpc_seed) cfg.seed = *mpc_seed;
      return RunMpc(cfg, mpc_ckpt, mpc_corpus, ParseEnvFlag(mpc_env),
                    mpc_steps, mpc_out);
    }
    if (sweep->parsed()) {
      if (sweep_seed) cfg.seed = *sweep_seed;
      return RunSweep(cfg, sweep_ckpt, sweep_corpus, sweep_n, sweep_seeds,
                      sweep_steps, sweep_out);
    }
    if (rl->parsed()) {
      if (rl_seed) cfg.seed = *rl_seed;
      if (rl_iters) cfg.ppo.iterations = *rl_iters;
      return RunRl(cfg, ParseOnOff(rl_chunked, "--chunked"), rl_ckpt,
                   rl_corpus, ParseEnvFlag(rl_env), rl_out);
    }
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const cs::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cs::CorpusParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return 3;
  }
}
