#pragma once

// Run configuration and the pipeline stages behind the command line:
// gen-opponents -> collect -> train -> eval -> report. Stages communicate only
// through files under the output directory:
//
//   <out>/run.cfg                      canonical configuration + hash
//   <out>/pool/manifest.txt            opponent pool (+ strategies/)
//   <out>/histories/<task>.hist        learning history per task
//   <out>/histories/<task>.policy      learner's final policy per task
//   <out>/model/checkpoint.bin         trained model
//   <out>/model/vocab.txt              token vocabulary
//   <out>/model/loss.log               one line per training episode
//   <out>/model/curriculum.txt         Algorithm 1 order
//   <out>/eval/{curves,aggregate}.csv, report.txt

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ice/eval_bench.hpp"

namespace ice {

struct RunConfig {
  std::string game = "kuhn2";
  std::string seats = "all";  // "all" or a comma-separated seat list
  int learning_opponents = 40;
  int random_opponents = 20;
  int iters_per_snapshot = 500;
  int gap = 3;
  LearnerConfig learner;
  TrainConfig train;
  // Evaluation settings (not part of the hash: they shape no stored artifact
  // that later stages consume).
  int eval_budget = 500;
  int eval_repetitions = 10;
  int eval_in_dist = 30;
  int eval_out_dist = 20;
  int eval_ne_iterations = 10000;
  int eval_context_length = 0;
  std::string eval_mode = "sample";
  std::string eval_testbeds = "in_dist,out_dist,ne";
  std::string eval_baselines = "br,ne,onlineppo,pretrainfinetune";
  std::uint64_t seed = 0;
  // Never hashed.
  std::string out = "run";
  int workers = 1;

  // Per-game default profile.
  static RunConfig defaults_for(const std::string& game);

  // Sets one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Throws std::invalid_argument when any field violates a stage precondition.
  void validate() const;
  std::vector<int> exploiter_seats() const;
  GameSpecPtr spec() const { return GameSpec::parse(game); }

  // "key=value" lines for every hashed key, in keys() order.
  std::string canonical() const;
  std::string hash() const;
};

// Reads flat "key = value" text ('#' comments). The game key, when present,
// selects the default profile before the other keys apply; `overrides`
// ("key=value") are applied last. Throws std::invalid_argument on bad input
// and std::runtime_error when the file cannot be read.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig make_run_config(const std::string& text, const std::vector<std::string>& overrides = {});

std::string run_path(const RunConfig& config, const std::string& relative);
std::string history_path(const RunConfig& config, const std::string& task_id);

void cmd_gen_opponents(const RunConfig& config, std::ostream& log);
void cmd_collect(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);

struct EvalRequest {
  std::vector<TestbedKind> testbeds;     // empty = from the config
  std::vector<BaselineKind> baselines;   // empty = from the config
  bool baselines_set = false;            // true: use `baselines` even when empty
  int context_length = -1;               // < 0 = from the config
  std::string checkpoint;                // empty = <out>/model/checkpoint.bin
  bool force = false;                    // accept artifacts with mixed hashes
};

Summary cmd_eval(const RunConfig& config, const EvalRequest& request, std::ostream& log);
// Rebuilds aggregate.csv and report.txt from eval/curves.csv; returns the report.
std::string cmd_report(const RunConfig& config, std::ostream& log);

}  // namespace ice
