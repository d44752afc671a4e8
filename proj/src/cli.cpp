#include "ice/cli.hpp"

#include <CLI11.hpp>

#include <ostream>
#include <sstream>

#include "ice/pipeline.hpp"

namespace ice {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split(s, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"In-context exploiter pipeline: opponent generation, history collection, training, evaluation"};
  app.name("ice");
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  app.add_option("--config", config_path, "flat key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "extra key=value overrides, applied after the config file");

  auto* gen = app.add_subcommand("gen-opponents", "generate the opponent pool");
  auto* collect = app.add_subcommand("collect", "collect a learning history per pool task");
  auto* train = app.add_subcommand("train", "train the model under the curriculum");
  auto* eval = app.add_subcommand("eval", "evaluate the frozen model and baselines");
  auto* report = app.add_subcommand("report", "rebuild aggregate.csv and report.txt from curves.csv");

  std::string testbeds, baselines, checkpoint;
  bool baselines_given = false;
  int context_length = -1;
  bool force = false;
  eval->add_option("--testbed", testbeds, "comma list of in_dist, out_dist, ne");
  auto* bopt = eval->add_option("--baselines", baselines, "comma list of br, ne, onlineppo, pretrainfinetune");
  eval->add_option("--context-length", context_length, "evaluation context length (<= trained)");
  eval->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/model/checkpoint.bin)");
  eval->add_flag("--force", force, "accept artifacts produced under a different configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitUsage;
  }
  baselines_given = bopt->count() > 0;

  RunConfig config;
  EvalRequest request;
  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (out_dir) overrides.push_back("out=" + *out_dir);
    if (workers) overrides.push_back("workers=" + std::to_string(*workers));
    config = config_path.empty() ? make_run_config("", overrides) : load_run_config(config_path, overrides);
    config.validate();
    for (const auto& t : split_csv(testbeds)) request.testbeds.push_back(parse_testbed(t));
    for (const auto& b : split_csv(baselines)) request.baselines.push_back(parse_baseline(b));
    request.baselines_set = baselines_given;
    request.context_length = context_length;
    request.checkpoint = checkpoint;
    request.force = force;
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) cmd_gen_opponents(config, out);
    if (collect->parsed()) cmd_collect(config, out);
    if (train->parsed()) cmd_train(config, out);
    if (eval->parsed()) cmd_eval(config, request, out);
    if (report->parsed()) cmd_report(config, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ice
