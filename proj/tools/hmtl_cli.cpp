// Command-line front end: train, eval, stats, gradcheck.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hmtl/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string corpus_daily;
  std::string corpus_daic;
  std::string labels;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string tasks;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Configuration file (key = value lines)");
  cmd->add_option("--set", f.overrides, "Override one key, as key=value (repeatable)");
  cmd->add_option("--corpus-daily", f.corpus_daily, "DailyDialog root with train/validation/test");
  cmd->add_option("--corpus-daic", f.corpus_daic, "Directory searched for *_TRANSCRIPT.csv files");
  cmd->add_option("--labels", f.labels, "Directory holding the DAIC split label tables");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--tasks", f.tasks, "Comma-separated active tasks");
  cmd->add_flag("-v,--verbose", f.verbose, "Log per-epoch progress");
}

hmtl::RunConfig resolve(const CommonFlags& f, bool out_is_run_root) {
  std::vector<std::string> overrides;
  if (!f.corpus_daily.empty()) overrides.push_back("corpus_daily=" + f.corpus_daily);
  if (!f.corpus_daic.empty()) overrides.push_back("corpus_daic=" + f.corpus_daic);
  if (!f.labels.empty()) overrides.push_back("daic_labels=" + f.labels);
  if (out_is_run_root && !f.out.empty()) overrides.push_back("output_dir=" + f.out);
  if (f.seed) overrides.push_back("seed=" + std::to_string(*f.seed));
  if (!f.tasks.empty()) overrides.push_back("tasks=" + f.tasks);
  overrides.insert(overrides.end(), f.overrides.begin(), f.overrides.end());
  if (f.verbose) hmtl::log::threshold() = hmtl::log::Level::Debug;
  std::optional<std::filesystem::path> file;
  if (!f.config.empty()) file = f.config;
  return hmtl::parse_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical multi-task dialog classifier"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, stats_f, grad_f;

  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  add_common(train, train_f);
  train->add_option("--out", train_f.out, "Directory that receives run directories");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one corpus split");
  add_common(eval, eval_f);
  std::string checkpoint, split = "test", task = "depression", vocab;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--split", split, "train, validation (dev) or test");
  eval->add_option("--task", task, "depression, emotion, dialog_act or topic");
  eval->add_option("--vocab", vocab, "Vocabulary file the corpus is encoded with");
  eval->add_option("--out", eval_f.out, "CSV report destination");

  auto* stats = app.add_subcommand("stats", "Per-split class distributions");
  add_common(stats, stats_f);
  std::string kind = "emotion";
  stats->add_option("--kind", kind, "emotion, act, topic or daic");
  stats->add_option("--out", stats_f.out, "CSV destination");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the miniature model");
  add_common(grad, grad_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return hmtl::cmd_train(resolve(train_f, true), std::cout);
    if (eval->parsed()) {
      hmtl::EvalRequest req;
      req.checkpoint = checkpoint;
      req.split = hmtl::parse_split(split);
      req.task = hmtl::parse_task(task);
      if (!vocab.empty()) req.vocab = vocab;
      if (!eval_f.out.empty()) req.report = eval_f.out;
      return hmtl::cmd_eval(resolve(eval_f, false), req, std::cout);
    }
    if (stats->parsed()) {
      std::optional<std::filesystem::path> csv;
      if (!stats_f.out.empty()) csv = stats_f.out;
      return hmtl::cmd_stats(resolve(stats_f, false), hmtl::parse_stats_kind(kind), csv, std::cout);
    }
    if (grad->parsed()) return hmtl::cmd_gradcheck(resolve(grad_f, false), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
