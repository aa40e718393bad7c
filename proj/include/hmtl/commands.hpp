#pragma once

// The four operator commands. Each returns a process exit status and writes
// human-readable output to `out`; failures surface as exceptions.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "hmtl/checkpoint.hpp"
#include "hmtl/config.hpp"
#include "hmtl/daic.hpp"
#include "hmtl/dailydialog.hpp"
#include "hmtl/evaluate.hpp"
#include "hmtl/log.hpp"
#include "hmtl/model_gradcheck.hpp"
#include "hmtl/stats.hpp"
#include "hmtl/trainer.hpp"

namespace hmtl {

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<Dialog> load_daily_split(const RunConfig& cfg, Split split) {
  cfg.require({"corpus_daily"});
  return load_dailydialog(dailydialog_split_dir(cfg.corpus_daily, split), cfg.load_options());
}

inline std::vector<Dialog> load_daic_split(const RunConfig& cfg, Split split) {
  cfg.require({"corpus_daic", "daic_labels"});
  return load_daic(cfg.corpus_daic, daic_labels_path(cfg.daic_labels, split, cfg.daic_files),
                   cfg.load_options(), cfg.daic_columns());
}

inline TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.tasks = cfg.tasks;
  t.hyper = cfg.hyper;
  t.patience = cfg.patience;
  t.clip_norm = cfg.clip_norm;
  return t;
}

// Training and development dialogs of every corpus the active tasks need,
// encoded with a vocabulary built from the training dialogs.
inline TrainData load_train_data(const RunConfig& cfg) {
  const TrainConfig tc = train_config(cfg);
  TrainData data;
  if (tc.uses_daily()) {
    data.daily_train = load_daily_split(cfg, Split::Train);
    data.daily_dev = load_daily_split(cfg, Split::Dev);
  }
  if (tc.uses_daic()) {
    data.daic_train = load_daic_split(cfg, Split::Train);
    data.daic_dev = load_daic_split(cfg, Split::Dev);
  }
  TokenCounter counter;
  counter.add(data.daily_train);
  counter.add(data.daic_train);
  data.vocab = Vocabulary::build(counter, cfg.min_freq);
  for (auto* split : {&data.daily_train, &data.daily_dev, &data.daic_train, &data.daic_dev}) {
    encode_dialogs(*split, data.vocab);
  }
  return data;
}

// <output_dir>/run-<UTC timestamp>-seed<N>, suffixed until it is new.
inline fs::path fresh_run_dir(const fs::path& root, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << "run-" << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << seed;
  fs::create_directories(root);
  fs::path dir = root / name.str();
  for (int n = 2; !fs::create_directory(dir); ++n) dir = root / (name.str() + "-" + std::to_string(n));
  return dir;
}

struct TrainOutcome {
  fs::path run_dir;
  TrainHistory history;
};

template <typename Real>
TrainOutcome train_run(const RunConfig& cfg, const TrainData& data, std::ostream& out) {
  TrainOutcome outcome;
  outcome.run_dir = fresh_run_dir(cfg.output_dir, cfg.hyper.seed);
  write_file(outcome.run_dir / "config.txt", config_text(cfg));
  data.vocab.save(outcome.run_dir / "vocab.txt");

  TrainConfig tc = train_config(cfg);
  tc.checkpoint_dir = outcome.run_dir / "checkpoint";
  Trainer<Real> trainer(tc, data);
  out << "run directory " << outcome.run_dir.string() << '\n'
      << "tasks " << to_string(cfg.tasks) << ", vocabulary " << data.vocab.size() << ", "
      << trainer.params().parameter_count() << " parameters\n";
  auto result = trainer.fit();
  outcome.history = result.history;
  write_file(outcome.run_dir / "history.csv", history_csv(result.history));

  const auto& best = result.history.best_record();
  const TaskId target = tc.target();
  write_file(outcome.run_dir / "dev_report.csv", report_csv(best.dev, class_names(target)));
  write_file(outcome.run_dir / "dev_report.txt", report_text(best.dev, class_names(target)));
  out << "best epoch " << best.epoch << " of " << result.history.epochs.size() << '\n'
      << report_text(best.dev, class_names(target));
  return outcome;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const TrainData data = load_train_data(cfg);
  if (cfg.precision == 64) train_run<double>(cfg, data, out);
  else train_run<float>(cfg, data, out);
  return 0;
}

struct EvalRequest {
  fs::path checkpoint;
  Split split = Split::Test;
  TaskId task = TaskId::Depression;
  std::optional<fs::path> vocab;   // defaults to the run directory's vocab.txt
  std::optional<fs::path> report;  // CSV destination
};

template <typename Real>
MetricsReport eval_checkpoint(const RunConfig& cfg, const EvalRequest& req) {
  const auto ck = load_checkpoint<Real>(req.checkpoint);
  fs::path vocab_path = req.checkpoint / "vocab.txt";
  if (req.vocab) vocab_path = *req.vocab;
  else if (fs::exists(req.checkpoint.parent_path() / "vocab.txt")) {
    vocab_path = req.checkpoint.parent_path() / "vocab.txt";
  }
  const auto vocab = Vocabulary::load(vocab_path);
  require_vocabulary(ck.info.vocab_hash, vocab);
  auto dialogs = req.task == TaskId::Depression ? load_daic_split(cfg, req.split)
                                                : load_daily_split(cfg, req.split);
  if (dialogs.empty()) throw ContractError("no dialogs in the requested split");
  encode_dialogs(dialogs, vocab);
  const std::string split_label =
      std::string(req.task == TaskId::Depression ? "daic-" : "dailydialog-") +
      std::string(split_name(req.split));
  return evaluate_model(ck, vocab, dialogs, req.task, split_label);
}

inline int cmd_eval(const RunConfig& cfg, const EvalRequest& req, std::ostream& out) {
  const auto info = read_manifest(req.checkpoint);
  const auto report = info.precision == 64 ? eval_checkpoint<double>(cfg, req)
                                           : eval_checkpoint<float>(cfg, req);
  out << report_text(report, class_names(req.task));
  const fs::path dest = req.report ? *req.report
                                   : req.checkpoint.parent_path() /
                                         ("eval-" + report.task + "-" + std::string(split_name(req.split)) + ".csv");
  write_file(dest, report_csv(report, class_names(req.task)));
  out << "report written to " << dest.string() << '\n';
  return 0;
}

inline int cmd_stats(const RunConfig& cfg, StatsKind kind, const std::optional<fs::path>& csv,
                     std::ostream& out) {
  DistributionTable table;
  if (kind == StatsKind::Daic) {
    cfg.require({"daic_labels"});
    table = daic_distribution(cfg.daic_labels, cfg.daic_files, cfg.daic_columns());
  } else {
    cfg.require({"corpus_daily"});
    table = dailydialog_distribution(cfg.corpus_daily, kind);
  }
  out << distribution_text(table);
  if (csv) write_file(*csv, distribution_csv(table));
  return 0;
}

// Miniature-model gradient check in 64-bit; exit status 1 when it fails.
inline int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  if (cfg.gradcheck_dropout > 0.0) {
    throw ConfigError("gradcheck_dropout: gradient checking needs deterministic forward passes; "
                      "set it to 0");
  }
  if (cfg.precision == 32) {
    log::warn("gradient checking in 32-bit cannot reach the tolerance; using 64-bit");
  }
  MiniatureSpec spec;
  spec.seed = cfg.hyper.seed;
  const auto r = check_model_gradients(spec, cfg.gradcheck_eps);
  const bool pass = r.result.max_relative_error < cfg.gradcheck_tolerance;
  out << "checked " << r.result.entries_checked << " entries of " << r.parameter_count
      << " parameters\nmax relative error " << format_double(r.result.max_relative_error) << " at "
      << r.worst_name << '[' << r.result.worst_entry << "]\n"
      << (pass ? "PASS" : "FAIL") << " (tolerance " << format_double(cfg.gradcheck_tolerance) << ")\n";
  return pass ? 0 : 1;
}

}  // namespace hmtl
