#pragma once

// Joint training over DailyDialog and DAIC batches: a seeded interleaved
// schedule, Adam updates with global-norm clipping, and early stopping on a
// development metric.

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hmtl/adam.hpp"
#include "hmtl/batch.hpp"
#include "hmtl/checkpoint.hpp"
#include "hmtl/evaluate.hpp"
#include "hmtl/log.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

// A seeded uniform permutation of n_daily DailyDialog tags and n_daic DAIC tags.
inline std::vector<Corpus> interleave_schedule(std::size_t n_daily, std::size_t n_daic,
                                               std::uint64_t seed) {
  if (n_daily == 0 && n_daic == 0) throw ContractError("interleave_schedule: no batches");
  std::vector<Corpus> order(n_daily, Corpus::DailyDialog);
  order.insert(order.end(), n_daic, Corpus::Daic);
  Rng rng(seed);
  shuffle(order, rng);
  return order;
}

// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience = 10) : patience_(patience) {
    if (patience == 0) throw ConfigError("patience must be positive");
  }

  // Records one epoch's metric; returns true when it is a new best.
  bool update(std::size_t epoch, double metric) {
    if (!best_epoch_ || metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  std::optional<std::size_t> best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = 0.0;
  std::optional<std::size_t> best_epoch_;
};

struct TrainConfig {
  TaskSet tasks{TaskId::Depression};
  HyperParams hyper;
  std::size_t patience = 10;
  double clip_norm = 5.0;
  std::optional<std::filesystem::path> checkpoint_dir;

  // Task the development metric is taken from.
  TaskId target() const {
    if (tasks.contains(TaskId::Depression)) return TaskId::Depression;
    return tasks.list().front();
  }

  bool uses_daily() const { return !tasks.intersect(kAuxiliaryTasks).empty(); }
  bool uses_daic() const { return tasks.contains(TaskId::Depression); }

  void validate() const {
    if (tasks.empty()) throw ConfigError("tasks: at least one task must be active");
    hyper.validate();
    if (patience == 0) throw ConfigError("patience must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be nonnegative");
  }
};

// Encoded corpora. Dialogs must already carry token ids from `vocab`.
struct TrainData {
  Vocabulary vocab;
  std::vector<Dialog> daily_train;
  std::vector<Dialog> daily_dev;
  std::vector<Dialog> daic_train;
  std::vector<Dialog> daic_dev;

  void check(const TrainConfig& cfg) const {
    if (cfg.uses_daily() && daily_train.empty()) {
      throw ConfigError("tasks " + to_string(cfg.tasks) + " need DailyDialog training dialogs");
    }
    if (cfg.uses_daic() && daic_train.empty()) {
      throw ConfigError("task depression needs DAIC training dialogs");
    }
    const auto& dev = cfg.target() == TaskId::Depression ? daic_dev : daily_dev;
    if (dev.empty()) {
      throw ConfigError("no development dialogs for " + std::string(task_name(cfg.target())));
    }
  }

  const std::vector<Dialog>& dev_for(TaskId task) const {
    return task == TaskId::Depression ? daic_dev : daily_dev;
  }
};

// Tasks a batch from `corpus` is trained on.
inline TaskSet batch_tasks(const TaskSet& active, Corpus corpus) {
  return corpus == Corpus::Daic ? active.intersect(TaskSet{TaskId::Depression})
                                : active.intersect(kAuxiliaryTasks);
}

template <typename Real>
struct StepResult {
  Real total = Real(0);
  std::array<std::optional<Real>, 4> components;
  std::vector<std::optional<Tensor<Real>>> grads;  // parallel to params.entries()
};

// Forward, loss and backward for one batch; parameters are not modified.
template <typename Real>
StepResult<Real> compute_gradients(const ModelParams<Real>& params, const Batch& batch,
                                   const TaskSet& tasks, RunMode mode) {
  Tape<Real> tape;
  const auto bound = bind_params(tape, params);
  const auto fwd = forward_dialog(tape, bound, batch, tasks, mode);
  const auto loss = mtl_loss(fwd, batch, tasks);
  auto store = backward(loss.total);
  StepResult<Real> out;
  out.total = loss.total.value().item();
  out.components = loss.components;
  out.grads.reserve(params.size());
  for (const auto& v : bound.vars) out.grads.push_back(store.take(v.id()));
  return out;
}

struct EpochStats {
  std::array<std::optional<double>, 4> mean_loss;  // by task_index
  std::size_t updates = 0;
  std::size_t daily_batches = 0;
  std::size_t daic_batches = 0;
  double max_grad_norm = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::array<std::optional<double>, 4> loss;
  MetricsReport dev;
  bool best = false;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  TaskSet tasks;
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  bool stopped_early = false;

  const EpochRecord& best_record() const {
    if (!best_epoch) throw ContractError("history has no best epoch");
    return epochs.at(*best_epoch - 1);
  }
};

// One row per epoch. Wall time is left out so that equal runs give equal
// tables; the "best" column is 1 on the epoch holding the best dev F1 so far.
inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch";
  for (TaskId t : h.tasks.list()) out << ",loss_" << task_name(t);
  out << ",dev_accuracy,dev_precision,dev_recall,dev_f1,best\n";
  for (const auto& e : h.epochs) {
    out << e.epoch;
    for (TaskId t : h.tasks.list()) {
      out << ',';
      if (e.loss[task_index(t)]) out << format_double(*e.loss[task_index(t)]);
    }
    out << ',' << format_double(e.dev.accuracy) << ',' << format_double(e.dev.macro_precision) << ','
        << format_double(e.dev.macro_recall) << ',' << format_double(e.dev.macro_f1) << ','
        << (e.best ? 1 : 0) << '\n';
  }
  return out.str();
}

template <typename Real>
class Trainer {
 public:
  Trainer(TrainConfig cfg, const TrainData& data)
      : cfg_(std::move(cfg)), data_(&data) {
    cfg_.validate();
    data_->check(cfg_);
    params_ = ModelParams<Real>::initialize(cfg_.hyper, data_->vocab.size(), cfg_.hyper.seed);
    std::vector<const Tensor<Real>*> shapes;
    for (const auto& e : params_.entries()) shapes.push_back(&e.value);
    adam_ = AdamState<Real>::for_shapes(shapes);
  }

  const TrainConfig& config() const { return cfg_; }
  const ModelParams<Real>& params() const { return params_; }
  ModelParams<Real>& params() { return params_; }
  const AdamState<Real>& optimizer() const { return adam_; }

  // One optimizer update on `batch`; returns the step's losses.
  StepResult<Real> step(const Batch& batch, Rng& dropout_rng) {
    const TaskSet tasks = batch_tasks(cfg_.tasks, batch.corpus);
    auto result = compute_gradients(params_, batch, tasks, RunMode{true, &dropout_rng});
    std::vector<Tensor<Real>*> grads;
    std::vector<Tensor<Real>*> targets;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      grads.push_back(result.grads[i] ? &*result.grads[i] : nullptr);
      targets.push_back(&params_[i]);
      names.push_back(params_.entries()[i].name);
    }
    last_grad_norm_ = clip_global_norm<Real>(grads, cfg_.clip_norm);
    std::vector<const Tensor<Real>*> cgrads(grads.begin(), grads.end());
    adam_step<Real>(targets, cgrads, adam_, cfg_.hyper.learning_rate, names);
    return result;
  }

  // Epoch numbering starts at 1; the shuffles and dropout masks of epoch e
  // derive from seed + e.
  EpochStats train_epoch(std::size_t epoch) {
    const std::uint64_t epoch_seed = cfg_.hyper.seed + epoch;
    std::vector<Batch> daily, daic;
    if (cfg_.uses_daily()) {
      daily = make_batches(data_->daily_train, cfg_.hyper.batch_daily, mix_seed(epoch_seed, 1));
    }
    if (cfg_.uses_daic()) {
      daic = make_batches(data_->daic_train, cfg_.hyper.batch_daic, mix_seed(epoch_seed, 2));
    }
    const auto schedule = interleave_schedule(daily.size(), daic.size(), mix_seed(epoch_seed, 3));
    Rng dropout_rng(mix_seed(epoch_seed, 4));

    EpochStats stats;
    stats.daily_batches = daily.size();
    stats.daic_batches = daic.size();
    std::array<double, 4> sum{};
    std::array<std::size_t, 4> count{};
    std::size_t next_daily = 0, next_daic = 0;
    for (Corpus c : schedule) {
      const Batch& batch = c == Corpus::Daic ? daic[next_daic++] : daily[next_daily++];
      const auto result = step(batch, dropout_rng);
      ++stats.updates;
      stats.max_grad_norm = std::max(stats.max_grad_norm, last_grad_norm_);
      for (std::size_t k = 0; k < 4; ++k) {
        if (result.components[k]) {
          sum[k] += static_cast<double>(*result.components[k]);
          ++count[k];
        }
      }
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (count[k]) stats.mean_loss[k] = sum[k] / static_cast<double>(count[k]);
    }
    return stats;
  }

  MetricsReport evaluate_dev() const {
    const TaskId target = cfg_.target();
    return evaluate_model(params_, data_->dev_for(target), target,
                          target == TaskId::Depression ? "daic-dev" : "dailydialog-validation");
  }

  struct FitResult {
    ModelParams<Real> best;
    TrainHistory history;
  };

  // Trains up to max_epochs, keeping the parameters of the best dev epoch
  // (written to the checkpoint directory when one is configured).
  FitResult fit() {
    FitResult out;
    out.history.tasks = cfg_.tasks;
    EarlyStopping stopper(cfg_.patience);
    for (std::size_t epoch = 1; epoch <= cfg_.hyper.max_epochs; ++epoch) {
      const auto started = std::chrono::steady_clock::now();
      const EpochStats stats = train_epoch(epoch);
      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = stats.mean_loss;
      rec.dev = evaluate_dev();
      rec.best = stopper.update(epoch, rec.dev.macro_f1);
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      if (rec.best) {
        out.best = params_;
        out.history.best_epoch = epoch;
        if (cfg_.checkpoint_dir) save_checkpoint(*cfg_.checkpoint_dir, params_, data_->vocab);
      }
      log::debug("epoch " + std::to_string(epoch) + " dev " + rec.dev.task + " F1 " +
                 format_number(rec.dev.macro_f1) + (rec.best ? " (best)" : ""));
      out.history.epochs.push_back(std::move(rec));
      if (stopper.should_stop()) {
        out.history.stopped_early = epoch < cfg_.hyper.max_epochs;
        break;
      }
    }
    return out;
  }

 private:
  TrainConfig cfg_;
  const TrainData* data_;
  ModelParams<Real> params_;
  AdamState<Real> adam_;
  double last_grad_norm_ = 0.0;
};

}  // namespace hmtl
