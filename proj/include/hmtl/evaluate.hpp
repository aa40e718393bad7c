#pragma once

// Scoring a model on a set of dialogs: dropout off, argmax per turn for
// turn-level tasks and per dialog for dialog-level tasks.

#include <cstddef>
#include <string>
#include <vector>

#include "hmtl/batch.hpp"
#include "hmtl/checkpoint.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

struct Predictions {
  std::vector<std::size_t> gold;
  std::vector<std::size_t> pred;
};

// Dialogs are scored in their given order, `chunk` at a time.
template <typename Real>
Predictions predict(const ModelParams<Real>& params, const std::vector<Dialog>& dialogs, TaskId task,
                    std::size_t chunk = 16) {
  if (dialogs.empty()) throw ContractError("predict: no dialogs");
  if (chunk == 0) throw ContractError("predict: chunk must be positive");
  Predictions out;
  std::vector<const Dialog*> refs;
  for (const auto& d : dialogs) refs.push_back(&d);
  for (std::size_t i = 0; i < refs.size(); i += chunk) {
    const std::size_t len = std::min(chunk, refs.size() - i);
    const Batch batch = make_batch(std::span<const Dialog* const>(refs.data() + i, len));
    Tape<Real> tape;
    const auto bound = bind_params(tape, params);
    const auto fwd = forward_dialog(tape, bound, batch, TaskSet{task}, RunMode{false, nullptr});
    const auto gold = batch_targets(batch, task);
    const auto pred = argmax_rows(fwd.at(task).value());
    out.gold.insert(out.gold.end(), gold.begin(), gold.end());
    out.pred.insert(out.pred.end(), pred.begin(), pred.end());
  }
  return out;
}

template <typename Real>
MetricsReport evaluate_model(const ModelParams<Real>& params, const std::vector<Dialog>& dialogs,
                             TaskId task, std::string split = {}) {
  const auto p = predict(params, dialogs, task);
  auto report = compute_metrics(p.gold, p.pred, class_count(task));
  report.task = std::string(task_name(task));
  report.split = std::move(split);
  return report;
}

// Checkpoint variant: `vocab` is the vocabulary `dialogs` were encoded with
// and must be the checkpoint's own.
template <typename Real>
MetricsReport evaluate_model(const Checkpoint<Real>& ck, const Vocabulary& vocab,
                             const std::vector<Dialog>& dialogs, TaskId task, std::string split = {}) {
  require_vocabulary(ck.info.vocab_hash, vocab);
  return evaluate_model(ck.params, dialogs, task, std::move(split));
}

}  // namespace hmtl
