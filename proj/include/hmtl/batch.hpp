#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hmtl/corpus.hpp"
#include "hmtl/random.hpp"

namespace hmtl {

// Padded view over dialogs of a single corpus. Token ids are laid out
// [dialog][turn][token]; padded slots hold Vocabulary::kPad and a zero mask.
// Per-task label arrays are only meaningful when the presence flag is set.
struct Batch {
  Corpus corpus = Corpus::DailyDialog;
  std::vector<const Dialog*> dialogs;
  std::size_t max_turns = 0;
  std::size_t max_tokens = 0;

  std::vector<std::size_t> token_ids;    // D * max_turns * max_tokens
  std::vector<std::uint8_t> token_mask;  // same layout
  std::vector<std::uint8_t> turn_mask;   // D * max_turns

  std::vector<std::size_t> emotion;     // D * max_turns
  std::vector<std::size_t> act;         // D * max_turns
  std::vector<std::size_t> topic;       // D
  std::vector<std::size_t> depression;  // D
  TaskSet present;

  std::size_t size() const { return dialogs.size(); }
  std::size_t turn_count(std::size_t d) const { return dialogs[d]->turns.size(); }

  std::size_t token_index(std::size_t d, std::size_t t, std::size_t k) const {
    return (d * max_turns + t) * max_tokens + k;
  }
  std::size_t turn_index(std::size_t d, std::size_t t) const { return d * max_turns + t; }

  bool has(TaskId task) const { return present.contains(task); }
};

// Builds one batch. All dialogs must come from the same corpus and carry
// the same label kinds, and every turn must already be encoded.
inline Batch make_batch(std::span<const Dialog* const> dialogs) {
  if (dialogs.empty()) throw ContractError("make_batch: no dialogs");
  Batch b;
  b.corpus = dialogs[0]->corpus;
  for (TaskId task : kAllTasks) {
    if (dialogs[0]->has_label(task)) b.present.insert(task);
  }
  for (const Dialog* d : dialogs) {
    if (d->corpus != b.corpus) {
      throw ContractError("make_batch: dialogs " + dialogs[0]->id + " and " + d->id +
                          " come from different corpora");
    }
    if (d->turns.empty()) throw ContractError("make_batch: dialog " + d->id + " has no turns");
    for (TaskId task : kAllTasks) {
      if (d->has_label(task) != b.present.contains(task)) {
        throw ContractError("make_batch: inconsistent " + std::string(task_name(task)) +
                            " labels in dialog " + d->id);
      }
    }
    b.max_turns = std::max(b.max_turns, d->turns.size());
    for (const auto& t : d->turns) {
      if (t.token_ids.empty()) {
        throw ContractError("make_batch: dialog " + d->id + " has an unencoded or empty turn");
      }
      b.max_tokens = std::max(b.max_tokens, t.token_ids.size());
    }
  }
  b.dialogs.assign(dialogs.begin(), dialogs.end());

  const std::size_t n = b.size();
  b.token_ids.assign(n * b.max_turns * b.max_tokens, Vocabulary::kPad);
  b.token_mask.assign(b.token_ids.size(), 0);
  b.turn_mask.assign(n * b.max_turns, 0);
  b.emotion.assign(n * b.max_turns, 0);
  b.act.assign(n * b.max_turns, 0);
  b.topic.assign(n, 0);
  b.depression.assign(n, 0);
  for (std::size_t d = 0; d < n; ++d) {
    const Dialog& dialog = *b.dialogs[d];
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const Turn& turn = dialog.turns[t];
      b.turn_mask[b.turn_index(d, t)] = 1;
      for (std::size_t k = 0; k < turn.token_ids.size(); ++k) {
        b.token_ids[b.token_index(d, t, k)] = turn.token_ids[k];
        b.token_mask[b.token_index(d, t, k)] = 1;
      }
      if (turn.emotion) b.emotion[b.turn_index(d, t)] = *turn.emotion;
      if (turn.act) b.act[b.turn_index(d, t)] = *turn.act;
    }
    if (dialog.topic) b.topic[d] = *dialog.topic;
    if (dialog.depression) b.depression[d] = *dialog.depression;
  }
  return b;
}

// Seeded shuffle, then consecutive partition; the last batch may be short.
inline std::vector<Batch> make_batches(const std::vector<Dialog>& dialogs, std::size_t batch_size,
                                       std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  if (dialogs.empty()) throw ContractError("make_batches: empty dialog list");
  std::vector<const Dialog*> order;
  order.reserve(dialogs.size());
  for (const auto& d : dialogs) order.push_back(&d);
  Rng rng(shuffle_seed);
  shuffle(order, rng);
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - i);
    batches.push_back(make_batch(std::span<const Dialog* const>(order.data() + i, len)));
  }
  return batches;
}

}  // namespace hmtl
