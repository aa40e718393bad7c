#pragma once

// Hierarchical multi-task network with hard parameter sharing:
//
//   tokens -> shared embedding -> shared bi-LSTM turn encoder -> turn vectors
//   turn vectors -> emotion / dialog-act heads                (turn level)
//   turn vectors -> shared dialog recurrence -> dialog vector
//   dialog vector -> topic / depression heads                 (dialog level)
//
// All turns of a batch are encoded together as rows of one matrix; padded
// positions carry the previous recurrent state forward through a 0/1 blend,
// so padding never changes a real output.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hmtl/autodiff.hpp"
#include "hmtl/batch.hpp"
#include "hmtl/random.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

enum class DocCell { Elman, Lstm };

inline std::string_view doc_cell_name(DocCell c) { return c == DocCell::Elman ? "elman" : "lstm"; }

struct HyperParams {
  std::size_t embed_dim = 128;
  std::size_t turn_hidden = 128;
  std::size_t turn_layers = 1;
  std::size_t doc_hidden = 128;
  std::size_t doc_layers = 1;
  DocCell doc_cell = DocCell::Elman;
  double dropout = 0.1;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 100;
  std::size_t batch_daily = 4;
  std::size_t batch_daic = 1;
  std::uint64_t seed = 0;

  // `grid_only` additionally restricts the dialog encoder to the searched
  // sizes (layers 1-3, hidden 128/256/512).
  void validate(bool grid_only = false) const {
    auto positive = [](std::size_t v, const char* key) {
      if (v == 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(embed_dim, "embed_dim");
    positive(turn_hidden, "turn_hidden");
    positive(turn_layers, "turn_layers");
    positive(doc_hidden, "doc_hidden");
    positive(doc_layers, "doc_layers");
    positive(max_epochs, "max_epochs");
    positive(batch_daily, "batch_daily");
    positive(batch_daic, "batch_daic");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be positive");
    }
    if (grid_only) {
      if (doc_layers < 1 || doc_layers > 3) throw ConfigError("doc_layers must be 1, 2 or 3");
      if (doc_hidden != 128 && doc_hidden != 256 && doc_hidden != 512) {
        throw ConfigError("doc_hidden must be 128, 256 or 512");
      }
    }
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct NamedTensorIndex {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

// Positions of each parameter inside ModelParams::entries.
struct ParamLayout {
  std::size_t embedding = 0;
  std::vector<std::array<NamedTensorIndex, 2>> turn;  // [layer][forward, backward]
  std::vector<NamedTensorIndex> doc;                   // [layer]
  std::array<NamedTensorIndex, 4> heads{};             // by task_index
};

template <typename Real>
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Tensor<Real> value;
  };

  ModelParams() = default;

  // Uniform in [-a, a] with a = 1/sqrt(fan_in); embedding rows use fan_in 1
  // (one-hot input); LSTM forget-gate biases start at 1.
  static ModelParams initialize(const HyperParams& hp, std::size_t vocab_size, std::uint64_t seed) {
    hp.validate();
    if (vocab_size < 3) throw ContractError("vocabulary must hold at least one real token");
    ModelParams p;
    p.hyper_ = hp;
    p.vocab_size_ = vocab_size;
    Rng rng(seed);

    auto uniform = [&rng](Shape shape, double bound) {
      Tensor<Real> t(std::move(shape));
      for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
      return t;
    };
    auto linear = [&](const std::string& name, std::size_t fan_in, std::size_t out) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      NamedTensorIndex idx;
      idx.weight = p.add(name + ".W", uniform({fan_in, out}, a));
      idx.bias = p.add(name + ".b", uniform({1, out}, a));
      return idx;
    };
    auto lstm = [&](const std::string& name, std::size_t in, std::size_t hidden) {
      auto idx = linear(name, in + hidden, 4 * hidden);
      auto& bias = p.entries_[idx.bias].value;
      for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = Real(1);
      return idx;
    };

    p.layout_.embedding = p.add("embedding", uniform({vocab_size, hp.embed_dim}, 1.0));
    for (std::size_t l = 0; l < hp.turn_layers; ++l) {
      const std::size_t in = l == 0 ? hp.embed_dim : 2 * hp.turn_hidden;
      const std::string base = "turn." + std::to_string(l);
      p.layout_.turn.push_back({lstm(base + ".fwd", in, hp.turn_hidden),
                                lstm(base + ".bwd", in, hp.turn_hidden)});
    }
    for (std::size_t l = 0; l < hp.doc_layers; ++l) {
      const std::size_t in = l == 0 ? 2 * hp.turn_hidden : hp.doc_hidden;
      const std::string base = "doc." + std::to_string(l);
      p.layout_.doc.push_back(hp.doc_cell == DocCell::Elman
                                  ? linear(base, in + hp.doc_hidden, hp.doc_hidden)
                                  : lstm(base, in, hp.doc_hidden));
    }
    for (TaskId task : kAllTasks) {
      const std::size_t in = task_level(task) == TaskLevel::Turn ? 2 * hp.turn_hidden
                                                                 : hp.doc_hidden;
      p.layout_.heads[task_index(task)] =
          linear("head." + std::string(task_name(task)), in, class_count(task));
    }
    return p;
  }

  const HyperParams& hyper() const { return hyper_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const ParamLayout& layout() const { return layout_; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  Tensor<Real>& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor<Real>& operator[](std::size_t i) const { return entries_[i].value; }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    throw ContractError("no parameter named '" + std::string(name) + "'");
  }
  Tensor<Real>& get(std::string_view name) { return entries_[index_of(name)].value; }
  const Tensor<Real>& get(std::string_view name) const { return entries_[index_of(name)].value; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.assign_structure(hyper_, vocab_size_, layout_);
    for (const auto& e : entries_) out.entries().push_back({e.name, e.value.template cast<Other>()});
    return out;
  }

  void assign_structure(const HyperParams& hp, std::size_t vocab_size, const ParamLayout& layout) {
    hyper_ = hp;
    vocab_size_ = vocab_size;
    layout_ = layout;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.entries_.size() != b.entries_.size() || !(a.hyper_ == b.hyper_)) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t add(std::string name, Tensor<Real> value) {
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.size() - 1;
  }

  HyperParams hyper_;
  std::size_t vocab_size_ = 0;
  ParamLayout layout_;
  std::vector<Entry> entries_;
};

// Parameters registered as leaves of one tape, parallel to entries().
template <typename Real>
struct BoundParams {
  const ModelParams<Real>* params = nullptr;
  std::vector<Var<Real>> vars;

  const Var<Real>& operator[](std::size_t i) const { return vars[i]; }
};

template <typename Real>
BoundParams<Real> bind_params(Tape<Real>& tape, const ModelParams<Real>& params) {
  BoundParams<Real> b{&params, {}};
  b.vars.reserve(params.size());
  for (const auto& e : params.entries()) b.vars.push_back(tape.parameter(e.value));
  return b;
}

// Binds caller-supplied leaf vars (e.g. from gradient_check) in entries() order.
template <typename Real>
BoundParams<Real> bind_params(const ModelParams<Real>& params, std::span<const Var<Real>> vars) {
  if (vars.size() != params.size()) throw ContractError("bind: parameter count mismatch");
  return BoundParams<Real>{&params, std::vector<Var<Real>>(vars.begin(), vars.end())};
}

struct RunMode {
  bool train = false;
  Rng* rng = nullptr;  // required when train is set and dropout > 0
};

namespace detail {

// Precomputed 0/1 blend masks for one time step, or none when every row is live.
template <typename Real>
struct StepMask {
  std::optional<Var<Real>> keep;
  std::optional<Var<Real>> hold;
};

template <typename Real>
StepMask<Real> make_step_mask(Tape<Real>& tape, const std::vector<std::uint8_t>& live,
                              std::size_t width) {
  bool all = true;
  for (auto v : live) all = all && v;
  if (all) return {};
  Tensor<Real> keep = Tensor<Real>::matrix(live.size(), width);
  Tensor<Real> hold = Tensor<Real>::matrix(live.size(), width);
  for (std::size_t r = 0; r < live.size(); ++r) {
    std::fill(keep.row(r).begin(), keep.row(r).end(), live[r] ? Real(1) : Real(0));
    std::fill(hold.row(r).begin(), hold.row(r).end(), live[r] ? Real(0) : Real(1));
  }
  return {tape.constant(std::move(keep)), tape.constant(std::move(hold))};
}

template <typename Real>
Var<Real> blend(const StepMask<Real>& m, const Var<Real>& next, const Var<Real>& prev) {
  if (!m.keep) return next;
  return add(mul(*m.keep, next), mul(*m.hold, prev));
}

template <typename Real>
std::pair<Var<Real>, Var<Real>> lstm_step(const Var<Real>& x, const Var<Real>& h,
                                          const Var<Real>& c, const Var<Real>& w,
                                          const Var<Real>& b, std::size_t hidden) {
  const auto z = add(matmul(concat({x, h}), w), b);
  const auto in_gate = sigmoid(slice(z, 0, hidden));
  const auto forget = sigmoid(slice(z, hidden, 2 * hidden));
  const auto cand = tanh(slice(z, 2 * hidden, 3 * hidden));
  const auto out_gate = sigmoid(slice(z, 3 * hidden, 4 * hidden));
  const auto c_next = add(mul(forget, c), mul(in_gate, cand));
  const auto h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

template <typename Real>
Var<Real> head_logits(const Var<Real>& input, const BoundParams<Real>& bound, TaskId task) {
  const auto& idx = bound.params->layout().heads[task_index(task)];
  return add(matmul(input, bound[idx.weight]), bound[idx.bias]);
}

}  // namespace detail

// Token matrix for a set of turns: row-major [rows x width] ids and 0/1 mask.
struct TokenGrid {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> mask;
};

// Bi-LSTM over every row of `grid`. Returns [rows x 2*turn_hidden]: the
// forward state after the last live token next to the backward state at the
// first position. No dropout is applied here.
template <typename Real>
Var<Real> encode_turn_grid(Tape<Real>& tape, const BoundParams<Real>& bound, const TokenGrid& grid) {
  const auto& hp = bound.params->hyper();
  const auto& layout = bound.params->layout();
  const std::size_t n = grid.rows, len = grid.width, hidden = hp.turn_hidden;
  for (std::size_t r = 0; r < n; ++r) {
    bool any = false;
    for (std::size_t k = 0; k < len; ++k) any = any || grid.mask[r * len + k];
    if (!any) throw ContractError("encode_turn: turn " + std::to_string(r) + " has no unmasked token");
  }

  std::vector<Var<Real>> inputs;
  std::vector<detail::StepMask<Real>> masks;
  inputs.reserve(len);
  masks.reserve(len);
  std::vector<std::size_t> column(n);
  std::vector<std::uint8_t> live(n);
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t r = 0; r < n; ++r) {
      column[r] = grid.ids[r * len + k];
      live[r] = grid.mask[r * len + k];
    }
    inputs.push_back(gather_rows(bound[layout.embedding], column));
    masks.push_back(detail::make_step_mask(tape, live, hidden));
  }

  const auto zeros = tape.constant(Tensor<Real>::matrix(n, hidden));
  Var<Real> fwd_final, bwd_first;
  for (std::size_t l = 0; l < layout.turn.size(); ++l) {
    const bool top = l + 1 == layout.turn.size();
    std::vector<Var<Real>> fwd(len), bwd(len);
    for (int dir = 0; dir < 2; ++dir) {
      const auto& idx = layout.turn[l][dir];
      Var<Real> h = zeros, c = zeros;
      for (std::size_t s = 0; s < len; ++s) {
        const std::size_t k = dir == 0 ? s : len - 1 - s;
        auto [hn, cn] = detail::lstm_step(inputs[k], h, c, bound[idx.weight], bound[idx.bias], hidden);
        h = detail::blend(masks[k], hn, h);
        c = detail::blend(masks[k], cn, c);
        (dir == 0 ? fwd : bwd)[k] = h;
      }
      if (dir == 0) fwd_final = h;
    }
    bwd_first = bwd[0];
    if (!top) {
      for (std::size_t k = 0; k < len; ++k) inputs[k] = concat({fwd[k], bwd[k]});
    }
  }
  return concat({fwd_final, bwd_first});
}

// Single-turn encoder: [1 x 2*turn_hidden], dropout applied in train mode.
template <typename Real>
Var<Real> encode_turn(Tape<Real>& tape, const BoundParams<Real>& bound,
                      std::span<const std::size_t> token_ids, std::span<const std::uint8_t> token_mask,
                      RunMode mode = {}) {
  if (token_ids.size() != token_mask.size() || token_ids.empty()) {
    throw ContractError("encode_turn: ids and mask must be nonempty and equally long");
  }
  TokenGrid grid{1, token_ids.size(), {token_ids.begin(), token_ids.end()},
                 {token_mask.begin(), token_mask.end()}};
  auto v = encode_turn_grid(tape, bound, grid);
  Rng fallback(0);
  return dropout(v, bound.params->hyper().dropout, mode.rng ? *mode.rng : fallback, mode.train);
}

// Recurrence over each dialog's turn vectors. `rows[d]` lists the rows of
// `turn_vectors` belonging to dialog d in order. Returns [D x doc_hidden]:
// the top layer's state after each dialog's last turn. No dropout here.
template <typename Real>
Var<Real> encode_dialog_rows(Tape<Real>& tape, const BoundParams<Real>& bound,
                             const Var<Real>& turn_vectors,
                             const std::vector<std::vector<std::size_t>>& rows) {
  const auto& hp = bound.params->hyper();
  const auto& layout = bound.params->layout();
  const std::size_t dialogs = rows.size(), hidden = hp.doc_hidden;
  std::size_t steps = 0;
  for (const auto& r : rows) {
    if (r.empty()) throw ContractError("encode_dialog: dialog without turns");
    steps = std::max(steps, r.size());
  }

  std::vector<Var<Real>> inputs;
  std::vector<detail::StepMask<Real>> masks;
  std::vector<std::size_t> pick(dialogs);
  std::vector<std::uint8_t> live(dialogs);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t d = 0; d < dialogs; ++d) {
      live[d] = t < rows[d].size();
      pick[d] = rows[d][live[d] ? t : rows[d].size() - 1];
    }
    inputs.push_back(gather_rows(turn_vectors, pick));
    masks.push_back(detail::make_step_mask(tape, live, hidden));
  }

  const auto zeros = tape.constant(Tensor<Real>::matrix(dialogs, hidden));
  Var<Real> h = zeros;
  for (std::size_t l = 0; l < layout.doc.size(); ++l) {
    const auto& w = bound[layout.doc[l].weight];
    const auto& b = bound[layout.doc[l].bias];
    h = zeros;
    Var<Real> c = zeros;
    for (std::size_t t = 0; t < steps; ++t) {
      Var<Real> hn;
      if (hp.doc_cell == DocCell::Elman) {
        hn = tanh(add(matmul(concat({inputs[t], h}), w), b));
      } else {
        auto [lh, lc] = detail::lstm_step(inputs[t], h, c, w, b, hidden);
        hn = lh;
        c = detail::blend(masks[t], lc, c);
      }
      h = detail::blend(masks[t], hn, h);
      inputs[t] = h;
    }
  }
  return h;
}

// Single-dialog encoder over turn vectors [T x 2*turn_hidden]:
// [1 x doc_hidden], dropout applied in train mode.
template <typename Real>
Var<Real> encode_dialog(Tape<Real>& tape, const BoundParams<Real>& bound,
                        const Var<Real>& turn_vectors, RunMode mode = {}) {
  std::vector<std::size_t> rows(turn_vectors.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto v = encode_dialog_rows(tape, bound, turn_vectors, {rows});
  Rng fallback(0);
  return dropout(v, bound.params->hyper().dropout, mode.rng ? *mode.rng : fallback, mode.train);
}

template <typename Real>
struct ForwardResult {
  std::array<std::optional<Var<Real>>, 4> logits;  // by task_index
  Var<Real> turn_vectors;                          // [N x 2*turn_hidden], real turns only
  std::optional<Var<Real>> dialog_vectors;         // [D x doc_hidden]
  std::vector<std::size_t> turn_offset;            // first row of each dialog

  const Var<Real>& at(TaskId t) const {
    if (!logits[task_index(t)]) {
      throw ContractError("no logits for task " + std::string(task_name(t)));
    }
    return *logits[task_index(t)];
  }
};

// One shared encoder pass over the batch feeding every requested head.
// Turn-level logits have one row per real turn (dialog-major order);
// dialog-level logits one row per dialog.
template <typename Real>
ForwardResult<Real> forward_dialog(Tape<Real>& tape, const BoundParams<Real>& bound,
                                   const Batch& batch, const TaskSet& tasks, RunMode mode = {}) {
  if (tasks.empty()) throw ConfigError("forward_dialog: no task requested");
  for (TaskId t : tasks.list()) {
    if (!batch.has(t)) {
      throw ConfigError("task " + std::string(task_name(t)) + " is not annotated in " +
                        std::string(corpus_name(batch.corpus)) + " batches");
    }
  }
  const auto& hp = bound.params->hyper();
  if (mode.train && hp.dropout > 0.0 && !mode.rng) {
    throw ContractError("forward_dialog: train mode with dropout needs an rng");
  }
  Rng fallback(0);
  Rng& rng = mode.rng ? *mode.rng : fallback;

  ForwardResult<Real> out;
  TokenGrid grid;
  grid.width = batch.max_tokens;
  std::vector<std::vector<std::size_t>> rows(batch.size());
  for (std::size_t d = 0; d < batch.size(); ++d) {
    out.turn_offset.push_back(grid.rows);
    for (std::size_t t = 0; t < batch.turn_count(d); ++t) {
      rows[d].push_back(grid.rows++);
      const std::size_t base = batch.token_index(d, t, 0);
      grid.ids.insert(grid.ids.end(), batch.token_ids.begin() + base,
                      batch.token_ids.begin() + base + grid.width);
      grid.mask.insert(grid.mask.end(), batch.token_mask.begin() + base,
                       batch.token_mask.begin() + base + grid.width);
    }
  }

  out.turn_vectors = dropout(encode_turn_grid(tape, bound, grid), hp.dropout, rng, mode.train);
  for (TaskId t : {TaskId::Emotion, TaskId::DialogAct}) {
    if (tasks.contains(t)) out.logits[task_index(t)] = detail::head_logits(out.turn_vectors, bound, t);
  }
  if (tasks.contains(TaskId::Topic) || tasks.contains(TaskId::Depression)) {
    out.dialog_vectors =
        dropout(encode_dialog_rows(tape, bound, out.turn_vectors, rows), hp.dropout, rng, mode.train);
    for (TaskId t : {TaskId::Topic, TaskId::Depression}) {
      if (tasks.contains(t)) out.logits[task_index(t)] = detail::head_logits(*out.dialog_vectors, bound, t);
    }
  }
  return out;
}

// Gold labels aligned with forward_dialog's logit rows.
inline std::vector<std::size_t> batch_targets(const Batch& batch, TaskId task) {
  std::vector<std::size_t> out;
  if (task_level(task) == TaskLevel::Turn) {
    const auto& src = task == TaskId::Emotion ? batch.emotion : batch.act;
    for (std::size_t d = 0; d < batch.size(); ++d) {
      for (std::size_t t = 0; t < batch.turn_count(d); ++t) out.push_back(src[batch.turn_index(d, t)]);
    }
  } else {
    out = task == TaskId::Topic ? batch.topic : batch.depression;
  }
  return out;
}

template <typename Real>
struct LossResult {
  Var<Real> total;
  std::array<std::optional<Real>, 4> components;  // by task_index
};

// Equal-weight sum of scalar task losses.
template <typename Real>
Var<Real> sum_task_losses(std::span<const Var<Real>> losses) {
  if (losses.empty()) throw DegenerateBatchError("mtl_loss: no task present");
  Var<Real> total = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  return total;
}

// Cross-entropy per requested task, summed with equal weights.
template <typename Real>
LossResult<Real> mtl_loss(const ForwardResult<Real>& fwd, const Batch& batch, const TaskSet& tasks) {
  LossResult<Real> out;
  std::vector<Var<Real>> parts;
  for (TaskId t : tasks.list()) {
    const auto targets = batch_targets(batch, t);
    auto loss = cross_entropy(fwd.at(t), std::span<const std::size_t>(targets));
    out.components[task_index(t)] = loss.value().item();
    parts.push_back(loss);
  }
  out.total = sum_task_losses(std::span<const Var<Real>>(parts));
  return out;
}

template <typename Real>
std::vector<std::size_t> argmax_rows(const Tensor<Real>& logits) {
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace hmtl
