#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmtl/batch.hpp"
#include "hmtl/gradient_check.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

struct MiniatureSpec {
  std::size_t vocab = 50;
  std::size_t embed = 8;
  std::size_t turn_hidden = 8;
  std::size_t doc_hidden = 8;
  std::size_t turn_layers = 1;
  std::size_t doc_layers = 1;
  DocCell doc_cell = DocCell::Elman;
  std::size_t turns = 3;
  std::size_t tokens = 4;
  std::uint64_t seed = 7;
};

// A dialog carrying all four label kinds so every head contributes to the
// loss. Only gradient checking builds such a dialog.
inline Dialog miniature_dialog(const MiniatureSpec& spec) {
  Rng rng(mix_seed(spec.seed, 1));
  Dialog d;
  d.id = "gradcheck";
  for (std::size_t t = 0; t < spec.turns; ++t) {
    Turn turn;
    turn.speaker = t % 2 ? Speaker::B : Speaker::A;
    for (std::size_t k = 0; k < spec.tokens; ++k) {
      const std::size_t id = 2 + rng.below(spec.vocab - 2);
      turn.token_ids.push_back(id);
      turn.tokens.push_back("w" + std::to_string(id));
    }
    turn.emotion = rng.below(class_count(TaskId::Emotion));
    turn.act = rng.below(class_count(TaskId::DialogAct));
    d.turns.push_back(std::move(turn));
  }
  d.topic = rng.below(class_count(TaskId::Topic));
  d.depression = rng.below(2);
  return d;
}

inline HyperParams miniature_hyper(const MiniatureSpec& spec) {
  HyperParams hp;
  hp.embed_dim = spec.embed;
  hp.turn_hidden = spec.turn_hidden;
  hp.turn_layers = spec.turn_layers;
  hp.doc_hidden = spec.doc_hidden;
  hp.doc_layers = spec.doc_layers;
  hp.doc_cell = spec.doc_cell;
  hp.dropout = 0.0;
  return hp;
}

struct ModelGradCheck {
  GradCheckResult result;
  std::string worst_name;
  std::size_t parameter_count = 0;
};

// Full MTL loss of the miniature model (all four heads, dropout off) checked
// against central differences in 64-bit.
inline ModelGradCheck check_model_gradients(const MiniatureSpec& spec, double eps) {
  auto params = ModelParams<double>::initialize(miniature_hyper(spec), spec.vocab, spec.seed);
  const Dialog dialog = miniature_dialog(spec);
  const Dialog* refs[] = {&dialog};
  const Batch batch = make_batch(refs);
  const TaskSet all{TaskId::Depression, TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};

  std::vector<Tensor<double>*> tensors;
  for (auto& e : params.entries()) tensors.push_back(&e.value);
  Objective f = [&](Tape<double>& tape, std::span<const Var<double>> vars) {
    const auto bound = bind_params(params, vars);
    const auto fwd = forward_dialog(tape, bound, batch, all, RunMode{false, nullptr});
    return mtl_loss(fwd, batch, all).total;
  };
  ModelGradCheck out;
  out.result = gradient_check(f, tensors, eps);
  out.worst_name = params.entries()[out.result.worst_param].name;
  out.parameter_count = params.parameter_count();
  return out;
}

}  // namespace hmtl
