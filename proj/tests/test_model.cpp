#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hmtl/model.hpp"
#include "hmtl/model_gradcheck.hpp"
#include "support/dialogs.hpp"

namespace hmtl {
namespace {

using testing::daic_dialog;
using testing::daily_dialog;
using testing::random_turns;

HyperParams small_hyper(std::size_t embed = 6, std::size_t hidden = 5, std::size_t doc = 4) {
  HyperParams hp;
  hp.embed_dim = embed;
  hp.turn_hidden = hidden;
  hp.doc_hidden = doc;
  hp.dropout = 0.0;
  return hp;
}

const TaskSet kDailyTasks{TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};
const TaskSet kAll{TaskId::Depression, TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};

Batch batch_of(const std::vector<Dialog>& dialogs) {
  std::vector<const Dialog*> refs;
  for (const auto& d : dialogs) refs.push_back(&d);
  return make_batch(refs);
}

TEST(Model, ParameterShapesFollowTaskSizes) {
  const auto p = ModelParams<float>::initialize(HyperParams{}, 100, 1);
  EXPECT_EQ(p.get("embedding").shape(), (Shape{100, 128}));
  EXPECT_EQ(p.get("turn.0.fwd.W").shape(), (Shape{256, 512}));
  EXPECT_EQ(p.get("doc.0.W").shape(), (Shape{384, 128}));
  EXPECT_EQ(p.get("head.emotion.W").shape(), (Shape{256, 7}));
  EXPECT_EQ(p.get("head.dialog_act.W").shape(), (Shape{256, 4}));
  EXPECT_EQ(p.get("head.topic.W").shape(), (Shape{128, 10}));
  EXPECT_EQ(p.get("head.depression.W").shape(), (Shape{128, 2}));
  const auto& fb = p.get("turn.0.fwd.b");
  for (std::size_t j = 128; j < 256; ++j) EXPECT_EQ(fb[j], 1.0f);
  for (const auto& e : p.entries()) EXPECT_TRUE(e.value.all_finite()) << e.name;
}

TEST(Model, InitializationIsSeeded) {
  const auto a = ModelParams<float>::initialize(small_hyper(), 20, 5);
  const auto b = ModelParams<float>::initialize(small_hyper(), 20, 5);
  const auto c = ModelParams<float>::initialize(small_hyper(), 20, 6);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(EncodeTurn, SingleTokenAtDefaultsHas256Entries) {
  const auto p = ModelParams<float>::initialize(HyperParams{}, 30, 2);
  Tape<float> tape;
  const auto bound = bind_params(tape, p);
  const std::size_t ids[] = {5};
  const std::uint8_t mask[] = {1};
  const auto v = encode_turn(tape, bound, ids, mask);
  EXPECT_EQ(v.shape(), (Shape{1, 256}));
}

TEST(EncodeTurn, TrailingPaddingDoesNotChangeOutput) {
  const auto p = ModelParams<double>::initialize(small_hyper(), 30, 3);
  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const std::size_t ids[] = {4, 9, 12};
  const std::uint8_t mask[] = {1, 1, 1};
  const std::size_t padded_ids[] = {4, 9, 12, 0, 0};
  const std::uint8_t padded_mask[] = {1, 1, 1, 0, 0};
  const auto a = encode_turn(tape, bound, ids, mask);
  const auto b = encode_turn(tape, bound, padded_ids, padded_mask);
  for (std::size_t i = 0; i < a.value().size(); ++i) EXPECT_EQ(a.value()[i], b.value()[i]);
}

TEST(EncodeTurn, AllMaskedTurnIsRejected) {
  const auto p = ModelParams<double>::initialize(small_hyper(), 30, 3);
  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const std::size_t ids[] = {0, 0};
  const std::uint8_t mask[] = {0, 0};
  EXPECT_THROW(encode_turn(tape, bound, ids, mask), ContractError);
}

// With every weight zero an LSTM step reduces to scalar recurrences on the
// biases: c' = s(bf) c + s(bi) tanh(bg), h' = s(bo) tanh(c').
TEST(EncodeTurn, ZeroWeightsReduceToBiasRecurrence) {
  auto p = ModelParams<double>::initialize(small_hyper(4, 3, 2), 20, 4);
  for (auto& e : p.entries()) {
    if (e.name.find(".W") != std::string::npos) e.value.fill(0.0);
  }
  auto& fb = p.get("turn.0.fwd.b");
  auto& bb = p.get("turn.0.bwd.b");
  const double bias[4] = {0.3, -0.2, 0.7, 0.1};  // input, forget, candidate, output
  for (std::size_t gate = 0; gate < 4; ++gate) {
    for (std::size_t j = 0; j < 3; ++j) {
      fb[gate * 3 + j] = bias[gate];
      bb[gate * 3 + j] = -bias[gate];
    }
  }
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto expected_after = [&](double sign, int steps) {
    double c = 0, h = 0;
    for (int s = 0; s < steps; ++s) {
      c = sig(sign * bias[1]) * c + sig(sign * bias[0]) * std::tanh(sign * bias[2]);
      h = sig(sign * bias[3]) * std::tanh(c);
    }
    return h;
  };

  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const std::uint8_t mask[] = {1, 1, 1};
  const std::size_t ids_a[] = {3, 4, 5};
  const std::size_t ids_b[] = {9, 17, 2};
  const auto a = encode_turn(tape, bound, ids_a, mask);
  const auto b = encode_turn(tape, bound, ids_b, mask);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(a.value()[j], expected_after(1.0, 3), 1e-12);
    EXPECT_NEAR(a.value()[3 + j], expected_after(-1.0, 3), 1e-12);
  }
  EXPECT_EQ(a.value(), b.value());
}

TEST(EncodeDialog, SingleTurnIsOneElmanStep) {
  const auto p = ModelParams<double>::initialize(small_hyper(4, 3, 2), 20, 5);
  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const auto x = Tensor<double>::from_rows({{0.1, -0.4, 0.3, 0.9, -0.2, 0.5}});
  const auto v = encode_dialog(tape, bound, tape.constant(x));
  const auto& w = p.get("doc.0.W");  // [(6 + 2) x 2]
  const auto& b = p.get("doc.0.b");
  for (std::size_t j = 0; j < 2; ++j) {
    double z = b[j];
    for (std::size_t i = 0; i < 6; ++i) z += x[i] * w(i, j);
    EXPECT_NEAR(v.value()[j], std::tanh(z), 1e-12);
  }
}

TEST(EncodeDialog, OutputWidthIndependentOfLengthAndOrderSensitive) {
  const auto p = ModelParams<double>::initialize(small_hyper(4, 3, 5), 20, 6);
  Rng rng(1);
  Tensor<double> turns = Tensor<double>::matrix(4, 6);
  for (auto& v : turns.data()) v = rng.uniform(-1, 1);
  Tensor<double> permuted = turns;
  for (std::size_t c = 0; c < 6; ++c) std::swap(permuted(0, c), permuted(3, c));
  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const auto a = encode_dialog(tape, bound, tape.constant(turns));
  const auto b = encode_dialog(tape, bound, tape.constant(permuted));
  EXPECT_EQ(a.shape(), (Shape{1, 5}));
  double diff = 0;
  for (std::size_t i = 0; i < 5; ++i) diff += std::abs(a.value()[i] - b.value()[i]);
  EXPECT_GT(diff, 1e-6);
  const auto one = encode_dialog(tape, bound, tape.constant(Tensor<double>::matrix(1, 6, 0.2)));
  EXPECT_EQ(one.shape(), (Shape{1, 5}));
}

TEST(ForwardDialog, DailyDialogShapes) {
  const auto p = ModelParams<float>::initialize(small_hyper(), 40, 7);
  Rng rng(2);
  std::vector<Dialog> dialogs{daily_dialog("d", random_turns(rng, 5, 6, 40), 3)};
  const auto batch = batch_of(dialogs);
  Tape<float> tape;
  const auto fwd = forward_dialog(tape, bind_params(tape, p), batch, kDailyTasks);
  EXPECT_EQ(fwd.at(TaskId::Emotion).shape(), (Shape{5, 7}));
  EXPECT_EQ(fwd.at(TaskId::DialogAct).shape(), (Shape{5, 4}));
  EXPECT_EQ(fwd.at(TaskId::Topic).shape(), (Shape{1, 10}));
  EXPECT_FALSE(fwd.logits[task_index(TaskId::Depression)].has_value());
}

TEST(ForwardDialog, DaicShapesAndTaskPairing) {
  const auto p = ModelParams<float>::initialize(small_hyper(), 40, 7);
  Rng rng(3);
  std::vector<Dialog> dialogs{daic_dialog("p", random_turns(rng, 6, 5, 40), 1)};
  const auto batch = batch_of(dialogs);
  Tape<float> tape;
  const auto bound = bind_params(tape, p);
  const auto fwd = forward_dialog(tape, bound, batch, TaskSet{TaskId::Depression});
  EXPECT_EQ(fwd.at(TaskId::Depression).shape(), (Shape{1, 2}));
  EXPECT_FALSE(fwd.logits[task_index(TaskId::Emotion)].has_value());
  EXPECT_THROW(forward_dialog(tape, bound, batch, TaskSet{TaskId::Emotion}), ConfigError);
}

TEST(ForwardDialog, TurnHeadsIgnoreLaterTurns) {
  const auto p = ModelParams<double>::initialize(small_hyper(), 40, 8);
  Rng rng(4);
  auto turns = random_turns(rng, 4, 5, 40);
  std::vector<Dialog> a{daily_dialog("a", turns, 0)};
  turns[2] = {7, 7, 7, 7, 7};
  turns[3] = {11};
  std::vector<Dialog> b{daily_dialog("b", turns, 0)};
  Tape<double> tape;
  const auto bound = bind_params(tape, p);
  const auto fa = forward_dialog(tape, bound, batch_of(a), kDailyTasks);
  const auto fb = forward_dialog(tape, bound, batch_of(b), kDailyTasks);
  for (TaskId t : {TaskId::Emotion, TaskId::DialogAct}) {
    const auto& la = fa.at(t).value();
    const auto& lb = fb.at(t).value();
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < la.cols(); ++c) EXPECT_EQ(la(r, c), lb(r, c));
    }
  }
  EXPECT_NE(fa.at(TaskId::Topic).value(), fb.at(TaskId::Topic).value());
}

TEST(ForwardDialog, PaddingFromBatchmatesChangesNoLogit) {
  for (DocCell cell : {DocCell::Elman, DocCell::Lstm}) {
    auto hp = small_hyper();
    hp.doc_cell = cell;
    hp.turn_layers = 2;
    hp.doc_layers = 2;
    const auto p = ModelParams<float>::initialize(hp, 40, 9);
    Rng rng(5);
    std::vector<Dialog> alone{daily_dialog("x", random_turns(rng, 2, 3, 40), 1)};
    std::vector<Dialog> padded = alone;
    padded.push_back(daily_dialog("long", random_turns(rng, 7, 12, 40), 2));
    Tape<float> tape;
    const auto bound = bind_params(tape, p);
    const auto f1 = forward_dialog(tape, bound, batch_of(alone), kDailyTasks);
    const auto f2 = forward_dialog(tape, bound, batch_of(padded), kDailyTasks);
    for (TaskId t : kDailyTasks.list()) {
      const auto& l1 = f1.at(t).value();
      const auto& l2 = f2.at(t).value();
      for (std::size_t r = 0; r < l1.rows(); ++r) {
        for (std::size_t c = 0; c < l1.cols(); ++c) EXPECT_NEAR(l1(r, c), l2(r, c), 1e-6);
      }
    }
  }
}

TEST(ForwardDialog, EvaluationIsDeterministicAndHeadsNormalize) {
  auto hp = small_hyper();
  hp.dropout = 0.5;
  const auto p = ModelParams<float>::initialize(hp, 40, 10);
  Rng rng(6);
  std::vector<Dialog> dialogs{daily_dialog("a", random_turns(rng, 3, 4, 40), 1),
                              daily_dialog("b", random_turns(rng, 5, 4, 40), 2)};
  const auto batch = batch_of(dialogs);
  Tape<float> t1, t2;
  const auto f1 = forward_dialog(t1, bind_params(t1, p), batch, kDailyTasks);
  const auto f2 = forward_dialog(t2, bind_params(t2, p), batch, kDailyTasks);
  for (TaskId t : kDailyTasks.list()) {
    EXPECT_EQ(f1.at(t).value(), f2.at(t).value());
    const auto probs = softmax(f1.at(t));
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      double s = 0;
      for (float v : probs.value().row(r)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(ForwardDialog, TrainModeRequiresRngForDropout) {
  const auto p = ModelParams<float>::initialize(HyperParams{.embed_dim = 4, .turn_hidden = 3,
                                                             .doc_hidden = 2, .dropout = 0.3},
                                                20, 1);
  Rng rng(7);
  std::vector<Dialog> dialogs{daily_dialog("a", random_turns(rng, 2, 3, 20), 1)};
  Tape<float> tape;
  EXPECT_THROW(forward_dialog(tape, bind_params(tape, p), batch_of(dialogs), kDailyTasks, RunMode{true, nullptr}),
               ContractError);
}

TEST(MtlLoss, SumOfComponents) {
  Tape<double> tape;
  const Var<double> parts[] = {tape.constant(Tensor<double>::scalar(1.0)),
                               tape.constant(Tensor<double>::scalar(2.0)),
                               tape.constant(Tensor<double>::scalar(0.5))};
  EXPECT_DOUBLE_EQ(sum_task_losses(std::span<const Var<double>>(parts)).value().item(), 3.5);
  EXPECT_THROW(sum_task_losses(std::span<const Var<double>>()), DegenerateBatchError);
}

TEST(MtlLoss, DaicTotalIsDepressionComponent) {
  const auto p = ModelParams<float>::initialize(small_hyper(), 40, 11);
  Rng rng(8);
  std::vector<Dialog> dialogs{daic_dialog("p", random_turns(rng, 4, 5, 40), 0)};
  const auto batch = batch_of(dialogs);
  Tape<float> tape;
  const TaskSet tasks{TaskId::Depression};
  const auto loss = mtl_loss(forward_dialog(tape, bind_params(tape, p), batch, tasks), batch, tasks);
  EXPECT_EQ(loss.total.value().item(), *loss.components[task_index(TaskId::Depression)]);
}

TEST(MtlLoss, DailyDialogAdditivity) {
  const auto p = ModelParams<float>::initialize(small_hyper(), 40, 12);
  Rng rng(9);
  std::vector<Dialog> dialogs;
  for (int i = 0; i < 4; ++i) {
    const auto turns = random_turns(rng, 2 + rng.below(4), 6, 40);
    std::vector<std::size_t> emo, act;
    for (std::size_t t = 0; t < turns.size(); ++t) {
      emo.push_back(rng.below(7));
      act.push_back(rng.below(4));
    }
    dialogs.push_back(daily_dialog("d" + std::to_string(i), turns, rng.below(10), emo, act));
  }
  const auto batch = batch_of(dialogs);
  Tape<float> tape;
  const auto loss = mtl_loss(forward_dialog(tape, bind_params(tape, p), batch, kDailyTasks), batch, kDailyTasks);
  double sum = 0;
  for (TaskId t : kDailyTasks.list()) sum += *loss.components[task_index(t)];
  const double total = loss.total.value().item();
  EXPECT_LE(std::abs(total - sum) / total, 1e-6);
}

TEST(MtlLoss, AuxiliaryLossesReachSharedEncoders) {
  const auto p = ModelParams<double>::initialize(small_hyper(), 40, 13);
  Rng rng(10);
  for (TaskId aux : {TaskId::Emotion, TaskId::DialogAct, TaskId::Topic}) {
    const auto turns = random_turns(rng, 3, 4, 40);
    std::vector<Dialog> dialogs{daily_dialog("d", turns, 4, {1, 2, 3}, {0, 1, 2})};
    const auto batch = batch_of(dialogs);
    Tape<double> tape;
    const auto bound = bind_params(tape, p);
    const TaskSet tasks{aux};
    const auto grads = backward(mtl_loss(forward_dialog(tape, bound, batch, tasks), batch, tasks).total);
    for (const char* name : {"embedding", "turn.0.fwd.W", "turn.0.fwd.b", "turn.0.bwd.W"}) {
      const auto* g = grads.find(bound[p.index_of(name)].id());
      ASSERT_NE(g, nullptr) << name;
      double norm = 0;
      for (double v : g->data()) norm += v * v;
      EXPECT_GT(norm, 0.0) << task_name(aux) << " -> " << name;
    }
    // Heads of other tasks receive nothing.
    EXPECT_FALSE(grads.contains(bound[p.index_of("head.depression.W")].id()));
  }
}

TEST(GradientCheck, MiniatureFullModel) {
  const auto check = check_model_gradients(MiniatureSpec{}, 1e-3);
  EXPECT_LT(check.result.max_relative_error, 1e-4) << "worst: " << check.worst_name;
  EXPECT_EQ(check.result.entries_checked, check.parameter_count);
}

TEST(GradientCheck, StackedEncodersAndGatedDialogCell) {
  MiniatureSpec spec;
  spec.vocab = 20;
  spec.embed = 5;
  spec.turn_hidden = 4;
  spec.doc_hidden = 4;
  spec.turn_layers = 2;
  spec.doc_layers = 2;
  spec.doc_cell = DocCell::Lstm;
  spec.seed = 3;
  const auto check = check_model_gradients(spec, 1e-3);
  EXPECT_LT(check.result.max_relative_error, 1e-4) << "worst: " << check.worst_name;
}

}  // namespace
}  // namespace hmtl
