#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "hmtl/adam.hpp"
#include "hmtl/checkpoint.hpp"
#include "hmtl/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace hmtl {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

HyperParams small_hyper(std::uint64_t seed = 0) {
  HyperParams hp;
  hp.embed_dim = 8;
  hp.turn_hidden = 8;
  hp.doc_hidden = 8;
  hp.seed = seed;
  return hp;
}

// ---- Adam -----------------------------------------------------------------

template <typename Real>
struct OneParam {
  Tensor<Real> value;
  AdamState<Real> state;
  explicit OneParam(Tensor<Real> v) : value(std::move(v)) {
    const Tensor<Real>* p[] = {&value};
    state = AdamState<Real>::for_shapes(p);
  }
  void step(const Tensor<Real>* grad, double lr) {
    Tensor<Real>* p[] = {&value};
    const Tensor<Real>* g[] = {grad};
    adam_step<Real>(p, g, state, lr);
  }
};

TEST(Adam, ZeroGradientLeavesParametersButAdvancesStep) {
  OneParam<double> p(Tensor<double>::from_rows({{1.0, -2.0, 3.0}}));
  const auto before = p.value;
  const Tensor<double> zero({1, 3}, 0.0);
  p.step(&zero, 1e-3);
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(p.state.t, 1u);
}

TEST(Adam, AbsentGradientLeavesParameterAndMoments) {
  OneParam<double> p(Tensor<double>::from_rows({{1.0, 2.0}}));
  const auto g = Tensor<double>::from_rows({{0.5, -0.5}});
  p.step(&g, 1e-2);
  const auto value = p.value;
  const auto m = p.state.m[0];
  p.step(nullptr, 1e-2);
  EXPECT_EQ(p.value, value);
  EXPECT_EQ(p.state.m[0], m);
  EXPECT_EQ(p.state.t, 2u);
}

TEST(Adam, FirstStepMovesBySignTimesLearningRate) {
  OneParam<double> p(Tensor<double>::from_rows({{0.0, 0.0, 0.0, 0.0}}));
  const auto g = Tensor<double>::from_rows({{3.0, -0.01, 1e-3, -250.0}});
  p.step(&g, 1e-3);
  // m_hat / sqrt(v_hat) = g / |g| at t = 1, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.value[i], -1e-3 * g[i] / (std::abs(g[i]) + 1e-8), 1e-18) << i;
    EXPECT_NEAR(p.value[i], g[i] > 0 ? -1e-3 : 1e-3, 1e-3 * 1e-5) << i;
  }
}

TEST(Adam, TrajectoryMatchesScalarOracle) {
  const std::vector<double> grads{0.1, -0.2, 0.3};
  const auto oracle = testing::adam_trajectory(0.5, grads, 1e-3);
  OneParam<double> p(Tensor<double>::scalar(0.5));
  for (std::size_t t = 0; t < grads.size(); ++t) {
    const auto g = Tensor<double>::scalar(grads[t]);
    p.step(&g, 1e-3);
    EXPECT_NEAR(p.value.item(), oracle[t], 1e-10) << "step " << t + 1;
  }
}

TEST(Adam, NonFiniteGradientAbortsWithoutSideEffects) {
  OneParam<float> p(Tensor<float>::from_rows({{1.0f, 2.0f}}));
  auto g = Tensor<float>::from_rows({{0.1f, std::numeric_limits<float>::quiet_NaN()}});
  const auto before = p.value;
  EXPECT_THROW(p.step(&g, 1e-3), NumericError);
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(p.state.t, 0u);
}

TEST(Adam, ShapeMismatchIsAContractError) {
  OneParam<double> p(Tensor<double>::from_rows({{1.0, 2.0}}));
  const Tensor<double> g({2, 1}, 0.0);
  EXPECT_THROW(p.step(&g, 1e-3), ContractError);
}

TEST(Clipping, RescalesToGlobalNorm) {
  auto a = Tensor<double>::from_rows({{3.0, 0.0}});
  auto b = Tensor<double>::from_rows({{0.0}, {4.0}});
  Tensor<double>* grads[] = {&a, nullptr, &b};
  EXPECT_DOUBLE_EQ(clip_global_norm<double>(grads, 1.0), 5.0);
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_NEAR(b[1], 0.8, 1e-15);
  EXPECT_NEAR(clip_global_norm<double>(grads, 10.0), 1.0, 1e-15);
  EXPECT_NEAR(a[0], 0.6, 1e-15);
}

// ---- Schedule and stopping ------------------------------------------------

TEST(Schedule, DegenerateAndMultisetCases) {
  const auto only_b = interleave_schedule(0, 5, 1);
  EXPECT_EQ(only_b, std::vector<Corpus>(5, Corpus::Daic));
  const auto mixed = interleave_schedule(2, 3, 7);
  EXPECT_EQ(std::count(mixed.begin(), mixed.end(), Corpus::DailyDialog), 2);
  EXPECT_EQ(std::count(mixed.begin(), mixed.end(), Corpus::Daic), 3);
  EXPECT_THROW(interleave_schedule(0, 0, 1), ContractError);
}

TEST(Schedule, SeedDeterminesOrder) {
  std::size_t differing = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_EQ(interleave_schedule(10, 12, seed), interleave_schedule(10, 12, seed));
    differing += interleave_schedule(10, 12, seed) != interleave_schedule(10, 12, seed + 1000);
  }
  EXPECT_GE(differing, 99u);
}

TEST(EarlyStopping, StopsAfterPatienceWithoutImprovement) {
  EarlyStopping s(2);
  const double dev[] = {0.40, 0.50, 0.45, 0.44, 0.43};
  std::size_t stopped = 0;
  for (std::size_t e = 1; e <= 5; ++e) {
    s.update(e, dev[e - 1]);
    if (s.should_stop()) {
      stopped = e;
      break;
    }
  }
  EXPECT_EQ(stopped, 4u);
  EXPECT_EQ(s.best_epoch(), 2u);
}

TEST(EarlyStopping, TiesAreNotImprovements) {
  EarlyStopping s(1);
  EXPECT_TRUE(s.update(1, 0.5));
  EXPECT_FALSE(s.update(2, 0.5));
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best_epoch(), 1u);
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

// ---- Training -------------------------------------------------------------

TEST(Training, DailyDialogBatchGivesDepressionHeadNoGradient) {
  const auto data = testing::random_corpus(3);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression, TaskId::Emotion};
  cfg.hyper = small_hyper();
  Trainer<double> trainer(cfg, data);
  const Dialog* refs[] = {&data.daily_train[0], &data.daily_train[1]};
  const Batch batch = make_batch(refs);
  const TaskSet tasks = batch_tasks(cfg.tasks, batch.corpus);
  EXPECT_EQ(tasks, TaskSet{TaskId::Emotion});
  const auto g = compute_gradients(trainer.params(), batch, tasks, RunMode{});
  const auto& p = trainer.params();
  EXPECT_FALSE(g.grads[p.index_of("head.depression.W")]);
  EXPECT_FALSE(g.grads[p.index_of("head.depression.b")]);
  EXPECT_FALSE(g.grads[p.index_of("head.topic.W")]);
  EXPECT_FALSE(g.grads[p.index_of("doc.0.W")]);
  EXPECT_TRUE(g.grads[p.index_of("head.emotion.W")]);
  EXPECT_TRUE(g.grads[p.index_of("turn.0.fwd.W")]);
  EXPECT_TRUE(g.grads[p.index_of("embedding")]);

  // An update from this batch leaves the depression head bit-identical.
  const auto head = p.get("head.depression.W");
  Rng rng(1);
  trainer.step(batch, rng);
  EXPECT_EQ(trainer.params().get("head.depression.W"), head);
  EXPECT_NE(trainer.params().get("head.emotion.W"), Tensor<double>(head.shape()));
}

TEST(Training, DepressionOnlySkipsDailyDialog) {
  const auto data = testing::random_corpus(4);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression};
  cfg.hyper = small_hyper();
  Trainer<float> trainer(cfg, data);
  const auto emotion_head = trainer.params().get("head.emotion.W");
  const auto stats = trainer.train_epoch(1);
  EXPECT_EQ(stats.daily_batches, 0u);
  EXPECT_EQ(stats.updates, data.daic_train.size());
  EXPECT_EQ(trainer.params().get("head.emotion.W"), emotion_head);
  EXPECT_TRUE(stats.mean_loss[task_index(TaskId::Depression)]);
  EXPECT_FALSE(stats.mean_loss[task_index(TaskId::Emotion)]);
}

TEST(Training, EpochConsumesEveryBatchOnce) {
  auto data = testing::random_corpus(5, 10, 7);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression, TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};
  cfg.hyper = small_hyper();
  cfg.hyper.batch_daily = 4;
  cfg.hyper.batch_daic = 2;
  Trainer<float> trainer(cfg, data);
  const auto stats = trainer.train_epoch(1);
  EXPECT_EQ(stats.daily_batches, 3u);
  EXPECT_EQ(stats.daic_batches, 4u);
  EXPECT_EQ(stats.updates, 7u);
  EXPECT_EQ(trainer.optimizer().t, 7u);
  for (TaskId t : kAllTasks) {
    ASSERT_TRUE(stats.mean_loss[task_index(t)]) << task_name(t);
    EXPECT_TRUE(std::isfinite(*stats.mean_loss[task_index(t)]));
  }
}

TEST(Training, StepLossEqualsSumOfComponents) {
  const auto data = testing::random_corpus(6);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression, TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};
  cfg.hyper = small_hyper();
  Trainer<double> trainer(cfg, data);
  const auto batches = make_batches(data.daily_train, 4, 0);
  Rng rng(2);
  for (const auto& b : batches) {
    const auto r = trainer.step(b, rng);
    double sum = 0;
    for (const auto& c : r.components) sum += c.value_or(0.0);
    EXPECT_LE(std::abs(r.total - sum), 1e-6 * std::abs(r.total));
  }
}

TEST(Training, ConfigValidation) {
  const auto data = testing::random_corpus(7);
  TrainConfig cfg;
  cfg.tasks = TaskSet{};
  EXPECT_THROW(Trainer<float>(cfg, data), ConfigError);
  TrainData no_daic = data;
  no_daic.daic_train.clear();
  cfg.tasks = TaskSet{TaskId::Depression};
  cfg.hyper = small_hyper();
  EXPECT_THROW(Trainer<float>(cfg, no_daic), ConfigError);
  cfg.tasks = TaskSet{TaskId::Emotion};
  EXPECT_NO_THROW(Trainer<float>(cfg, no_daic));
  EXPECT_EQ(cfg.target(), TaskId::Emotion);
}

TEST(Fit, HistoryIsReproducibleAndCheckpointIsByteIdentical) {
  const auto data = testing::random_corpus(8);
  TempDir a("hmtl_fit_a"), b("hmtl_fit_b");
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression, TaskId::Emotion, TaskId::Topic};
  cfg.hyper = small_hyper(42);
  cfg.hyper.max_epochs = 4;
  cfg.checkpoint_dir = a.path;
  const auto r1 = Trainer<float>(cfg, data).fit();
  cfg.checkpoint_dir = b.path;
  const auto r2 = Trainer<float>(cfg, data).fit();
  EXPECT_EQ(history_csv(r1.history), history_csv(r2.history));
  EXPECT_EQ(r1.best, r2.best);
  for (const char* f : {"manifest.txt", "params.bin", "vocab.txt"}) {
    EXPECT_EQ(slurp(a.path / f), slurp(b.path / f)) << f;
  }
  const auto csv = history_csv(r1.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "epoch,loss_depression,loss_emotion,loss_topic,dev_accuracy,dev_precision,dev_recall,"
            "dev_f1,best");
}

TEST(Fit, BestEpochHoldsTheMaximumDevScore) {
  const auto data = testing::random_corpus(9);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression};
  cfg.hyper = small_hyper(1);
  cfg.hyper.max_epochs = 12;
  cfg.patience = 3;
  const auto r = Trainer<float>(cfg, data).fit();
  ASSERT_TRUE(r.history.best_epoch);
  double best_so_far = -1;
  for (const auto& e : r.history.epochs) {
    EXPECT_EQ(e.best, e.dev.macro_f1 > best_so_far);
    best_so_far = std::max(best_so_far, e.dev.macro_f1);
    EXPECT_LE(e.dev.macro_f1, r.history.best_record().dev.macro_f1);
  }
  // The returned parameters reproduce the best epoch's dev score.
  EXPECT_DOUBLE_EQ(evaluate_model(r.best, data.daic_dev, TaskId::Depression).macro_f1,
                   r.history.best_record().dev.macro_f1);
}

TEST(Fit, PatienceAtLeastMaxEpochsRunsEveryEpoch) {
  const auto data = testing::random_corpus(10, 4, 4, 2, 3);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::Depression};
  cfg.hyper = small_hyper();
  cfg.hyper.max_epochs = 6;
  cfg.patience = 6;
  const auto r = Trainer<float>(cfg, data).fit();
  EXPECT_EQ(r.history.epochs.size(), 6u);
  EXPECT_FALSE(r.history.stopped_early);
}

TEST(Fit, PureAuxiliaryRunUsesDailyDialogValidation) {
  const auto data = testing::random_corpus(11);
  TrainConfig cfg;
  cfg.tasks = TaskSet{TaskId::DialogAct};
  cfg.hyper = small_hyper();
  cfg.hyper.max_epochs = 2;
  const auto r = Trainer<float>(cfg, data).fit();
  EXPECT_EQ(r.history.epochs[0].dev.task, "dialog_act");
  EXPECT_EQ(r.history.epochs[0].dev.items, 24u);
}

// ---- Checkpoints ----------------------------------------------------------

TEST(Checkpoint, RoundTripsExactly) {
  TempDir dir("hmtl_ckpt_roundtrip");
  const auto vocab = Vocabulary::from_tokens({"x", "y", "z"});
  auto hp = small_hyper(5);
  hp.doc_cell = DocCell::Lstm;
  hp.turn_layers = 2;
  hp.dropout = 0.25;
  hp.learning_rate = 3e-4;
  const auto params = ModelParams<float>::initialize(hp, vocab.size(), 5);
  save_checkpoint(dir.path, params, vocab);
  const auto ck = load_checkpoint<float>(dir.path);
  EXPECT_EQ(ck.params, params);
  EXPECT_EQ(ck.vocab, vocab);
  EXPECT_EQ(ck.info.precision, 32);
  EXPECT_EQ(ck.info.hyper, hp);
  const auto widened = load_checkpoint<double>(dir.path);
  EXPECT_EQ(widened.params.get("embedding")[7], static_cast<double>(params.get("embedding")[7]));
}

TEST(Checkpoint, DetectsTamperedVocabularyAndTruncation) {
  TempDir dir("hmtl_ckpt_tamper");
  const auto vocab = Vocabulary::from_tokens({"x", "y", "z"});
  save_checkpoint(dir.path, ModelParams<double>::initialize(small_hyper(), vocab.size(), 1), vocab);
  Vocabulary::from_tokens({"x", "z", "y"}).save(dir.path / "vocab.txt");
  EXPECT_THROW(load_checkpoint<double>(dir.path), CompatibilityError);
  vocab.save(dir.path / "vocab.txt");
  fs::resize_file(dir.path / "params.bin", fs::file_size(dir.path / "params.bin") - 8);
  EXPECT_THROW(load_checkpoint<double>(dir.path), IoError);
  EXPECT_THROW(load_checkpoint<double>(dir.path / "missing"), IoError);
}

TEST(Checkpoint, HyperParameterEntriesRoundTrip) {
  HyperParams hp;
  hp.dropout = 0.1;
  hp.learning_rate = 1e-3;
  hp.seed = 18446744073709551615ULL;
  HyperParams back;
  for (const auto& [k, v] : hyper_entries(hp)) ASSERT_TRUE(set_hyper(back, k, v)) << k;
  EXPECT_EQ(back, hp);
  EXPECT_FALSE(set_hyper(back, "nonsense", "1"));
  EXPECT_THROW(set_hyper(back, "embed_dim", "12x"), ConfigError);
}

}  // namespace
}  // namespace hmtl
