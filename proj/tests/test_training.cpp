#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "stressprog/errors.hpp"
#include "stressprog/loss.hpp"
#include "stressprog/rng.hpp"
#include "stressprog/training.hpp"

using namespace stressprog;

namespace {

ModelShape reduced(Architecture arch) {
  ModelShape s;
  s.arch = arch;
  s.input_dim = 8;
  s.hidden = 8;
  s.heads = 4;
  s.ff_dim = 16;
  return s;
}

std::vector<TrainingSample> random_batch(int d, int n, std::size_t count, std::uint64_t seed, bool dropout) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TrainingSample> batch;
  for (std::size_t b = 0; b < count; ++b) {
    Eigen::MatrixXd x(d, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<VadCode> prev;
    for (int i = 0; i + 1 < n; ++i) prev.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
    TrainingSample s{x, ContextSequence::from_previous(prev), VadCode::from_index(static_cast<int>(rng() % 8)),
                     std::nullopt};
    if (dropout) s.dropout_seed = rng();
    batch.push_back(std::move(s));
  }
  return batch;
}

// Two-class toy sequence: windows of class 1 have mean +1, class 0 mean -1.
LabelledSequence toy_sequence(std::size_t length, std::uint64_t seed, const std::string& id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  LabelledSequence s;
  s.recording_id = id;
  s.features.resize(4, static_cast<Eigen::Index>(length));
  for (std::size_t t = 0; t < length; ++t) {
    const bool stress = (rng() & 1) != 0;
    for (int i = 0; i < 4; ++i) s.features(i, static_cast<Eigen::Index>(t)) = (stress ? 1.0 : -1.0) + g(rng);
    s.targets.push_back(stress ? kStressCode : VadCode(1, 1, 1));
    s.window_index.push_back(t);
  }
  return s;
}

ModelShape toy_shape() {
  ModelShape s;
  s.input_dim = 4;
  s.hidden = 8;
  s.heads = 2;
  s.ff_dim = 16;
  return s;
}

}  // namespace

// ---- loss ----

TEST(Loss, SpotValues) {
  EXPECT_NEAR(bce_loss(Eigen::Vector3d(0.5, 0.5, 0.5), VadCode(0, 1, 0)).total, std::numbers::ln2, 1e-12);
  const auto r = bce_loss(Eigen::Vector3d(0.9, 0.8, 0.1), VadCode(1, 1, 0));
  EXPECT_NEAR(r.total, 0.1446215275, 1e-9);
  EXPECT_NEAR(r.per_dimension[0], -std::log(0.9), 1e-15);
  EXPECT_NEAR(r.per_dimension[2], -std::log(0.9), 1e-15);
}

TEST(Loss, ClampKeepsLossFinite) {
  const auto worst = bce_loss(Eigen::Vector3d(0.0, 1.0, 1.0), VadCode(1, 0, 0));
  EXPECT_NEAR(worst.total, -std::log(kProbClamp), 1e-9);
  const auto best = bce_loss(Eigen::Vector3d(1.0, 0.0, 1.0), VadCode(1, 0, 1));
  EXPECT_LT(best.total, 1e-6);
  EXPECT_GT(best.total, 0.0);
  const Eigen::Vector3d g = bce_logit_gradient(Eigen::Vector3d(1.0, 0.0, 0.3), VadCode(1, 0, 0));
  EXPECT_LT((g - Eigen::Vector3d(0.0, 0.0, 0.1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Loss, LogitGradient) {
  const Eigen::Vector3d g = bce_logit_gradient(Eigen::Vector3d(0.5, 0.5, 0.2), VadCode(1, 0, 0));
  EXPECT_NEAR(g(0), -0.5 / 3, 1e-15);
  EXPECT_NEAR(g(1), 0.5 / 3, 1e-15);
  EXPECT_NEAR(g(2), 0.2 / 3, 1e-15);
}

// ---- gradients ----

TEST(Gradient, BiasIdentityAtZeroLogits) {
  for (auto arch : {Architecture::Recurrent, Architecture::Transformer}) {
    const ModelParams params = ModelParams::zeros(reduced(arch));
    const auto batch = random_batch(8, 3, 5, 1, false);
    const auto g = gradient(params, batch);
    for (int i = 0; i < 3; ++i) {
      double mean = 0.0;
      for (const auto& s : batch) mean += 0.5 - s.target[static_cast<std::size_t>(i)];
      mean /= static_cast<double>(batch.size());
      // The loss is the mean of the three per-dimension terms.
      EXPECT_NEAR(g.grad.classifier.bias(i, 0), mean / 3.0, 1e-15);
    }
    EXPECT_NEAR(g.loss, std::numbers::ln2, 1e-12);
  }
}

TEST(Gradient, DuplicatedSampleMatchesSingleton) {
  const auto params = ModelParams::initialize(reduced(Architecture::Transformer), 4);
  const auto one = random_batch(8, 3, 1, 5, true);
  std::vector<TrainingSample> two{one[0], one[0]};
  const auto a = gradient(params, one);
  const auto b = gradient(params, two);
  EXPECT_NEAR(a.loss, b.loss, 1e-15);
  std::vector<const Tensor*> ta, tb;
  a.grad.visit([&](const std::string&, const Tensor& t) { ta.push_back(&t); });
  b.grad.visit([&](const std::string&, const Tensor& t) { tb.push_back(&t); });
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_LT((*ta[i] - *tb[i]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradient, EmptyBatchAndDivergence) {
  const auto params = ModelParams::initialize(reduced(Architecture::Recurrent), 1);
  EXPECT_THROW(gradient(params, std::vector<TrainingSample>{}), std::invalid_argument);
  ModelParams bad = params;
  bad.classifier.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(gradient(bad, random_batch(8, 2, 2, 1, false)), NumericDivergence);
}

// Central differences at h = 1e-4 leave O(h^2) ~ 1e-8 relative truncation;
// the analytic gradient must agree well inside 1e-4 for both models, with
// dropout masks active, over several random points.
TEST(Gradient, MatchesFiniteDifferences) {
  for (auto arch : {Architecture::Recurrent, Architecture::Transformer}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto params = ModelParams::initialize(reduced(arch), seed);
      const auto batch = random_batch(8, 3, 3, 100 + seed, true);
      const auto g = gradient(params, batch);
      const auto check = oracle::check_gradient(params, g.grad, batch, 1e-4, 1e-6);
      EXPECT_LT(check.max_rel_error, 1e-4) << architecture_name(arch) << " seed " << seed << " worst " << check.worst
                                           << " analytic " << check.worst_analytic << " numeric "
                                           << check.worst_numeric;
      EXPECT_EQ(check.checked, params.parameter_count());
    }
  }
}

TEST(Gradient, FourPointStencilAtCoarseStep) {
  // At h = 1e-3 the 2-point truncation error swamps small coordinates; the
  // 4-point stencil brings it to O(h^4).
  for (auto arch : {Architecture::Recurrent, Architecture::Transformer}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto params = ModelParams::initialize(reduced(arch), seed);
      const auto batch = random_batch(8, 3, 3, 200 + seed, true);
      const auto g = gradient(params, batch);
      const auto check = oracle::check_gradient(params, g.grad, batch, 1e-3, 1e-8, 4);
      EXPECT_LT(check.max_rel_error, 1e-4) << architecture_name(arch) << " seed " << seed << " worst " << check.worst;
    }
  }
}

TEST(Gradient, FiniteDifferenceErrorIsSecondOrder) {
  // Shrinking h by 10 shrinks the discrepancy by ~100 on well-conditioned
  // coordinates: the residual is truncation, not a wrong derivative.
  const auto params = ModelParams::initialize(reduced(Architecture::Transformer), 2);
  const auto batch = random_batch(8, 3, 2, 7, false);
  const auto g = gradient(params, batch);
  ModelParams probe = params;
  double& w = probe.classifier.weight(1, 3);
  const double analytic = g.grad.classifier.weight(1, 3);
  auto fd = [&](double h) {
    const double saved = w;
    w = saved + h;
    const double up = oracle::batch_loss(probe, batch);
    w = saved - h;
    const double down = oracle::batch_loss(probe, batch);
    w = saved;
    return (up - down) / (2 * h);
  };
  const double e1 = std::abs(fd(1e-2) - analytic), e2 = std::abs(fd(1e-3) - analytic);
  ASSERT_GT(e1, 0.0);
  EXPECT_NEAR(e1 / e2, 100.0, 5.0);
}

// ---- teacher forcing ----

TEST(TeacherForcing, Extremes) {
  std::mt19937_64 rng(1);
  const auto gt = ContextSequence::from_previous(std::vector<VadCode>{VadCode(0, 1, 0)});
  const auto roll = ContextSequence::from_previous(std::vector<VadCode>{VadCode(1, 1, 1)});
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_context(gt, roll, 1.0, rng), gt);
    EXPECT_EQ(sample_context(gt, roll, 0.0, rng), roll);
  }
  const auto short_ctx = ContextSequence::from_previous({});
  EXPECT_THROW(sample_context(gt, short_ctx, 0.5, rng), std::invalid_argument);
}

TEST(TeacherForcing, FrequencyWithinBinomialBounds) {
  std::size_t hits = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    std::mt19937_64 rng(derive_seed(99, {i}));
    hits += teacher_forcing_draw(0.8, rng) ? 1 : 0;
  }
  const double rate = hits / 10000.0;
  EXPECT_GE(rate, 0.78);
  EXPECT_LE(rate, 0.82);
  // 99% binomial interval: 0.8 +- 2.576 * sqrt(0.8 * 0.2 / 1e4).
  EXPECT_NEAR(rate, 0.8, 2.576 * std::sqrt(0.16 / 1e4));
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, {0}), derive_seed(1, {1}));
  EXPECT_NE(derive_seed(1, {1, 2}), derive_seed(1, {2, 1}));
  EXPECT_EQ(derive_seed(5, {3, 4}), derive_seed(5, {3, 4}));
}

// ---- samples and inference ----

TEST(Samples, InputLengthAndContexts) {
  EXPECT_EQ(input_length(0, 4), 1u);
  EXPECT_EQ(input_length(2, 4), 3u);
  EXPECT_EQ(input_length(9, 4), 4u);
  EXPECT_EQ(input_length(9, 0), 1u);
  LabelledSequence seq = toy_sequence(6, 3, "r");
  const auto s = make_sample(seq, 4, 3);
  EXPECT_EQ(s.features.cols(), 3);
  EXPECT_EQ(s.features, seq.features.middleCols(2, 3));
  ASSERT_EQ(s.context.size(), 3u);
  EXPECT_EQ(s.context.codes()[0], kDefaultContext);
  EXPECT_EQ(s.context.codes()[1], seq.targets[2]);
  EXPECT_EQ(s.context.codes()[2], seq.targets[3]);
  EXPECT_EQ(s.target, seq.targets[4]);
  EXPECT_THROW(make_sample(seq, 6, 3), std::out_of_range);
  // n = 0: current window with the default context only.
  const auto z = make_sample(seq, 4, 0);
  EXPECT_EQ(z.features.cols(), 1);
  EXPECT_EQ(z.context.size(), 1u);
}

TEST(Samples, RolloutUsesModelPredictions) {
  const auto params = ModelParams::initialize(toy_shape(), 3);
  const LabelledSequence seq = toy_sequence(6, 4, "r");
  const auto preds = infer_sequence(params, seq, 3);
  ASSERT_EQ(preds.size(), 6u);
  // The first window's prediction sees only itself.
  EXPECT_EQ(preds[0].probs, forward(params, seq.features.col(0), ContextSequence::from_previous({})).probs);
  const auto ctx = rollout_context(params, seq, 2, 3);
  EXPECT_EQ(ctx.codes()[1], preds[0].code);
  EXPECT_EQ(ctx.codes()[2], preds[1].code);
}

// ---- optimiser ----

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ModelParams params = ModelParams::initialize(reduced(Architecture::Transformer), 5);
  const ModelParams before = params;
  AdamOptimizer adam(params);
  for (int i = 0; i < 3; ++i) adam.step(params, params.zeros_like(), 0.01);
  EXPECT_EQ(adam.steps(), 3);
  std::vector<const Tensor*> a, b;
  params.visit([&](const std::string&, const Tensor& t) { a.push_back(&t); });
  before.visit([&](const std::string&, const Tensor& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParams params = ModelParams::zeros(reduced(Architecture::Recurrent));
  ModelParams grad = params.zeros_like();
  grad.classifier.bias(0, 0) = 0.3;
  grad.classifier.bias(1, 0) = -2.0;
  AdamOptimizer adam(params);
  adam.step(params, grad, 0.01);
  EXPECT_NEAR(params.classifier.bias(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(params.classifier.bias(1, 0), 0.01, 1e-9);
  EXPECT_EQ(params.classifier.bias(2, 0), 0.0);
}

TEST(Training, SingleBatchOverfit) {
  const ModelShape shape = reduced(Architecture::Recurrent);
  ModelParams params = ModelParams::initialize(shape, 8);
  const auto batch = random_batch(8, 3, 16, 9, false);
  AdamOptimizer adam(params);
  std::vector<double> logged;
  double loss = 0.0;
  for (int step = 0; step <= 200; ++step) {
    const auto g = gradient(params, batch);
    loss = g.loss;
    if (step % 20 == 0) logged.push_back(loss);
    if (step < 200) adam.step(params, g.grad, 0.01);
  }
  EXPECT_LT(loss, 0.05);
  int decreasing = 0;
  for (std::size_t i = 1; i < logged.size(); ++i) decreasing += logged[i] < logged[i - 1] ? 1 : 0;
  EXPECT_GE(decreasing, static_cast<int>(std::ceil(0.95 * (logged.size() - 1))));
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.teacher_forcing_p = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(TrainConfig::defaults_for(Architecture::Recurrent).epochs, 20);
  EXPECT_EQ(TrainConfig::defaults_for(Architecture::Transformer).epochs, 50);
}

TEST(Training, EmptySplitsAreRejected) {
  const std::vector<LabelledSequence> data{toy_sequence(5, 1, "a")};
  TrainConfig c;
  c.epochs = 1;
  c.iterations_per_epoch = 1;
  EXPECT_THROW(train({}, data, toy_shape(), c), std::invalid_argument);
  EXPECT_THROW(train(data, {}, toy_shape(), c), std::invalid_argument);
}

TEST(Training, PatienceZeroStopsAfterFirstNonImprovement) {
  const std::vector<LabelledSequence> train_data{toy_sequence(30, 1, "a")};
  const std::vector<LabelledSequence> val{toy_sequence(10, 2, "b")};
  TrainConfig c;
  c.epochs = 30;
  c.iterations_per_epoch = 5;
  c.batch_size = 4;
  c.patience = 0;
  c.learning_rate = 0.5;  // large steps make a non-improving epoch likely
  c.history = 2;
  const auto r = train(train_data, val, toy_shape(), c);
  ASSERT_TRUE(r.stopped_early);
  const auto& log = r.log;
  ASSERT_GE(log.size(), 2u);
  // Every epoch but the last improved on all earlier ones.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    EXPECT_LT(log[i].val_loss, best);
    best = log[i].val_loss;
  }
  EXPECT_GE(log.back().val_loss, best);
}

TEST(Training, BestCheckpointHasLowestValidationLoss) {
  const std::vector<LabelledSequence> train_data{toy_sequence(40, 3, "a")};
  const std::vector<LabelledSequence> val{toy_sequence(12, 4, "b")};
  TrainConfig c;
  c.epochs = 6;
  c.iterations_per_epoch = 10;
  c.batch_size = 4;
  c.history = 2;
  const auto r = train(train_data, val, toy_shape(), c);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& row : r.log) lowest = std::min(lowest, row.val_loss);
  EXPECT_EQ(r.best_val_loss, lowest);
  EXPECT_EQ(r.log[static_cast<std::size_t>(r.best_epoch - 1)].val_loss, lowest);
  EXPECT_NEAR(validation_loss(r.best, val, 2), lowest, 1e-15);
}

TEST(Training, LearningRateSchedule) {
  const std::vector<LabelledSequence> data{toy_sequence(20, 5, "a")};
  TrainConfig c;
  c.epochs = 7;
  c.iterations_per_epoch = 2;
  c.batch_size = 2;
  c.lr_decay_interval = 3;
  c.patience = 100;
  const auto r = train(data, data, toy_shape(), c);
  ASSERT_EQ(r.log.size(), 7u);
  EXPECT_DOUBLE_EQ(r.log[0].lr, 0.001);
  EXPECT_DOUBLE_EQ(r.log[2].lr, 0.001);
  EXPECT_DOUBLE_EQ(r.log[3].lr, 0.0005);
  EXPECT_DOUBLE_EQ(r.log[6].lr, 0.00025);
  EXPECT_EQ(r.log[6].step, 14);
}

TEST(Training, DeterministicMetricsLog) {
  const std::vector<LabelledSequence> train_data{toy_sequence(20, 6, "a")};
  const std::vector<LabelledSequence> val{toy_sequence(8, 7, "b")};
  TrainConfig c;
  c.epochs = 3;
  c.iterations_per_epoch = 4;
  c.batch_size = 3;
  c.history = 3;
  auto run = [&] {
    std::ostringstream out;
    write_metrics_header(out);
    train(train_data, val, toy_shape(), c, [&](const MetricsRow& row) { write_metrics_row(out, row); });
    return out.str();
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.substr(0, a.find('\n')), "epoch,step,train_loss,val_loss,val_acc,val_f1,lr");
  c.seed = 8;
  EXPECT_NE(a, run());
}
