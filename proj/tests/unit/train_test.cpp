// Copyright 2026 The xcnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xcnet/train.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xcnet/rng.hpp"

namespace xcnet {
namespace {

ModelConfig tiny(BlockKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.layers = {{4}, {6}};
  c.in_height = 16;
  c.in_width = 16;
  c.n_classes = 2;
  return c;
}

OptimConfig quick(std::size_t epochs = 6) {
  OptimConfig o;
  o.epochs = epochs;
  o.batch_size = 16;
  return o;
}

TEST(SgdStep, ZeroLearningRateLeavesParams) {
  TensorList p;
  p.add("a", Tensor::vector({1.0, -2.0}));
  OptimState s = make_optim_state(OptimConfig{});
  s.lr = 0.0;
  sgd_step(p, {{"a", Tensor::vector({5.0, 5.0})}}, s);
  EXPECT_EQ(p.at("a"), Tensor::vector({1.0, -2.0}));
}

TEST(SgdStep, PlainGradientDescent) {
  TensorList p;
  p.add("a", Tensor::vector({1.0, -2.0}));
  OptimState s = make_optim_state(OptimConfig{});
  s.lr = 0.5;
  s.momentum = 0.0;
  s.weight_decay = 0.0;
  sgd_step(p, {{"a", Tensor::vector({2.0, 1.0})}}, s);
  EXPECT_EQ(p.at("a"), Tensor::vector({0.0, -2.5}));
  EXPECT_EQ(s.velocity.at("a").shape(), p.at("a").shape());
}

TEST(SgdStep, MomentumAndDecayRecurrence) {
  TensorList p;
  p.add("a", Tensor::vector({1.0}));
  OptimState s = make_optim_state(OptimConfig{});
  double theta = 1.0, v = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double g = 3.0 * theta;
    sgd_step(p, {{"a", Tensor::vector({g})}}, s);
    v = 0.9 * v + g;
    theta -= 0.05 * (v + 5e-4 * theta);
    EXPECT_DOUBLE_EQ(p.at("a")[0], theta);
  }
}

TEST(SgdStep, QuadraticBowlContractsAtHeavyBallRate) {
  // f = |theta|^2 with lr 0.1 and momentum 0.9 is under-damped: the iterate
  // spirals in with modulus sqrt(0.9) per step rather than shrinking every
  // step, so the check is on the envelope.
  TensorList p;
  p.add("t", Tensor::vector({1.0, -2.0, 0.5}));
  OptimState s = make_optim_state(OptimConfig{});
  s.lr = 0.1;
  s.weight_decay = 0.0;
  std::vector<double> norms{std::sqrt(sum(p.at("t") * p.at("t")))};
  for (int i = 0; i < 50; ++i) {
    sgd_step(p, {{"t", p.at("t") * 2.0}}, s);
    norms.push_back(std::sqrt(sum(p.at("t") * p.at("t"))));
  }
  const double early = *std::max_element(norms.begin(), norms.begin() + 10);
  const double late = *std::max_element(norms.end() - 10, norms.end());
  EXPECT_LT(late, early * std::pow(0.9, 0.5 * 35));
  EXPECT_LT(norms.back(), 0.2 * norms.front());
}

TEST(SgdStep, ShapeMismatch) {
  TensorList p;
  p.add("a", Tensor::vector({1.0}));
  OptimState s = make_optim_state(OptimConfig{});
  EXPECT_XCNET_ERROR(sgd_step(p, {{"a", Tensor::vector({1.0, 2.0})}}, s), kShapeMismatch);
}

TEST(SgdStep, FrozenParamsStay) {
  TensorList p;
  p.add("x.A", Tensor::vector({1.0}));
  p.add("x.w", Tensor::vector({1.0}));
  OptimState s = make_optim_state(OptimConfig{});
  sgd_step(p, {{"x.A", Tensor::vector({1.0})}, {"x.w", Tensor::vector({1.0})}}, s, {"x.A"});
  EXPECT_EQ(p.at("x.A")[0], 1.0);
  EXPECT_NE(p.at("x.w")[0], 1.0);
}

TEST(Train, SameSeedSameHistory) {
  const Dataset data = synth_corpus(1, 48);
  const auto a = train(tiny(BlockKind::kRXCNorm), data, quick(3), 5);
  const auto b = train(tiny(BlockKind::kRXCNorm), data, quick(3), 5);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  const Tensor x = data.batch({0, 1, 2});
  EXPECT_EQ(a.model.logits(x), b.model.logits(x));
}

TEST(Train, HistoryCsvLayout) {
  const auto r = train(tiny(BlockKind::kRXCNorm), synth_corpus(1, 32), quick(2), 1);
  const std::string csv = history_csv(r.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,train_acc,layer_0_c,layer_1_c,layer_2_c");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(r.history[1].robust_scales, r.model.robust_scales());
}

TEST(Train, FrozenScaleStaysAtOne) {
  OptimConfig o = quick(2);
  o.learn_scale = false;
  const auto r = train(tiny(BlockKind::kXCNorm), synth_corpus(1, 32), o, 1);
  for (const auto& item : r.model.params().items()) {
    if (item.name.size() > 2 && item.name.substr(item.name.size() - 2) == ".A")
      EXPECT_EQ(item.value, Tensor(item.value.shape(), 1.0)) << item.name;
  }
  EXPECT_EQ(frozen_params(r.model, o).size(), 3u);
  EXPECT_TRUE(frozen_params(r.model, quick()).empty());
}

TEST(Train, RobustScaleSettles) {
  // 16 batches per epoch, so the moving average forgets its initial value
  // well within the first epochs. Hidden blocks see channel-normalised
  // inputs and settle; the head reads pooled features that still drift as
  // the weights train, so it only has to stay within 15%.
  OptimConfig o = quick(10);
  const auto r = train(tiny(BlockKind::kRXCNorm), synth_corpus(2, 256), o, 3);
  for (std::size_t e = 5; e < r.history.size(); ++e) {
    const auto& c = r.history[e].robust_scales;
    const auto& prev = r.history[e - 1].robust_scales;
    ASSERT_EQ(c.size(), 3u);
    for (std::size_t l = 0; l < 2; ++l)
      EXPECT_LE(std::abs(c[l] - prev[l]), 0.05 * c[l]) << "epoch " << e << " block " << l;
    EXPECT_LE(std::abs(c[2] - prev[2]), 0.15 * c[2]) << "epoch " << e << " head";
  }
}

TEST(Train, BaselineBatchNormFitsSynth) {
  OptimConfig o = quick(15);
  const Dataset data = synth_corpus(3, 64);
  const auto r = train(tiny(BlockKind::kBaseline), data, o, 4);
  EXPECT_EQ(accuracy(r.model, data), 1.0);
}

TEST(Train, ReferenceNetFitsSynthWithinTwentyEpochs) {
  ModelConfig cfg;
  cfg.in_height = cfg.in_width = 16;
  cfg.n_classes = 2;
  OptimConfig o;
  o.epochs = 20;
  o.batch_size = 32;
  const Dataset data = synth_corpus(1, 128);
  const auto r = train(cfg, data, o, 1);
  EXPECT_GE(r.history.back().train_acc, 0.99);
  EXPECT_GE(accuracy(r.model, data), 0.99);
}

// A linear-head model whose logits do not depend on the input.
Model constant_model(std::size_t classes) {
  ModelConfig cfg = tiny(BlockKind::kXCNorm);
  cfg.head = HeadKind::kLinear;
  cfg.n_classes = classes;
  Rng rng(1);
  Model m(cfg, rng);
  m.params().at("head.w") = Tensor(m.params().at("head.w").shape(), 0.0);
  return m;
}

Dataset balanced(std::size_t classes, std::size_t per_class) {
  Dataset d = synth_corpus(4, classes * per_class);
  d.n_classes = classes;
  for (std::size_t i = 0; i < d.size(); ++i) d.labels[i] = static_cast<int>(i % classes);
  return d;
}

TEST(Accuracy, ChanceForConstantModel) {
  EXPECT_DOUBLE_EQ(accuracy(constant_model(10), balanced(10, 3)), 0.1);
}

TEST(Accuracy, OwnPredictionsScoreOne) {
  const auto r = train(tiny(BlockKind::kXCNorm), synth_corpus(1, 32), quick(1), 1);
  Dataset d = synth_corpus(9, 40);
  d.labels = predict(r.model, d);
  EXPECT_EQ(accuracy(r.model, d), 1.0);
}

TEST(Accuracy, EmptyDataset) {
  Dataset d = head(synth_corpus(1, 4), 4);
  d.images = Tensor(Shape{0, 16, 16, 1});
  d.labels.clear();
  EXPECT_XCNET_ERROR(accuracy(constant_model(2), d), kEmptyDataset);
}

TEST(Predict, ThreadCountDoesNotChangeOutputs) {
  const auto r = train(tiny(BlockKind::kRXCNorm), synth_corpus(1, 32), quick(1), 1);
  const Dataset d = synth_corpus(5, 300);
  EXPECT_EQ(predict_probs(r.model, d.images, 1), predict_probs(r.model, d.images, 4));
}

TEST(Mrs, ClosedFormKl) {
  const Tensor clean(Shape{1, 2}, std::vector<double>{1.0, 0.0});
  const Tensor half(Shape{1, 2}, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(mrs_from_probs(clean, {half, half, half, half, half}), std::log(2.0), 1e-10);
  EXPECT_NEAR(mean_kl(clean, half), oracle::kl({1.0, 0.0}, {0.5, 0.5}), 1e-15);
}

TEST(Mrs, ZeroForEqualRows) {
  Rng rng(2);
  const Tensor p = softmax(rand_fill(rng, Shape{5, 4}, Normal{}));
  EXPECT_EQ(mean_kl(p, p), 0.0);
  EXPECT_EQ(mrs_from_probs(p, {p, p}), 0.0);
}

TEST(Mrs, PositiveForDifferentRowsAndPermutationInvariant) {
  Rng rng(3);
  const Tensor p = softmax(rand_fill(rng, Shape{5, 4}, Normal{}));
  const Tensor q = softmax(rand_fill(rng, Shape{5, 4}, Normal{}));
  EXPECT_GT(mean_kl(p, q), 1e-10);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Tensor pp(p.shape()), qp(q.shape());
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t k = 0; k < 4; ++k) {
      pp[n * 4 + k] = p[n * 4 + perm[k]];
      qp[n * 4 + k] = q[n * 4 + perm[k]];
    }
  EXPECT_NEAR(mean_kl(pp, qp), mean_kl(p, q), 1e-14);
}

TEST(Mrs, ConstantModelScoresZero) {
  const Model m = constant_model(3);
  const Dataset d = synth_corpus(1, 20);
  for (auto f : all_families()) EXPECT_EQ(mrs(m, d, f), 0.0);
}

TEST(Sweep, CleanColumnAndByteIdenticalCsv) {
  const auto r = train(tiny(BlockKind::kXCNorm), synth_corpus(1, 48), quick(3), 2);
  const Dataset test = synth_corpus(2, 40);
  SweepOptions opts;
  opts.seed = 7;
  const EvalReport a = robustness_sweep(r.model, test, opts);
  const EvalReport b = robustness_sweep(r.model, test, opts);
  EXPECT_EQ(a.grid.size(), 30u);
  for (auto f : all_families()) EXPECT_EQ(a.cell(f, 0), a.clean_accuracy);
  EXPECT_EQ(a.clean_accuracy, accuracy(r.model, test));
  EXPECT_EQ(grid_csv(a), grid_csv(b));
  EXPECT_EQ(mrs_csv(a), mrs_csv(b));
  for (const auto& cell : a.grid) {
    EXPECT_GE(cell.accuracy, 0.0);
    EXPECT_LE(cell.accuracy, 1.0);
  }
  for (const auto& [f, v] : a.mrs) EXPECT_GE(v, 0.0);
  const std::string grid = grid_csv(a);
  EXPECT_EQ(grid.substr(0, grid.find('\n')), "dataset,family,severity,accuracy");
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 31);
  EXPECT_EQ(grid.find('\r'), std::string::npos);
}

TEST(Sweep, SingleFamily) {
  const Model m = constant_model(2);
  SweepOptions opts;
  opts.families = {CorruptionFamily::kGaussianNoise};
  const EvalReport r = robustness_sweep(m, synth_corpus(1, 10), opts);
  EXPECT_EQ(r.grid.size(), 6u);
  const std::string csv = mrs_csv(r);
  EXPECT_EQ(csv, "family,mrs\ngaussian_noise,0.00000000\n");
}

TEST(RobustStatistic, IndependentOfBatchOrder) {
  ModelConfig cfg = tiny(BlockKind::kRXCNorm);
  Rng rng(1);
  const Model m(cfg, rng);
  const Dataset d = synth_corpus(3, 8);
  ad::Graph g1, g2;
  const auto a = m.forward(g1, d.batch({0, 1, 2, 3, 4, 5, 6, 7}), true).stats.patch_std;
  const auto b = m.forward(g2, d.batch({7, 3, 5, 1, 0, 6, 2, 4}), true).stats.patch_std;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].second, b[i].second, 1e-12);
}

}  // namespace
}  // namespace xcnet
