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

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xcnet/corrupt.hpp"
#include "xcnet/dataset.hpp"
#include "xcnet/model.hpp"

namespace xcnet {

struct OptimConfig {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  /// When false every per-channel scale A stays at its initial value.
  bool learn_scale = true;
  /// Multiply lr by lr_decay every lr_step epochs (lr_step 0 = constant).
  std::size_t lr_step = 0;
  double lr_decay = 0.1;
  /// Random-convolution augmentation; off when rc_prob == 0.
  double rc_prob = 0.0;
  double rc_mix = 0.5;
};

struct OptimState {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::map<std::string, Tensor> velocity;
  std::size_t step = 0;
  std::size_t epoch = 0;
};

OptimState make_optim_state(const OptimConfig& cfg);

/// v <- m v + g; theta <- theta - lr (v + wd theta) for every parameter
/// with a gradient that is not in `frozen`.
void sgd_step(TensorList& params, const std::map<std::string, Tensor>& grads, OptimState& opt,
              const std::set<std::string>& frozen = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;       ///< sample-weighted mean batch loss
  double train_acc = 0.0;  ///< accuracy of the in-training predictions
  std::vector<double> robust_scales;  ///< c per robust layer at epoch end
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
};

/// Deterministic in `seed`: parameters come from the "init" sub-stream,
/// batch order from "data-order", augmentation from "augment".
TrainResult train(const ModelConfig& model_cfg, const Dataset& data, const OptimConfig& opt_cfg, std::uint64_t seed);

/// Names held fixed during training (the A tensors when learn_scale is off).
std::set<std::string> frozen_params(const Model& model, const OptimConfig& cfg);

std::string history_csv(const std::vector<EpochRecord>& history);

/// Softmax outputs over a dataset. Work is split into fixed 128-sample
/// shards and merged in shard order, so the result does not depend on
/// `threads`.
Tensor predict_probs(const Model& model, const Tensor& images, std::size_t threads = 1);
std::vector<int> predict(const Model& model, const Dataset& data, std::size_t threads = 1);

/// Top-1 accuracy; EmptyDataset on an empty set.
double accuracy(const Model& model, const Dataset& data, std::size_t threads = 1);

/// Mean over rows of KL(p || q) with both floored at 1e-12 (natural log).
double mean_kl(const Tensor& p, const Tensor& q);

/// Average of mean_kl(clean, corrupted[s]) over the supplied severities.
double mrs_from_probs(const Tensor& clean, const std::vector<Tensor>& corrupted);

struct SweepOptions {
  std::vector<CorruptionFamily> families = all_families();
  std::uint64_t seed = 0;
  SeverityTable table{};
  std::size_t threads = 1;
};

/// Model robustness score of one family: severities 1..5 against severity 0.
double mrs(const Model& model, const Dataset& data, CorruptionFamily family, const SweepOptions& options = {});

struct SweepCell {
  CorruptionFamily family;
  int severity;
  double accuracy;
};

struct EvalReport {
  std::string dataset;
  double clean_accuracy = 0.0;
  std::vector<SweepCell> grid;
  std::vector<std::pair<CorruptionFamily, double>> mrs;
  double runtime_seconds = 0.0;  ///< not written to the CSVs
  std::uint64_t fingerprint = 0;

  double cell(CorruptionFamily family, int severity) const;
  double family_mrs(CorruptionFamily family) const;
};

/// Accuracy grid over severities 0..5 and MRS per family. The corruption
/// seed of a family is hash_combine(seed, family index), shared by all its
/// severities.
EvalReport robustness_sweep(const Model& model, const Dataset& data, const SweepOptions& options = {});

/// "dataset,family,severity,accuracy" rows.
std::string grid_csv(const EvalReport& report);
/// "family,mrs" rows.
std::string mrs_csv(const EvalReport& report);

std::string format_fixed(double value, int digits);

}  // namespace xcnet
