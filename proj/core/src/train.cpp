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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

namespace xcnet {

OptimState make_optim_state(const OptimConfig& cfg) {
  OptimState s;
  s.lr = cfg.lr;
  s.momentum = cfg.momentum;
  s.weight_decay = cfg.weight_decay;
  return s;
}

void sgd_step(TensorList& params, const std::map<std::string, Tensor>& grads, OptimState& opt,
              const std::set<std::string>& frozen) {
  for (auto& item : params.items()) {
    if (frozen.count(item.name)) continue;
    auto g = grads.find(item.name);
    if (g == grads.end()) continue;
    if (g->second.shape() != item.value.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "gradient for " + item.name + " has shape " +
                                                 shape_string(g->second.shape()));
    }
    auto [it, fresh] = opt.velocity.try_emplace(item.name, Tensor(item.value.shape(), 0.0));
    Tensor& v = it->second;
    auto theta = item.value.data();
    auto grad = g->second.data();
    auto vel = v.data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      vel[i] = opt.momentum * vel[i] + grad[i];
      theta[i] -= opt.lr * (vel[i] + opt.weight_decay * theta[i]);
    }
  }
  ++opt.step;
}

std::set<std::string> frozen_params(const Model& model, const OptimConfig& cfg) {
  std::set<std::string> out;
  if (cfg.learn_scale) return out;
  for (const auto& item : model.params().items()) {
    if (item.name.size() > 2 && item.name.compare(item.name.size() - 2, 2, ".A") == 0) out.insert(item.name);
  }
  return out;
}

TrainResult train(const ModelConfig& model_cfg, const Dataset& data, const OptimConfig& opt_cfg, std::uint64_t seed) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (opt_cfg.batch_size == 0) throw Error(ErrorCode::kConfigError, "batch_size must be >= 1");
  const Rng root(seed);
  Rng init_rng = root.fork("init");
  Rng order_rng = root.fork("data-order");
  Rng aug_rng = root.fork("augment");

  TrainResult result{Model(model_cfg, init_rng), {}};
  Model& model = result.model;
  OptimState opt = make_optim_state(opt_cfg);
  const auto frozen = frozen_params(model, opt_cfg);
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= opt_cfg.epochs; ++epoch) {
    opt.epoch = epoch;
    if (opt_cfg.lr_step > 0 && epoch > 1 && (epoch - 1) % opt_cfg.lr_step == 0) opt.lr *= opt_cfg.lr_decay;
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[order_rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += opt_cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + opt_cfg.batch_size)));
      Tensor x = data.batch(idx);
      const std::vector<int> y = data.batch_labels(idx);
      if (opt_cfg.rc_prob > 0.0) {
        const std::size_t per = x.numel() / idx.size();
        const Shape img_shape{x.dim(1), x.dim(2), x.dim(3)};
        for (std::size_t b = 0; b < idx.size(); ++b) {
          Tensor img(img_shape, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(b * per),
                                                    x.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * per)));
          img = random_conv_augment(img, aug_rng, opt_cfg.rc_prob, opt_cfg.rc_mix);
          std::copy(img.data().begin(), img.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(b * per));
        }
      }
      ad::Graph graph;
      TapeForward fwd = model.forward(graph, x, true);
      ad::Var loss = ad::softmax_xent(fwd.logits, y);
      graph.backward(loss);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, v] : fwd.params) grads.emplace(name, graph.grad(v));
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
      const auto pred = argmax_rows(fwd.logits.value());
      for (std::size_t b = 0; b < idx.size(); ++b) correct += pred[b] == y[b];
      if (!std::isfinite(loss.value().item())) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite loss at epoch " + std::to_string(epoch));
      }
      sgd_step(model.params(), grads, opt, frozen);
      model.apply_statistics(fwd.stats);
    }
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n),
         model.robust_scales()});
  }
  return result;
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  const std::size_t layers = history.empty() ? 0 : history.front().robust_scales.size();
  std::string out = "epoch,loss,train_acc";
  for (std::size_t i = 0; i < layers; ++i) out += ",layer_" + std::to_string(i) + "_c";
  out += "\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_fixed(r.loss, 8) + "," + format_fixed(r.train_acc, 6);
    for (double c : r.robust_scales) out += "," + format_fixed(c, 8);
    out += "\n";
  }
  return out;
}

Tensor predict_probs(const Model& model, const Tensor& images, std::size_t threads) {
  constexpr std::size_t kShard = 128;
  const std::size_t n = images.dim(0);
  const std::size_t shards = (n + kShard - 1) / kShard;
  std::vector<Tensor> parts(shards);
  auto run = [&](std::size_t s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = s * kShard; i < std::min(n, (s + 1) * kShard); ++i) idx.push_back(i);
    parts[s] = softmax(model.logits(take(images, idx)));
  };
  threads = std::max<std::size_t>(1, std::min(threads, shards));
  if (threads == 1) {
    for (std::size_t s = 0; s < shards; ++s) run(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < shards; s += threads) run(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  return concat_rows(parts);
}

std::vector<int> predict(const Model& model, const Dataset& data, std::size_t threads) {
  return argmax_rows(predict_probs(model, data.images, threads));
}

double accuracy(const Model& model, const Dataset& data, std::size_t threads) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "cannot score an empty dataset");
  const auto pred = predict(model, data, threads);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double mean_kl(const Tensor& p, const Tensor& q) {
  if (p.shape() != q.shape() || p.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "KL needs equal [N, K] inputs");
  constexpr double kFloor = 1e-12;
  const std::size_t n = p.dim(0), k = p.dim(1);
  if (n == 0) throw Error(ErrorCode::kEmptyReduction, "KL over zero rows");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double a = std::max(p[i * k + j], kFloor), b = std::max(q[i * k + j], kFloor);
      row += a * std::log(a / b);
    }
    total += row;
  }
  return total / static_cast<double>(n);
}

double mrs_from_probs(const Tensor& clean, const std::vector<Tensor>& corrupted) {
  if (corrupted.empty()) throw Error(ErrorCode::kEmptyReduction, "MRS needs at least one severity");
  double s = 0.0;
  for (const auto& q : corrupted) s += mean_kl(clean, q);
  return s / static_cast<double>(corrupted.size());
}

namespace {

std::uint64_t family_seed(std::uint64_t seed, CorruptionFamily f) {
  return hash_combine(seed, static_cast<std::uint64_t>(f));
}

double accuracy_of(const Tensor& probs, const std::vector<int>& labels) {
  const auto pred = argmax_rows(probs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

double mrs(const Model& model, const Dataset& data, CorruptionFamily family, const SweepOptions& options) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "cannot score an empty dataset");
  (void)parse_family(to_string(family));
  const Tensor clean = predict_probs(model, data.images, options.threads);
  std::vector<Tensor> corrupted;
  for (int s = 1; s <= kMaxSeverity; ++s) {
    const Dataset d = corrupt_dataset(data, {family, s, family_seed(options.seed, family)}, options.table);
    corrupted.push_back(predict_probs(model, d.images, options.threads));
  }
  return mrs_from_probs(clean, corrupted);
}

double EvalReport::cell(CorruptionFamily family, int severity) const {
  for (const auto& c : grid) {
    if (c.family == family && c.severity == severity) return c.accuracy;
  }
  throw Error(ErrorCode::kInvalidArgument, "no sweep cell for " + to_string(family) + " s" + std::to_string(severity));
}

double EvalReport::family_mrs(CorruptionFamily family) const {
  for (const auto& [f, v] : mrs) {
    if (f == family) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, "no MRS for " + to_string(family));
}

EvalReport robustness_sweep(const Model& model, const Dataset& data, const SweepOptions& options) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "cannot sweep an empty dataset");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.dataset = data.name;
  report.fingerprint = model.config().fingerprint();
  const Tensor clean = predict_probs(model, data.images, options.threads);
  report.clean_accuracy = accuracy_of(clean, data.labels);
  for (auto family : options.families) {
    report.grid.push_back({family, 0, report.clean_accuracy});
    std::vector<Tensor> corrupted;
    for (int s = 1; s <= kMaxSeverity; ++s) {
      const Dataset d = corrupt_dataset(data, {family, s, family_seed(options.seed, family)}, options.table);
      corrupted.push_back(predict_probs(model, d.images, options.threads));
      report.grid.push_back({family, s, accuracy_of(corrupted.back(), data.labels)});
    }
    report.mrs.emplace_back(family, mrs_from_probs(clean, corrupted));
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string grid_csv(const EvalReport& report) {
  std::string out = "dataset,family,severity,accuracy\n";
  for (const auto& c : report.grid) {
    out += report.dataset + "," + to_string(c.family) + "," + std::to_string(c.severity) + "," +
           format_fixed(c.accuracy, 6) + "\n";
  }
  return out;
}

std::string mrs_csv(const EvalReport& report) {
  std::string out = "family,mrs\n";
  for (const auto& [f, v] : report.mrs) out += to_string(f) + "," + format_fixed(v, 8) + "\n";
  return out;
}

}  // namespace xcnet
