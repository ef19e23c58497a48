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

#include "xcnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xcnet/autodiff.hpp"
#include "xcnet/model.hpp"
#include "xcnet/rng.hpp"

namespace xcnet {

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& theta, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be > 0");
  Tensor g(theta.shape());
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) throw Error(ErrorCode::kShapeMismatch, "gradient shapes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  return worst;
}

bool GradCheckReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradCheckRow& r) { return r.pass; });
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (!r.pass) out.push_back(r.name);
  }
  return out;
}

std::string GradCheckReport::csv() const {
  std::string out = "param_name,max_rel_err,h,pass\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.name;
    std::snprintf(buf, sizeof buf, ",%.6e", r.max_rel_err);
    out += buf;
    std::snprintf(buf, sizeof buf, ",%g", r.h);
    out += buf;
    out += r.pass ? ",true\n" : ",false\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor ncc_grad_analytic(const Tensor& z_centered, const Tensor& w_centered) {
  if (z_centered.numel() != w_centered.numel()) throw Error(ErrorCode::kShapeMismatch, "z and w lengths differ");
  double zn = 0.0, wn = 0.0;
  for (double v : z_centered.data()) zn += v * v;
  for (double v : w_centered.data()) wn += v * v;
  zn = std::sqrt(zn);
  wn = std::sqrt(wn);
  if (zn == 0.0 || wn == 0.0) throw Error(ErrorCode::kDegenerateVector, "correlation gradient needs non-zero norms");
  double proj = 0.0;
  for (std::size_t i = 0; i < z_centered.numel(); ++i) proj += (w_centered[i] / wn) * (z_centered[i] / zn);
  Tensor g(w_centered.shape());
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = (z_centered[i] / zn - proj * w_centered[i] / wn) / wn;
  return g;
}

Tensor ncc_grad_autodiff(const Tensor& z_centered, const Tensor& w_centered) {
  if (z_centered.numel() != w_centered.numel()) throw Error(ErrorCode::kShapeMismatch, "z and w lengths differ");
  const std::size_t n = z_centered.numel();
  ad::Graph g;
  ad::Var z = g.constant(z_centered.reshaped(Shape{1, n}));
  ad::Var w = g.param(w_centered.reshaped(Shape{n, 1}), "w");
  ad::Var dot = ad::matmul(z, w);
  ad::Var zn = ad::sqrt(ad::sum(ad::square(z)));
  ad::Var wn = ad::sqrt(ad::sum(ad::square(w)));
  ad::Var ncc = ad::div(ad::reshape(dot, Shape{}), ad::mul(zn, wn));
  g.backward(ncc);
  return g.grad(w).reshaped(w_centered.shape());
}

GradCheckSize parse_gradcheck_size(const std::string& name) {
  if (name == "small") return GradCheckSize::kSmall;
  if (name == "layer") return GradCheckSize::kLayer;
  if (name == "model") return GradCheckSize::kModel;
  throw Error(ErrorCode::kConfigError, "unknown gradcheck size '" + name + "' (small|layer|model)");
}

namespace {

using Builder = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

// Differentiates sum(build(inputs) * readout) with respect to every input and
// compares with central differences.
GradCheckRow check_op(const std::string& name, std::vector<Tensor> inputs, const Builder& build, Rng& rng,
                      double tolerance, double fault_factor) {
  Tensor readout;
  auto loss_of = [&](const std::vector<Tensor>& xs, bool with_fault, std::vector<Tensor>* grads) {
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (const auto& x : xs) vars.push_back(g.param(x));
    ad::Var out = build(g, vars);
    if (with_fault) out = ad::faulty_identity(out, fault_factor);
    if (readout.shape() != out.shape()) readout = rand_fill(rng, out.shape(), Uniform{-1.0, 1.0});
    ad::Var loss = ad::sum(ad::mul(out, g.constant(readout)));
    if (grads) {
      g.backward(loss);
      for (const auto& v : vars) grads->push_back(g.grad(v));
    }
    return loss.value().item();
  };
  std::vector<Tensor> analytic;
  loss_of(inputs, fault_factor != 1.0, &analytic);
  GradCheckRow row{"op:" + name, 0.0, kFiniteDiffStep, tolerance, false};
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& t) {
      std::vector<Tensor> xs = inputs;
      xs[k] = t;
      return loss_of(xs, false, nullptr);
    };
    row.max_rel_err = std::max(row.max_rel_err, max_relative_error(analytic[k], finite_diff(f, inputs[k])));
  }
  row.pass = row.max_rel_err <= tolerance;
  return row;
}

void primitive_checks(GradCheckReport& report, Rng& rng, double fault) {
  const double tol = kPrimitiveTolerance;
  auto normal = [&](Shape s) { return rand_fill(rng, s, Normal{0.0, 1.0}); };
  auto positive = [&](Shape s) { return rand_fill(rng, s, Uniform{0.5, 2.0}); };
  using V = std::vector<ad::Var>;
  auto add = [&](const std::string& name, std::vector<Tensor> in, Builder b) {
    report.rows.push_back(check_op(name, std::move(in), b, rng, tol, fault));
  };
  add("add", {normal({3, 4}), normal({1, 4})}, [](ad::Graph&, const V& v) { return ad::add(v[0], v[1]); });
  add("sub", {normal({3, 4}), normal({3, 1})}, [](ad::Graph&, const V& v) { return ad::sub(v[0], v[1]); });
  add("mul", {normal({3, 4}), normal({3, 4})}, [](ad::Graph&, const V& v) { return ad::mul(v[0], v[1]); });
  add("div", {normal({3, 4}), positive({1, 4})}, [](ad::Graph&, const V& v) { return ad::div(v[0], v[1]); });
  add("exp", {normal({5})}, [](ad::Graph&, const V& v) { return ad::exp(v[0]); });
  add("log", {positive({5})}, [](ad::Graph&, const V& v) { return ad::log(v[0]); });
  add("sqrt", {positive({5})}, [](ad::Graph&, const V& v) { return ad::sqrt(v[0]); });
  add("square", {normal({5})}, [](ad::Graph&, const V& v) { return ad::square(v[0]); });
  add("max0", {normal({6})}, [](ad::Graph&, const V& v) { return ad::max0(v[0]); });
  add("abs", {normal({6})}, [](ad::Graph&, const V& v) { return ad::abs(v[0]); });
  add("sigmoid", {normal({5})}, [](ad::Graph&, const V& v) { return ad::sigmoid(v[0]); });
  add("softplus", {normal({5})}, [](ad::Graph&, const V& v) { return ad::softplus(v[0]); });
  add("pow", {positive({5}), positive({})}, [](ad::Graph&, const V& v) { return ad::pow(v[0], v[1]); });
  add("sum_axis", {normal({2, 3, 4})}, [](ad::Graph&, const V& v) { return ad::sum(v[0], {1}); });
  add("mean_axis", {normal({2, 3, 4})}, [](ad::Graph&, const V& v) { return ad::mean(v[0], {0, 2}, true); });
  add("matmul", {normal({3, 4}), normal({4, 2})}, [](ad::Graph&, const V& v) { return ad::matmul(v[0], v[1]); });
  add("im2col", {normal({1, 4, 4, 2})}, [](ad::Graph&, const V& v) {
    return ad::im2col(v[0], ConvGeometry{3, 1, 1, 2, 1});
  });
  add("row_norm", {normal({4, 5})}, [](ad::Graph&, const V& v) { return ad::row_norm(v[0]); });
  add("standardize", {normal({2, 5, 3})}, [](ad::Graph&, const V& v) { return ad::standardize(v[0], kChannelNormEps); });
  add("max_pool", {normal({1, 4, 4, 2})}, [](ad::Graph&, const V& v) { return ad::max_pool(v[0], 2); });
  add("avg_pool", {normal({1, 4, 4, 2})}, [](ad::Graph&, const V& v) { return ad::avg_pool(v[0], 2); });
  add("softmax_xent", {normal({3, 4})}, [](ad::Graph&, const V& v) { return ad::softmax_xent(v[0], {0, 3, 1}); });
}

void layer_checks(GradCheckReport& report, Rng& rng, double fault) {
  // One robust layer on a 4x4x2 batch of two, flattened into a 3-way linear
  // readout feeding cross-entropy.
  const ConvGeometry g{3, 1, 1, 2, 3};
  LayerParams p = LayerParams::init(g, rng);
  p.c = 0.4;
  p.tau_raw = softplus_inverse(1.3);
  p.mask_w = 0.7;
  p.mask_b = -0.2;
  p.scale = rand_fill(rng, Shape{3}, Uniform{0.5, 1.5});
  const Tensor x = rand_fill(rng, Shape{2, 4, 4, 2}, Uniform{0.0, 1.0});
  const Tensor readout = rand_fill(rng, Shape{48, 3}, Normal{0.0, 0.3});
  const std::vector<int> labels{2, 0};
  const LayerMode mode{Variant::kRXCNorm, WelschForm::kInfluence, true};

  std::vector<std::pair<std::string, Tensor>> named{{"w", p.w},
                                                    {"A", p.scale},
                                                    {"tau_raw", Tensor::scalar(p.tau_raw)},
                                                    {"mask_w", Tensor::scalar(p.mask_w)},
                                                    {"mask_b", Tensor::scalar(p.mask_b)}};
  auto loss_of = [&](const std::vector<std::pair<std::string, Tensor>>& vals, std::vector<Tensor>* grads) {
    ad::Graph graph;
    std::vector<ad::Var> vars;
    for (const auto& [n, v] : vals) vars.push_back(graph.param(v, n));
    LayerVars lv{vars[0], vars[1], vars[2], vars[3], vars[4], p.c, p.eps};
    ad::Var out = layer_forward(graph, graph.constant(x), lv, mode, g).output;
    if (grads && fault != 1.0) out = ad::faulty_identity(out, fault);
    ad::Var logits = ad::matmul(ad::reshape(out, Shape{2, 48}), graph.constant(readout));
    ad::Var loss = ad::softmax_xent(logits, labels);
    if (grads) {
      graph.backward(loss);
      for (const auto& v : vars) grads->push_back(graph.grad(v));
    }
    return loss.value().item();
  };
  std::vector<Tensor> analytic;
  loss_of(named, &analytic);
  for (std::size_t k = 0; k < named.size(); ++k) {
    auto f = [&](const Tensor& t) {
      auto vals = named;
      vals[k].second = t;
      return loss_of(vals, nullptr);
    };
    GradCheckRow row{"layer." + named[k].first, 0.0, kFiniteDiffStep, kCompositeTolerance, false};
    row.max_rel_err = max_relative_error(analytic[k], finite_diff(f, named[k].second));
    row.pass = row.max_rel_err <= row.tolerance;
    report.rows.push_back(row);
  }
}

void model_checks(GradCheckReport& report, Rng& rng, double fault) {
  ModelConfig cfg;
  cfg.kind = BlockKind::kRXCNorm;
  cfg.layers = {LayerSpec{3, 3, 1, 1}, LayerSpec{4, 3, 1, 1}};
  cfg.in_height = cfg.in_width = 6;
  cfg.n_classes = 3;
  Rng init = rng.fork("init");
  Model model(cfg, init);
  // Small robust scales so the Welsch curvature is exercised.
  for (auto& item : model.buffers().items()) item.value[0] = 0.3;
  const Tensor x = rand_fill(rng, Shape{2, 6, 6, 1}, Uniform{0.0, 1.0});
  const std::vector<int> labels{1, 2};

  auto loss_of = [&](const Model& m) {
    ad::Graph graph;
    return ad::softmax_xent(m.forward(graph, x, true).logits, labels).value().item();
  };
  ad::Graph graph;
  TapeForward fwd = model.forward(graph, x, true, fault);
  graph.backward(ad::softmax_xent(fwd.logits, labels));
  for (const auto& item : model.params().items()) {
    const Tensor analytic = graph.grad(fwd.params.at(item.name));
    auto f = [&](const Tensor& t) {
      Model probe = model;
      probe.params().at(item.name) = t;
      return loss_of(probe);
    };
    GradCheckRow row{item.name, 0.0, kFiniteDiffStep, kCompositeTolerance, false};
    row.max_rel_err = max_relative_error(analytic, finite_diff(f, item.value));
    row.pass = row.max_rel_err <= row.tolerance;
    report.rows.push_back(row);
  }

  // Analytic oracle for the correlation gradient on centred random vectors.
  Tensor z = rand_fill(rng, Shape{9}, Normal{0.0, 1.0});
  Tensor w = rand_fill(rng, Shape{9}, Normal{0.0, 1.0});
  z = z + (-mean(z));
  w = w + (-mean(w));
  GradCheckRow row{"ncc_analytic", 0.0, 0.0, kAnalyticTolerance, false};
  row.max_rel_err = max_relative_error(ncc_grad_autodiff(z, w), ncc_grad_analytic(z, w));
  row.pass = row.max_rel_err <= row.tolerance;
  report.rows.push_back(row);
}

}  // namespace

GradCheckReport run_gradcheck(GradCheckSize size, std::uint64_t seed, double fault_factor) {
  GradCheckReport report;
  Rng rng(seed);
  switch (size) {
    case GradCheckSize::kSmall: primitive_checks(report, rng, fault_factor); break;
    case GradCheckSize::kLayer: layer_checks(report, rng, fault_factor); break;
    case GradCheckSize::kModel: model_checks(report, rng, fault_factor); break;
  }
  return report;
}

ProbeSetup make_probe_setup(std::uint64_t seed) {
  Rng rng(seed);
  ProbeSetup s;
  s.geometry = ConvGeometry{3, 1, 1, 1, 4};
  s.params = LayerParams::init(s.geometry, rng);
  s.input = rand_fill(rng, Shape{1, 6, 6, 1}, Uniform{0.0, 1.0});
  s.readout = rand_fill(rng, Shape{1, 6, 6, 4}, Normal{0.0, 1.0});
  return s;
}

double grad_magnitude_probe(const ProbeSetup& setup, double weight_scale) {
  if (!(weight_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "probe scale must be > 0");
  ad::Graph graph;
  LayerParams p = setup.params;
  p.w = p.w * weight_scale;
  LayerVars v = layer_vars(graph, p, "probe.");
  const LayerMode mode{Variant::kXCNorm, WelschForm::kInfluence, false};
  ad::Var out = layer_forward(graph, graph.constant(setup.input), v, mode, setup.geometry, PipelineOptions{true, false}).output;
  graph.backward(ad::sum(ad::mul(out, graph.constant(setup.readout))));
  const Tensor gw = graph.grad(v.w);
  double total = 0.0;
  for (double d : gw.data()) total += std::abs(d);
  return total / static_cast<double>(gw.numel());
}

}  // namespace xcnet
