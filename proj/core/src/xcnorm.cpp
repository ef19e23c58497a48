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

#include "xcnet/xcnorm.hpp"

#include <algorithm>
#include <cmath>

namespace xcnet {

namespace {
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (y <= 0.0) throw Error(ErrorCode::kInvalidArgument, "softplus_inverse needs y > 0");
  // log(exp(y) - 1), rearranged to stay finite for large y.
  return y + std::log(-std::expm1(-y));
}

LayerParams LayerParams::init(const ConvGeometry& g, Rng& rng) {
  LayerParams p;
  const double stddev = std::sqrt(2.0 / static_cast<double>(g.alpha()));
  p.w = rand_fill(rng, Shape{g.kernel, g.kernel, g.in_channels, g.out_channels}, Normal{0.0, stddev});
  p.scale = Tensor(Shape{g.out_channels}, 1.0);
  p.tau_raw = softplus_inverse(1.0);
  return p;
}

double LayerParams::tau() const { return softplus(tau_raw); }

double welsch(double z, double c, WelschForm form) {
  const double e = std::exp(-(z * z) / (2.0 * c * c));
  switch (form) {
    case WelschForm::kRho: return c * (1.0 - e);
    case WelschForm::kSigned: return (z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0)) * c * (1.0 - e);
    case WelschForm::kInfluence: return z * e;
  }
  return 0.0;
}

double welsch_derivative(double z, double c, WelschForm form) {
  const double e = std::exp(-(z * z) / (2.0 * c * c));
  switch (form) {
    case WelschForm::kRho: return (z / c) * e;
    case WelschForm::kSigned: return (std::abs(z) / c) * e;
    case WelschForm::kInfluence: return e * (1.0 - (z * z) / (c * c));
  }
  return 0.0;
}

Tensor welsch(const Tensor& z, double c, WelschForm form) {
  Tensor out(z.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) out[i] = welsch(z[i], c, form);
  return out;
}

namespace {

void check_weights(const PatchView& pv, const Tensor& w, const WeightStats& ws) {
  if (w.rank() != 4 || w.dim(0) * w.dim(1) * w.dim(2) != pv.alpha()) {
    throw Error(ErrorCode::kShapeMismatch, "weights " + shape_string(w.shape()) + " do not match patch length " +
                                               std::to_string(pv.alpha()));
  }
  if (ws.w_mean.numel() != w.dim(3)) throw Error(ErrorCode::kShapeMismatch, "weight stats do not match weights");
}

Shape with_channels(Shape prefix, std::size_t channels) {
  prefix.push_back(channels);
  return prefix;
}

// Shared core of the direct and robust forms: correlates transformed centred
// patches with centred weights and divides by the product of norms.
template <typename Transform>
Tensor normalized_correlation(const PatchView& pv, const Tensor& w, const WeightStats& ws, double eps,
                              Transform transform) {
  check_weights(pv, w, ws);
  const std::size_t rows = pv.rows(), alpha = pv.alpha(), cout = w.dim(3);
  std::vector<double> wc(alpha * cout);
  for (std::size_t j = 0; j < alpha; ++j) {
    for (std::size_t c = 0; c < cout; ++c) wc[j * cout + c] = w[j * cout + c] - ws.w_mean[c];
  }
  Tensor out(with_channels(pv.out_prefix, cout));
  std::vector<double> zt(alpha);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = pv.patches.data().data() + r * alpha;
    const double mu = pv.patch_mean[r];
    double zz = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) {
      zt[j] = transform(z[j] - mu);
      zz += zt[j] * zt[j];
    }
    const double znorm = std::sqrt(zz);
    for (std::size_t c = 0; c < cout; ++c) {
      double num = 0.0;
      for (std::size_t j = 0; j < alpha; ++j) num += zt[j] * wc[j * cout + c];
      out[r * cout + c] = num / (znorm * ws.w_centered_norm[c] + eps);
    }
  }
  return out;
}

}  // namespace

Tensor xcnorm_direct(const PatchView& pv, const Tensor& w, const WeightStats& ws, double eps) {
  return normalized_correlation(pv, w, ws, eps, [](double d) { return d; });
}

Tensor rxcnorm(const PatchView& pv, const Tensor& w, const WeightStats& ws, double c, WelschForm form, double eps) {
  return normalized_correlation(pv, w, ws, eps, [c, form](double d) { return welsch(d, c, form); });
}

Tensor xcnorm_via_linear(const Tensor& x, const Tensor& w, const WeightStats& ws, const ConvGeometry& g, double eps) {
  const Tensor phi = linear_xcorr(x, w, g);
  const Tensor mu_z = mean_filter(x, g);
  const Tensor mu_z2 = mean_filter(x * x, g);
  const std::size_t cout = g.out_channels;
  const auto alpha = static_cast<double>(g.alpha());
  Tensor out(phi.shape());
  const std::size_t rows = mu_z.numel();
  for (std::size_t r = 0; r < rows; ++r) {
    const double var_z = std::max(0.0, mu_z2[r] - mu_z[r] * mu_z[r]);
    const double sd_z = std::sqrt(var_z);
    for (std::size_t c = 0; c < cout; ++c) {
      const double num = phi[r * cout + c] - alpha * mu_z[r] * ws.w_mean[c];
      out[r * cout + c] = num / (alpha * sd_z * ws.w_std[c] + eps);
    }
  }
  return out;
}

Tensor centered_patch_norm(const PatchView& pv, const LayerMode& mode, double c) {
  Tensor out(with_channels(pv.out_prefix, 1));
  if (mode.variant == Variant::kXCNorm) {
    std::copy(pv.patch_norm_centered.data().begin(), pv.patch_norm_centered.data().end(), out.data().begin());
    return out;
  }
  const std::size_t alpha = pv.alpha();
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    const double* z = pv.patches.data().data() + r * alpha;
    double zz = 0.0;
    for (std::size_t j = 0; j < alpha; ++j) {
      const double t = welsch(z[j] - pv.patch_mean[r], c, mode.welsch_form);
      zz += t * t;
    }
    out[r] = std::sqrt(zz);
  }
  return out;
}

Tensor sharpen(const Tensor& y, double tau_raw) {
  const double tau = softplus(tau_raw);
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) out[i] = std::pow(std::max(0.0, y[i]), tau);
  return out;
}

Tensor grad_scale(const Tensor& y, const Tensor& scale) {
  if (y.rank() == 0 || scale.numel() != y.shape().back()) {
    throw Error(ErrorCode::kShapeMismatch, "scale of " + std::to_string(scale.numel()) + " channels for output " +
                                               shape_string(y.shape()));
  }
  const std::size_t cout = scale.numel();
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) out[i] = y[i] * scale[i % cout];
  return out;
}

Tensor nbam(const Tensor& y2, const Tensor& znorm, double mask_w, double mask_b) {
  if (y2.rank() != znorm.rank() || znorm.shape().back() != 1 ||
      !std::equal(y2.shape().begin(), y2.shape().end() - 1, znorm.shape().begin())) {
    throw Error(ErrorCode::kShapeMismatch, "nbam: output " + shape_string(y2.shape()) + " vs norm map " +
                                               shape_string(znorm.shape()));
  }
  const std::size_t cout = y2.shape().back();
  Tensor out(y2.shape());
  for (std::size_t r = 0; r < znorm.numel(); ++r) {
    const double n = znorm[r];
    const double m = sigmoid(mask_w * n + mask_b);
    for (std::size_t c = 0; c < cout; ++c) {
      const double y = y2[r * cout + c];
      out[r * cout + c] = m * y + (1.0 - m) * (y * n);
    }
  }
  return out;
}

Tensor channel_norm(const Tensor& y3) {
  std::size_t samples = 1;
  if (y3.rank() == 4) {
    samples = y3.dim(0);
  } else if (y3.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "channel_norm expects [H,W,C] or [N,H,W,C]");
  }
  const std::size_t channels = y3.shape().back();
  const std::size_t positions = samples ? y3.numel() / (samples * channels) : 0;
  if (positions == 0) throw Error(ErrorCode::kEmptyReduction, "channel_norm over zero positions");
  const Tensor grouped = y3.reshaped(Shape{samples, positions, channels});
  const Tensor mu = reduce(ReduceOp::kMean, grouped, {1}, true);
  const Tensor sd = elementwise(ElemOp::kSqrt, reduce(ReduceOp::kVar, grouped, {1}, true));
  return ((grouped - mu) / (sd + kChannelNormEps)).reshaped(y3.shape());
}

double update_robust_scale(double c, double mean_patch_std, double momentum) {
  return std::max(kRobustScaleMin, momentum * c + (1.0 - momentum) * mean_patch_std);
}

LayerForward layer_forward(const Tensor& x, const LayerParams& p, const LayerMode& mode, const ConvGeometry& g,
                           const PipelineOptions& options) {
  const PatchView pv = im2col(x, g);
  const WeightStats ws = weight_stats(p.w, g);
  const Tensor y = mode.variant == Variant::kXCNorm ? xcnorm_direct(pv, p.w, ws, p.eps)
                                                    : rxcnorm(pv, p.w, ws, p.c, mode.welsch_form, p.eps);
  Tensor out = grad_scale(sharpen(y, p.tau_raw), p.scale);
  if (options.nbam) out = nbam(out, centered_patch_norm(pv, mode, p.c), p.mask_w, p.mask_b);
  if (options.channel_norm) out = channel_norm(out);
  return {std::move(out), mean(pv.patch_std)};
}

LayerVars layer_vars(ad::Graph& graph, const LayerParams& p, const std::string& prefix) {
  LayerVars v;
  v.w = graph.param(p.w, prefix + "w");
  v.scale = graph.param(p.scale, prefix + "A");
  v.tau_raw = graph.param(Tensor::scalar(p.tau_raw), prefix + "tau_raw");
  v.mask_w = graph.param(Tensor::scalar(p.mask_w), prefix + "mask_w");
  v.mask_b = graph.param(Tensor::scalar(p.mask_b), prefix + "mask_b");
  v.c = p.c;
  v.eps = p.eps;
  return v;
}

LayerTape layer_forward(ad::Graph& graph, ad::Var x, const LayerVars& p, const LayerMode& mode,
                        const ConvGeometry& g, const PipelineOptions& options) {
  if (x.value().rank() != 4) throw Error(ErrorCode::kShapeMismatch, "layer input must be [N,H,W,C]");
  const std::size_t n = x.shape()[0];
  const std::size_t ho = g.out_extent(x.shape()[1]), wo = g.out_extent(x.shape()[2]);
  const std::size_t cout = g.out_channels;

  ad::Var patches = ad::im2col(x, g);
  ad::Var centered = ad::sub(patches, ad::mean(patches, {1}, true));

  // Mean population std of the raw patches, for the c update.
  double std_sum = 0.0;
  {
    const auto& cv = centered.value();
    const std::size_t rows = cv.dim(0), alpha = cv.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      double ss = 0.0;
      for (std::size_t j = 0; j < alpha; ++j) ss += cv[r * alpha + j] * cv[r * alpha + j];
      std_sum += std::sqrt(ss / static_cast<double>(alpha));
    }
    std_sum /= static_cast<double>(std::max<std::size_t>(rows, 1));
  }

  ad::Var residual = centered;
  if (mode.variant == Variant::kRXCNorm) {
    const double c = p.c;
    const WelschForm form = mode.welsch_form;
    residual = ad::unary(
        centered, [c, form](double z) { return welsch(z, c, form); },
        [c, form](double z) { return welsch_derivative(z, c, form); }, "welsch");
  }
  ad::Var znorm = ad::row_norm(residual);  // [R, 1]

  ad::Var wm = ad::reshape(p.w, Shape{g.alpha(), cout});
  ad::Var wc = ad::sub(wm, ad::mean(wm, {0}, true));
  ad::Var wnorm = ad::sqrt(ad::sum(ad::square(wc), {0}, true));  // [1, C_out]

  ad::Var num = ad::matmul(residual, wc);
  ad::Var den = ad::add_scalar(ad::mul(znorm, wnorm), p.eps);
  ad::Var y = ad::div(num, den);

  ad::Var y1 = ad::pow(ad::max0(y), ad::softplus(p.tau_raw));
  ad::Var y2 = ad::mul(y1, ad::reshape(p.scale, Shape{1, cout}));
  ad::Var y3 = y2;
  if (options.nbam) {
    ad::Var m = ad::sigmoid(ad::add(ad::mul(znorm, p.mask_w), p.mask_b));
    ad::Var one = graph.constant(Tensor::scalar(1.0));
    y3 = ad::add(ad::mul(m, y2), ad::mul(ad::sub(one, m), ad::mul(y2, znorm)));
  }
  ad::Var out = y3;
  if (options.channel_norm) {
    out = ad::standardize(ad::reshape(y3, Shape{n, ho * wo, cout}), kChannelNormEps);
  }
  return {ad::reshape(out, Shape{n, ho, wo, cout}), std_sum};
}

}  // namespace xcnet
