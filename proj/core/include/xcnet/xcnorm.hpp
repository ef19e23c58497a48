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

#include "xcnet/autodiff.hpp"
#include "xcnet/patch_ops.hpp"
#include "xcnet/rng.hpp"
#include "xcnet/tensor.hpp"

namespace xcnet {

enum class Variant { kXCNorm, kRXCNorm };

/// Shape of the robust function applied to centred patch residuals.
///  - kRho:       c * (1 - exp(-z^2 / 2c^2)), even, loses the residual sign
///  - kSigned:    sign(z) * rho(|z|)
///  - kInfluence: z * exp(-z^2 / 2c^2), the Welsch influence function
enum class WelschForm { kRho, kSigned, kInfluence };

struct LayerMode {
  Variant variant = Variant::kXCNorm;
  WelschForm welsch_form = WelschForm::kInfluence;  // only read for kRXCNorm
  bool train = false;
};

/// Which convergence stages follow the correlation. Sharpening and the
/// per-channel scale always run.
struct PipelineOptions {
  bool nbam = true;
  bool channel_norm = true;
};

inline constexpr double kStabilityEps = 1e-5;
inline constexpr double kChannelNormEps = 1e-5;
inline constexpr double kRobustScaleInit = 10.0;
inline constexpr double kRobustScaleMin = 1e-2;
inline constexpr double kRobustScaleMomentum = 0.9;

/// Learnable and tracked state of one normalized-correlation layer.
struct LayerParams {
  Tensor w;              ///< [K, K, C_in, C_out]
  Tensor scale;          ///< A, [C_out]
  double tau_raw = 0.0;  ///< sharpening exponent is softplus(tau_raw)
  double mask_w = 1.0;   ///< 1x1 attention-mask convolution weight
  double mask_b = 0.0;   ///< ... and bias
  double c = kRobustScaleInit;  ///< robust scale; statistics-tracked, never gradient-trained
  double eps = kStabilityEps;

  /// Weights ~ normal(0, sqrt(2 / alpha)), A = 1, tau = 1, mask (1, 0), c = 10.
  static LayerParams init(const ConvGeometry& g, Rng& rng);
  double tau() const;
};

double softplus(double x);
double softplus_inverse(double y);

double welsch(double z, double c, WelschForm form);
double welsch_derivative(double z, double c, WelschForm form);
Tensor welsch(const Tensor& z, double c, WelschForm form);

/// Normalized cross-correlation of every patch with every output-channel
/// template, from centred patches and centred weights.
/// Output shape: pv.out_prefix + [C_out].
Tensor xcnorm_direct(const PatchView& pv, const Tensor& w, const WeightStats& ws, double eps);

/// Same quantity assembled from plain correlations only: the input, its
/// square, and the 1/alpha averaging kernel give mean(z) and mean(z^2)
/// per patch, and the centring of the template is folded into mean(w).
Tensor xcnorm_via_linear(const Tensor& x, const Tensor& w, const WeightStats& ws, const ConvGeometry& g,
                         double eps);

/// Robust variant: the centred patch residuals pass through the Welsch
/// function before correlation and normalisation.
Tensor rxcnorm(const PatchView& pv, const Tensor& w, const WeightStats& ws, double c, WelschForm form,
               double eps);

/// Norm of the (optionally robustified) centred patch, shaped
/// pv.out_prefix + [1]. For the plain variant this is patch_norm_centered.
Tensor centered_patch_norm(const PatchView& pv, const LayerMode& mode, double c);

/// max(0, y)^softplus(tau_raw).
Tensor sharpen(const Tensor& y, double tau_raw);

/// Per-channel product with A; the channel axis is the last one.
Tensor grad_scale(const Tensor& y, const Tensor& scale);

/// Norm-based attention mask. m = sigmoid(mask_w * znorm + mask_b) blends the
/// normalized response with the response re-weighted by the patch norm:
/// m * y2 + (1 - m) * (y2 * znorm). znorm has a single trailing channel.
Tensor nbam(const Tensor& y2, const Tensor& znorm, double mask_w, double mask_b);

/// Per sample and per channel, standardises over spatial positions:
/// (y - mean) / (std + 1e-5). Accepts [H, W, C] or [N, H, W, C].
Tensor channel_norm(const Tensor& y3);

/// c <- momentum * c + (1 - momentum) * mean_patch_std, clamped at c_min.
double update_robust_scale(double c, double mean_patch_std, double momentum = kRobustScaleMomentum);

struct LayerForward {
  Tensor output;
  double mean_patch_std = 0.0;  ///< input statistic feeding the c update
};

/// Composes the plain operators: correlation, sharpen, scale, attention
/// mask, channel normalisation.
LayerForward layer_forward(const Tensor& x, const LayerParams& p, const LayerMode& mode, const ConvGeometry& g,
                           const PipelineOptions& options = {});

/// Graph handles for the differentiable layer. c and eps enter as constants.
struct LayerVars {
  ad::Var w;
  ad::Var scale;
  ad::Var tau_raw;
  ad::Var mask_w;
  ad::Var mask_b;
  double c = kRobustScaleInit;
  double eps = kStabilityEps;
};

struct LayerTape {
  ad::Var output;  ///< [N, H_out, W_out, C_out]
  double mean_patch_std = 0.0;
};

/// Registers the learnable entries of `p` on the graph.
LayerVars layer_vars(ad::Graph& graph, const LayerParams& p, const std::string& prefix = {});

/// Differentiable forward over a batch x of shape [N, H, W, C_in]. The graph
/// is the layer's backward cache.
LayerTape layer_forward(ad::Graph& graph, ad::Var x, const LayerVars& p, const LayerMode& mode,
                        const ConvGeometry& g, const PipelineOptions& options = {});

}  // namespace xcnet
