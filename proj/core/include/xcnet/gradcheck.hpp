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
#include <functional>
#include <string>
#include <vector>

#include "xcnet/patch_ops.hpp"
#include "xcnet/tensor.hpp"
#include "xcnet/xcnorm.hpp"

namespace xcnet {

inline constexpr double kFiniteDiffStep = 1e-4;
inline constexpr double kCompositeTolerance = 1e-3;
inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kAnalyticTolerance = 1e-6;

/// Central differences (f(t + h e_i) - f(t - h e_i)) / 2h per coordinate.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& theta, double h = kFiniteDiffStep);

/// |a - f| / max(|a|, |f|, 1e-8).
double relative_error(double analytic, double numeric);
/// Largest elementwise relative_error between two equal-shape tensors.
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  double h = kFiniteDiffStep;
  double tolerance = kCompositeTolerance;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;

  bool all_pass() const;
  std::vector<std::string> failures() const;
  /// "param_name,max_rel_err,h,pass" with a header row.
  std::string csv() const;
};

/// Gradient of the plain normalized correlation <z, w> / (|z| |w|) with
/// respect to the centred template w: (z_hat - (w_hat . z_hat) w_hat) / |w|.
/// Throws DegenerateVector when either norm is zero.
Tensor ncc_grad_analytic(const Tensor& z_centered, const Tensor& w_centered);
/// Same gradient through the reverse-mode engine (no eps, no robust function).
Tensor ncc_grad_autodiff(const Tensor& z_centered, const Tensor& w_centered);

enum class GradCheckSize { kSmall, kLayer, kModel };
GradCheckSize parse_gradcheck_size(const std::string& name);

/// kSmall:  every primitive op on small random tensors (tolerance 1e-4).
/// kLayer:  one robust layer + cross-entropy on a 4x4 input (1e-3).
/// kModel:  two robust blocks with a normalized head (1e-3), plus the
///          analytic correlation-gradient oracle (1e-6).
/// fault_factor != 1 corrupts one backward rule (negative control).
GradCheckReport run_gradcheck(GradCheckSize size, std::uint64_t seed, double fault_factor = 1.0);

/// Fixed single-layer setup for measuring weight-gradient magnitude.
struct ProbeSetup {
  LayerParams params;
  ConvGeometry geometry;
  Tensor input;    ///< [1, H, W, C_in]
  Tensor readout;  ///< loss = sum(output * readout)
};

ProbeSetup make_probe_setup(std::uint64_t seed);

/// Mean |dL/dw| after multiplying the weights by `weight_scale`. Channel
/// normalisation is off so that A acts on the gradient directly.
double grad_magnitude_probe(const ProbeSetup& setup, double weight_scale);

}  // namespace xcnet
