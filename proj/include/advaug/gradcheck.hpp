// Copyright 2026 The advaug Authors. All Rights Reserved.
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
#include <string>
#include <vector>

namespace advaug {

struct GradcheckOptions {
  double threshold = 1e-3;
  std::uint64_t seed = 0;
  double op_step = 1e-5;       ///< central-difference step for single ops
  double network_step = 1e-6;  ///< smaller step keeps ReLU kinks out of reach
  /// Sample coordinates closer than this (pixels) to a bilinear kink are
  /// not probed.
  double kink_margin = 1e-3;
  std::size_t entries_per_tensor = 4;  ///< for network parameter tensors
};

struct GradcheckRow {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  ///< scalar entries compared
  bool passed = false;
};

struct GradcheckReport {
  double threshold = 0.0;
  std::vector<GradcheckRow> rows;

  bool passed() const;
  std::vector<std::string> failures() const;
  /// op,max_rel_error,checked,threshold,status
  std::string to_csv() const;
};

/// |a - n| / max(|a|, |n|, floor). The suite sets floor to
/// max(1e-6, 1e5 * eps * max(1, |f|) / h), the scale below which a central
/// difference of f with step h carries no slope information.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Finite-difference audit of the differentiable ops, losses and networks in
/// double precision on 8 x 8 inputs.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace advaug
