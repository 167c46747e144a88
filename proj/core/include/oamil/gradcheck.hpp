// Copyright 2026 The oamil Authors. All Rights Reserved.
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
#include <vector>

namespace oamil {

struct GradCheckSpec {
  int configs = 20;
  std::uint64_t seed = 0;
  double step = 1e-6;
  // Denominator floor of the relative error, so components that are zero up
  // to round-off are compared on an absolute scale.
  double floor = 1e-3;
};

struct GradCheckCase {
  int num_classes = 0;
  int num_scenes = 0;
  bool shared = true;
  std::size_t parameters = 0;
  double selector_loss = 0.0;
  double classifier_loss = 0.0;
  double generator_loss = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
};

/// Compares the analytic gradient of the total loss against central finite
/// differences on random detectors and random training batches.
GradCheckReport RunGradientCheck(const GradCheckSpec& spec);

}  // namespace oamil
