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
#include <string>
#include <vector>

#include "oamil/data.hpp"
#include "oamil/eval.hpp"
#include "oamil/trainer.hpp"

namespace oamil::tools {

/// Experiment grid over noise levels, training modes and seeds. Every cell
/// generates its own scenes from (data_seed, seed), holds out
/// train.val_fraction of them with clean boxes, perturbs the remaining
/// annotations at level r and trains with seed `seed`.
struct SweepSpec {
  std::vector<double> r_levels{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<TrainMode> modes{TrainMode::kNaive, TrainMode::kOaIe};
  int seeds = 5;
  int scenes = 250;
  std::uint64_t data_seed = 0;
  LayoutSpec layout;
  TrainConfig train;  // mode and seed are set per cell
  int jobs = 1;

  void Validate() const;
};

struct SweepCell {
  TrainMode mode = TrainMode::kNaive;
  double r = 0.0;
  std::uint64_t seed = 0;
};

std::string RunId(const SweepCell& cell);

/// Cells in output order: mode (ladder order), then r, then seed.
std::vector<SweepCell> SweepCells(const SweepSpec& spec);

MetricsRow RunSweepCell(const SweepSpec& spec, const SweepCell& cell);

/// Runs every cell, `spec.jobs` at a time. Rows come back in SweepCells order
/// whatever the number of jobs.
std::vector<MetricsRow> RunSweep(const SweepSpec& spec);

}  // namespace oamil::tools
