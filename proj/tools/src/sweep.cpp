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

#include "oamil/tools/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "oamil/noise_sim.hpp"
#include "oamil/random.hpp"

namespace oamil::tools {

void SweepSpec::Validate() const {
  if (r_levels.empty()) throw std::invalid_argument("sweep needs at least one noise level");
  if (modes.empty()) throw std::invalid_argument("sweep needs at least one mode");
  if (seeds < 1) throw std::invalid_argument("sweep needs at least one seed");
  if (scenes < 2) throw std::invalid_argument("sweep needs at least two scenes");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  for (double r : r_levels) NoiseSpec{r, 0}.Validate();
  layout.Validate();
  train.Validate();
}

std::string RunId(const SweepCell& cell) {
  char r[32];
  std::snprintf(r, sizeof r, "%.2f", cell.r);
  return std::string(ModeName(cell.mode)) + "_r" + r + "_s" + std::to_string(cell.seed);
}

std::vector<SweepCell> SweepCells(const SweepSpec& spec) {
  std::vector<TrainMode> modes = spec.modes;
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  std::vector<double> levels = spec.r_levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<SweepCell> cells;
  for (TrainMode mode : modes) {
    for (double r : levels) {
      for (int s = 0; s < spec.seeds; ++s) cells.push_back({mode, r, static_cast<std::uint64_t>(s)});
    }
  }
  return cells;
}

MetricsRow RunSweepCell(const SweepSpec& spec, const SweepCell& cell) {
  const AnnotatedDataset all = GenerateScenes(spec.scenes, spec.layout, DeriveSeed(spec.data_seed, {cell.seed}));
  auto [train, val] = SplitDataset(all, spec.train.val_fraction, DeriveSeed(spec.data_seed, {cell.seed, 1}));
  const AnnotatedDataset noisy = PerturbDataset(train, {cell.r, DeriveSeed(spec.data_seed, {cell.seed, 2})});

  TrainConfig cfg = spec.train;
  cfg.mode = cell.mode;
  cfg.seed = cell.seed;
  const TrainResult trained = TrainSplit(noisy, AnnotatedDataset{}, cfg);
  const EvalResult ev = EvaluateDetector(trained.detector, val, cfg.inference, cfg.diagnostic);

  MetricsRow row;
  row.run_id = RunId(cell);
  row.mode = std::string(ModeName(cell.mode));
  row.noise_r = cell.r;
  row.seed = cell.seed;
  row.map50 = ev.ap.map;
  row.cls_acc = ev.diagnostic.cls_acc;
  row.loc_prec = ev.diagnostic.loc_prec;
  return row;
}

std::vector<MetricsRow> RunSweep(const SweepSpec& spec) {
  spec.Validate();
  const std::vector<SweepCell> cells = SweepCells(spec);
  std::vector<MetricsRow> rows(cells.size());
  if (spec.jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = RunSweepCell(spec, cells[i]);
    return rows;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rows[i] = RunSweepCell(spec, cells[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), cells.size());
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace oamil::tools
