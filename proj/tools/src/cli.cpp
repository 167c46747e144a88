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

#include "oamil/tools/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <utility>

#include <nlohmann/json.hpp>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/eval.hpp"
#include "oamil/geometry.hpp"
#include "oamil/gradcheck.hpp"
#include "oamil/noise_sim.hpp"
#include "oamil/tools/manifest.hpp"
#include "oamil/tools/sweep.hpp"
#include "oamil/trainer.hpp"

namespace oamil::tools {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string Format(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string Format(bool v) { return v ? "true" : "false"; }
std::string Format(const std::string& v) { return v; }
template <class T>
  requires std::is_integral_v<T>
std::string Format(T v) {
  return std::to_string(v);
}
template <class T>
std::string Format(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + Format(v[i]);
  return out;
}

/// Registers options on a subcommand and remembers how to print their
/// values, so every flag can be written to the run manifest.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* Add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    if constexpr (requires { var.push_back(var.front()); }) opt->delimiter(',');
    printers_.emplace_back(name, [&var] { return Format(var); });
    return opt;
  }

  void Record(Manifest& m) const {
    for (const auto& [name, print] : printers_) m.Set(name, print());
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> printers_;
};

struct TrainFlags {
  std::string mode = std::string(ModeName(TrainMode::kOaIe));
  TrainConfig cfg;

  void Register(FlagSet& flags, bool with_mode_and_seed) {
    if (with_mode_and_seed) {
      flags.Add("mode", mode, "naive, is-loss-only, +oa-is, +oa-ie or clean-oracle");
      flags.Add("seed", cfg.seed, "training seed");
    }
    flags.Add("epochs", cfg.epochs, "passes over the training scenes");
    flags.Add("batch-size", cfg.batch_size, "scenes per update");
    flags.Add("lr", cfg.learning_rate, "learning rate");
    flags.Add("momentum", cfg.momentum, "SGD momentum");
    flags.Add("val-fraction", cfg.val_fraction, "fraction of scenes held out for validation");
    flags.Add("shared", cfg.shared, "selector reuses the classifier weights");
    flags.Add("gamma", cfg.oamil.gamma, "exponent of the confidence mapping");
    flags.Add("theta", cfg.oamil.theta, "cap of the confidence mapping");
    flags.Add("n-extend", cfg.oamil.extensions, "bag extension stages");
    flags.Add("lambda", cfg.oamil.lambda, "selector loss weight");
    flags.Add("label-iou", cfg.oamil.label_iou, "IoU to the target that makes an instance positive");
    flags.Add("extension-proposals", cfg.oamil.extension_proposals, "instances per extension stage");
    flags.Add("extension-jitter", cfg.oamil.extension_jitter, "jitter of extension proposals");
    flags.Add("beta", cfg.oamil.smooth_l1_beta, "smooth-L1 transition point");
    flags.Add("proposals", cfg.proposals.positives_per_object, "jittered proposals per annotation");
    flags.Add("jitter", cfg.proposals.jitter, "relative jitter of proposals");
    flags.Add("negatives", cfg.proposals.negatives_per_scene, "background proposals per scene");
    flags.Add("negative-max-iou", cfg.proposals.negative_max_iou, "max IoU of a background proposal");
    flags.Add("score-threshold", cfg.inference.score_threshold, "drop detections below this score");
    flags.Add("nms-iou", cfg.inference.nms_iou, "NMS suppression IoU");
    flags.Add("max-detections", cfg.inference.max_per_scene, "detections kept per scene");
    flags.Add("match-iou", cfg.diagnostic.match_iou, "diagnostic: IoU to count an object as found");
    flags.Add("precise-iou", cfg.diagnostic.precise_iou, "diagnostic: IoU of a precise localization");
    flags.Add("min-confidence", cfg.diagnostic.min_confidence, "diagnostic: minimum detection score");
  }

  TrainConfig Resolve() const {
    TrainConfig out = cfg;
    const auto parsed = ParseMode(mode);
    if (!parsed) throw UsageError("unknown mode '" + mode + "'");
    out.mode = *parsed;
    return out;
  }
};

Manifest StartManifest(const std::string& command, const FlagSet& flags) {
  Manifest m;
  m.Set("tool", "oamil");
  m.Set("version", kVersion);
  m.Set("command", command);
  flags.Record(m);
  return m;
}

void WriteManifest(const Manifest& m, const fs::path& path) {
  try {
    m.Write(path);
  } catch (const ManifestError& e) {
    throw OutputError(e.what());
  }
}

fs::path ManifestFor(const std::string& flag, const fs::path& output) {
  return flag.empty() ? fs::path(output.string() + ".manifest") : fs::path(flag);
}

AnnotatedDataset ReadInput(const fs::path& path) {
  if (!fs::exists(path)) throw InputError(path.string() + ": no such file");
  return ReadAnnotations(path);
}

// Subcommands. Each owns its flag storage; `run` executes after parsing.

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<FlagSet> flags;
  std::function<int()> run;
};

Command GenSynth(CLI::App& root, std::ostream& out) {
  struct State {
    int scenes = 0;
    std::uint64_t seed = 0;
    std::string path;
    std::string manifest;
    LayoutSpec layout;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("gen-synth", "generate synthetic scenes with clean annotations");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("scenes", s->scenes, "number of scenes")->required()->check(CLI::PositiveNumber);
  f.Add("classes", s->layout.num_classes, "object classes")->check(CLI::PositiveNumber);
  f.Add("seed", s->seed, "layout seed");
  f.Add("out", s->path, "output annotation file")->required();
  f.Add("width", s->layout.image_width, "image width");
  f.Add("height", s->layout.image_height, "image height");
  f.Add("min-objects", s->layout.min_objects, "minimum objects per scene");
  f.Add("max-objects", s->layout.max_objects, "maximum objects per scene");
  f.Add("min-size", s->layout.min_size, "minimum object side");
  f.Add("max-size", s->layout.max_size, "maximum object side");
  f.Add("max-pair-iou", s->layout.max_pair_iou, "maximum IoU between two objects");
  f.Add("min-intensity", s->layout.min_intensity, "minimum object intensity");
  f.Add("max-intensity", s->layout.max_intensity, "maximum object intensity");
  f.Add("max-background", s->layout.max_background, "background intensity upper bound (exclusive)");
  c.app->add_option("--manifest", s->manifest, "manifest path (default: <out>.manifest)");
  const FlagSet* fp = c.flags.get();
  c.run = [s, fp, &out] {
    s->layout.Validate();
    WriteManifest(StartManifest("gen-synth", *fp), ManifestFor(s->manifest, s->path));
    const AnnotatedDataset ds = GenerateScenes(s->scenes, s->layout, s->seed);
    WriteAnnotations(ds, s->path);
    out << "wrote " << ds.images.size() << " scenes and " << ds.annotations.size() << " annotations to "
        << s->path << "\n";
    return kExitOk;
  };
  return c;
}

Command InjectNoise(CLI::App& root, std::ostream& out) {
  struct State {
    std::string in;
    std::string path;
    std::string manifest;
    NoiseSpec noise;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("inject-noise", "perturb every annotated box");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("in", s->in, "input annotation file")->required();
  f.Add("r", s->noise.r, "noise level, 0 <= r < 0.5")->required();
  f.Add("seed", s->noise.seed, "noise seed");
  f.Add("out", s->path, "output annotation file")->required();
  c.app->add_option("--manifest", s->manifest, "manifest path (default: <out>.manifest)");
  const FlagSet* fp = c.flags.get();
  c.run = [s, fp, &out] {
    s->noise.Validate();
    const AnnotatedDataset clean = ReadInput(s->in);
    WriteManifest(StartManifest("inject-noise", *fp), ManifestFor(s->manifest, s->path));
    const AnnotatedDataset noisy = PerturbDataset(clean, s->noise);
    WriteAnnotations(noisy, s->path);
    double sum = 0.0;
    for (std::size_t i = 0; i < noisy.annotations.size(); ++i) {
      sum += Iou(noisy.annotations[i].box(), clean.annotations[i].box());
    }
    const std::size_t n = noisy.annotations.size();
    out << "perturbed " << n << " boxes at r=" << Format(s->noise.r) << "; mean IoU(noisy, clean) "
        << FormatNumber(n ? sum / static_cast<double>(n) : 1.0) << "\n";
    return kExitOk;
  };
  return c;
}

Command TrainCommand(CLI::App& root, std::ostream& out) {
  struct State {
    std::string data;
    std::string val;
    std::string dir;
    std::string manifest;
    TrainFlags train;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("train", "train the toy detector");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("data", s->data, "training annotation file")->required();
  f.Add("val", s->val, "validation annotation file (default: split off --val-fraction of --data)");
  f.Add("out", s->dir, "output directory")->required();
  s->train.Register(f, true);
  c.app->add_option("--manifest", s->manifest, "manifest path (default: <out>/manifest.txt)");
  const FlagSet* fp = c.flags.get();
  c.run = [s, fp, &out] {
    const TrainConfig cfg = s->train.Resolve();
    cfg.Validate();
    const AnnotatedDataset data = ReadInput(s->data);
    const AnnotatedDataset val = s->val.empty() ? AnnotatedDataset{} : ReadInput(s->val);
    const fs::path dir(s->dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputError(dir.string() + ": " + ec.message());
    WriteManifest(StartManifest("train", *fp), s->manifest.empty() ? dir / "manifest.txt" : fs::path(s->manifest));

    const TrainResult result = s->val.empty() ? Train(data, cfg) : TrainSplit(data, val, cfg);
    SaveCheckpoint(result.detector, dir / "model.ckpt");
    WriteTrainingLog(result.log, dir / "train_log.csv");
    const EpochLog& last = result.log.back();
    out << "mode " << ModeName(cfg.mode) << ", " << last.epoch << " epochs, final loss "
        << FormatNumber(last.loss.total);
    if (last.val_map50) out << ", val mAP@0.5 " << FormatNumber(*last.val_map50);
    out << "\nwrote " << (dir / "model.ckpt").string() << " and " << (dir / "train_log.csv").string() << "\n";
    return kExitOk;
  };
  return c;
}

Command EvalCommand(CLI::App& root, std::ostream& out) {
  struct State {
    std::string model;
    std::string data;
    std::string path;
    std::string manifest;
    std::string run_id = "eval";
    std::string mode = "model";
    double noise_r = -1.0;
    std::uint64_t seed = 0;
    InferenceSpec inference;
    DiagnosticSpec diagnostic;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("eval", "evaluate a checkpoint against clean scene geometry");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("model", s->model, "checkpoint file")->required();
  f.Add("data", s->data, "annotation file with scene geometry")->required();
  f.Add("out", s->path, "metrics CSV")->required();
  f.Add("run-id", s->run_id, "run_id column");
  f.Add("mode", s->mode, "mode column");
  f.Add("noise-r", s->noise_r, "noise_r column (negative: taken from the data file)");
  f.Add("seed", s->seed, "seed column");
  f.Add("score-threshold", s->inference.score_threshold, "drop detections below this score");
  f.Add("nms-iou", s->inference.nms_iou, "NMS suppression IoU");
  f.Add("max-detections", s->inference.max_per_scene, "detections kept per scene");
  f.Add("match-iou", s->diagnostic.match_iou, "diagnostic: IoU to count an object as found");
  f.Add("precise-iou", s->diagnostic.precise_iou, "diagnostic: IoU of a precise localization");
  f.Add("min-confidence", s->diagnostic.min_confidence, "diagnostic: minimum detection score");
  c.app->add_option("--manifest", s->manifest, "manifest path (default: <out>.manifest)");
  const FlagSet* fp = c.flags.get();
  c.run = [s, fp, &out] {
    if (!fs::exists(s->model)) throw InputError(s->model + ": no such file");
    const ToyDetector det = LoadCheckpoint(s->model);
    const AnnotatedDataset data = ReadInput(s->data);
    WriteManifest(StartManifest("eval", *fp), ManifestFor(s->manifest, s->path));
    const EvalResult ev = EvaluateDetector(det, data, s->inference, s->diagnostic);
    MetricsRow row;
    row.run_id = s->run_id;
    row.mode = s->mode;
    row.noise_r = s->noise_r >= 0.0 ? s->noise_r : (data.provenance.noisy ? data.provenance.noise_r : 0.0);
    row.seed = s->seed;
    row.map50 = ev.ap.map;
    row.cls_acc = ev.diagnostic.cls_acc;
    row.loc_prec = ev.diagnostic.loc_prec;
    WriteMetricsCsv(std::span<const MetricsRow>(&row, 1), s->path);
    out << kMetricsHeader << "\n" << FormatMetricsRow(row) << "\n";
    return kExitOk;
  };
  return c;
}

Command SweepCommand(CLI::App& root, std::ostream& out) {
  struct State {
    std::vector<double> r_levels{0.0, 0.1, 0.2, 0.3, 0.4};
    std::vector<std::string> modes{"naive", "+oa-ie"};
    std::string path;
    std::string manifest;
    SweepSpec spec;
    TrainFlags train;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("sweep", "train and evaluate over a noise x mode x seed grid");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("r-levels", s->r_levels, "comma-separated noise levels");
  f.Add("modes", s->modes, "comma-separated training modes");
  f.Add("seeds", s->spec.seeds, "seeds per cell (0..n-1)")->check(CLI::PositiveNumber);
  f.Add("out", s->path, "metrics CSV")->required();
  f.Add("scenes", s->spec.scenes, "scenes generated per seed");
  f.Add("classes", s->spec.layout.num_classes, "object classes")->check(CLI::PositiveNumber);
  f.Add("data-seed", s->spec.data_seed, "base seed of scene generation and noise");
  s->train.Register(f, false);
  c.app->add_option("--jobs", s->spec.jobs, "cells trained concurrently")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c.app->add_option("--manifest", s->manifest, "manifest path (default: <out>.manifest)");
  const FlagSet* fp = c.flags.get();
  c.run = [s, fp, &out] {
    SweepSpec spec = s->spec;
    spec.r_levels = s->r_levels;
    spec.modes.clear();
    for (const std::string& name : s->modes) {
      const auto mode = ParseMode(name);
      if (!mode) throw UsageError("unknown mode '" + name + "'");
      spec.modes.push_back(*mode);
    }
    spec.train = s->train.cfg;
    spec.Validate();
    WriteManifest(StartManifest("sweep", *fp), ManifestFor(s->manifest, s->path));
    const std::vector<MetricsRow> rows = RunSweep(spec);
    WriteMetricsCsv(rows, s->path);
    out << kMetricsHeader << "\n";
    for (const MetricsRow& row : rows) out << FormatMetricsRow(row) << "\n";
    return kExitOk;
  };
  return c;
}

Command GradCheckCommand(CLI::App& root, std::ostream& out) {
  struct State {
    GradCheckSpec spec;
    double tolerance = 1e-4;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  c.flags = std::make_unique<FlagSet>(c.app);
  FlagSet& f = *c.flags;
  f.Add("seed", s->spec.seed, "seed of the random configurations");
  f.Add("configs", s->spec.configs, "random detector/batch configurations")->check(CLI::PositiveNumber);
  f.Add("step", s->spec.step, "finite-difference step");
  f.Add("tolerance", s->tolerance, "maximum accepted relative error");
  c.run = [s, &out] {
    const GradCheckReport report = RunGradientCheck(s->spec);
    std::size_t params = 0;
    for (const GradCheckCase& cc : report.cases) params += cc.parameters;
    char line[160];
    std::snprintf(line, sizeof line, "max relative error %.3e over %zu configurations (%zu parameters)",
                  report.max_rel_error, report.cases.size(), params);
    const bool ok = report.max_rel_error <= s->tolerance;
    out << line << "\n" << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? kExitOk : kExitCheckFailed;
  };
  return c;
}

int Dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err, int depth);

Command RerunCommand(CLI::App& root, std::ostream& out, std::ostream& err, int depth) {
  struct State {
    std::string manifest;
    std::vector<std::string> overrides;
  };
  auto s = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("rerun", "repeat a run from its manifest");
  c.app->add_option("--manifest", s->manifest, "manifest written by an earlier run")->required();
  c.app->add_option("--set", s->overrides, "override a recorded flag, key=value (repeatable)");
  c.run = [s, &out, &err, depth] {
    if (depth > 0) throw UsageError("rerun cannot replay another rerun");
    Manifest m;
    try {
      m = Manifest::Read(s->manifest);
    } catch (const ManifestError& e) {
      throw InputError(e.what());
    }
    for (const std::string& kv : s->overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      if (key == "tool" || key == "version" || key == "command" || !m.Find(key)) {
        throw UsageError("manifest has no flag '" + key + "'");
      }
      m.Set(key, kv.substr(eq + 1));
    }
    const std::string* command = m.Find("command");
    if (!command) throw InputError(s->manifest + ": no command recorded");
    std::vector<std::string> replay{*command};
    for (const auto& [key, value] : m.entries()) {
      if (key == "tool" || key == "version" || key == "command" || value.empty()) continue;
      replay.push_back("--" + key);
      replay.push_back(value);
    }
    return Dispatch(std::move(replay), out, err, depth + 1);
  };
  return c;
}

int Dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app("Object-aware multiple instance learning on synthetic scenes", "oamil");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::vector<Command> commands;
  commands.push_back(GenSynth(app, out));
  commands.push_back(InjectNoise(app, out));
  commands.push_back(TrainCommand(app, out));
  commands.push_back(EvalCommand(app, out));
  commands.push_back(SweepCommand(app, out));
  commands.push_back(GradCheckCommand(app, out));
  commands.push_back(RerunCommand(app, out, err, depth));

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (const Command& c : commands) {
    if (c.app->parsed()) return c.run();
  }
  return kExitUsage;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return Dispatch(args, out, err, 0);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const OutputError& e) {
    err << "output error: " << e.what() << "\n";
    return kExitOutput;
  } catch (const fs::filesystem_error& e) {
    err << "output error: " << e.what() << "\n";
    return kExitOutput;
  } catch (const TrainingError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const DataError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DetectorError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace oamil::tools
