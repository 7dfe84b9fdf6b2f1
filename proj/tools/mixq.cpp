/**
 * Copyright (c) The mixq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: synth -> calibrate -> analyze -> quantize -> evaluate
// -> report, plus `pipeline` to run every stage in one go.

#include "Commands.h"

#include "CLI11.hpp"

#include <functional>
#include <iostream>

using namespace mixq;
using namespace mixq::cli;

namespace {

struct Flags {
  std::vector<std::string> methods{"quantune-v2"};
  std::string irStage{"unfused"};
  std::string applyStage{"fused"};
  std::vector<double> mixup{0.6, 0.4};
};

enum Opt : unsigned {
  kSynth = 1,
  kCalib = 2,
  kMethod = 4,
  kIrStage = 8,
  kApply = 16,
  kTargets = 32,
};

void addOptions(CLI::App *app, RunConfig &cfg, Flags &flags, unsigned which) {
  app->add_option("--work", cfg.work, "Work directory holding all artifacts")
      ->capture_default_str();
  if (which & kSynth) {
    app->add_option("--arch", cfg.arch, "mininet, mini_resnet, mini_mobilenet")
        ->capture_default_str();
    app->add_option("--seed", cfg.seed, "Generator seed")
        ->capture_default_str();
    app->add_option("--num-calib", cfg.numCalib, "Calibration images")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--num-eval", cfg.numEval, "Evaluation images")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--pathology", cfg.pathology,
                    "Node whose weights get a heavy tail");
    app->add_option("--pathology-factor", cfg.pathologyFactor,
                    "Scale applied to the picked weights")
        ->capture_default_str();
  }
  if (which & kCalib)
    app->add_option("--bins", cfg.bins, "Histogram bins")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  if (which & kMethod) {
    app->add_option("--method", flags.methods,
                    "quantune-v2, in-order, weight-sqnr, top1 (comma list)")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--mixup-weights", flags.mixup, "w_w,w_a")
        ->delimiter(',')
        ->expected(2)
        ->capture_default_str();
    app->add_option("--top1-images", cfg.top1Images,
                    "Images used by the top1 ordering")
        ->capture_default_str();
  }
  if (which & kIrStage)
    app->add_option("--ir-stage", flags.irStage, "Analysis IR stage")
        ->check(CLI::IsMember({"unfused", "fused"}))
        ->capture_default_str();
  if (which & kApply)
    app->add_option("--apply-stage", flags.applyStage, "Application IR stage")
        ->check(CLI::IsMember({"unfused", "fused"}))
        ->capture_default_str();
  if (which & kTargets)
    app->add_option("--target-reduction", cfg.targets,
                    "Normalized BOPs reduction targets in percent")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 100.0))
        ->capture_default_str();
}

void finalize(RunConfig &cfg, const Flags &flags) {
  cfg.methods.clear();
  for (const auto &m : flags.methods)
    cfg.methods.push_back(methodFromName(m));
  cfg.irStage = irStageFromName(flags.irStage);
  cfg.applyStage = irStageFromName(flags.applyStage);
  if (flags.mixup.size() != 2 || flags.mixup[0] < 0 || flags.mixup[1] < 0)
    throw Error(ErrorCode::InvalidArgument,
                "--mixup-weights takes two non-negative numbers");
  cfg.mixup = {flags.mixup[0], flags.mixup[1]};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mixed-precision post-training quantization toolkit"};
  app.require_subcommand(1);
  RunConfig cfg;
  Flags flags;
  std::function<void(const RunConfig &)> action;

  struct Command {
    const char *name;
    const char *help;
    unsigned options;
    void (*fn)(const RunConfig &);
  };
  const Command commands[] = {
      {"synth", "Generate a synthetic model, images and teacher labels",
       kSynth, cmdSynth},
      {"calibrate", "Profile activation ranges", kCalib, cmdCalibrate},
      {"analyze", "Write per-method sensitivity lists", kMethod | kIrStage,
       cmdAnalyze},
      {"quantize", "Apply mixed precision per target reduction",
       kMethod | kApply | kTargets, cmdQuantize},
      {"evaluate", "Measure accuracy, logit SQNR, Q/DQ count and BOPs",
       kMethod | kTargets, cmdEvaluate},
      {"report", "Collect report.json and recovery_curve.csv", 0, cmdReport},
      {"pipeline", "Run every stage in order",
       kSynth | kCalib | kMethod | kIrStage | kApply | kTargets, cmdPipeline},
  };
  for (const auto &c : commands) {
    CLI::App *sub = app.add_subcommand(c.name, c.help);
    addOptions(sub, cfg, flags, c.options);
    sub->callback([&action, fn = c.fn] { action = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    finalize(cfg, flags);
    action(cfg);
  } catch (const Error &e) {
    std::cerr << "mixq: " << e.what() << "\n";
    return exitCodeFor(e.code());
  } catch (const std::exception &e) {
    std::cerr << "mixq: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
