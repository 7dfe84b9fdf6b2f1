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
#ifndef MIXQ_TOOLS_COMMANDS_H
#define MIXQ_TOOLS_COMMANDS_H

#include "mixq/Error.h"
#include "mixq/Fusion.h"
#include "mixq/Sensitivity.h"

#include <cstdint>
#include <string>
#include <vector>

namespace mixq::cli {

/// Everything a pipeline stage reads from the command line. Each stage
/// records the fields it used in `<work>/run_config.json`.
struct RunConfig {
  std::string work{"mixq_work"};
  std::string arch{"mininet"};
  uint64_t seed{42};
  size_t numCalib{32};
  size_t numEval{64};
  /// Node whose weights get a heavy tail; empty for none.
  std::string pathology;
  double pathologyFactor{50.0};
  size_t bins{kDefaultHistogramBins};
  std::vector<SensitivityMethod> methods{SensitivityMethod::QuantuneV2};
  IrStage irStage{IrStage::Unfused};
  IrStage applyStage{IrStage::Fused};
  std::vector<double> targets{40.0};
  MixupWeights mixup{};
  size_t top1Images{50};
};

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitInternal = 4,
};

/// Maps a library error to the exit code reported for it.
int exitCodeFor(ErrorCode code);

/// Model, calibration/eval images and teacher labels.
void cmdSynth(const RunConfig &cfg);
/// calib.json from the calibration images.
void cmdCalibrate(const RunConfig &cfg);
/// sensitivity.txt (and metrics.csv for quantune_v2) per method.
void cmdAnalyze(const RunConfig &cfg);
/// Dequantized list, precision config and int8 model per method and target.
void cmdQuantize(const RunConfig &cfg);
/// eval.json per method and target.
void cmdEvaluate(const RunConfig &cfg);
/// report.json and recovery_curve.csv over everything evaluated.
void cmdReport(const RunConfig &cfg);
/// All of the above in order.
void cmdPipeline(const RunConfig &cfg);

/// Directory-name form of a target reduction ("40", "66.7").
std::string targetDirName(double target);

} // namespace mixq::cli

#endif // MIXQ_TOOLS_COMMANDS_H
