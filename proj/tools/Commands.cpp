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

#include "Commands.h"

#include "mixq/Bops.h"
#include "mixq/Calibration.h"
#include "mixq/Digest.h"
#include "mixq/Executor.h"
#include "mixq/Metrics.h"
#include "mixq/ModelIO.h"
#include "mixq/Quantizer.h"
#include "mixq/Synthetic.h"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixq::cli {

int exitCodeFor(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument:
  case ErrorCode::UnknownArch:
    return kExitUsage;
  case ErrorCode::IoError:
  case ErrorCode::FormatVersionMismatch:
  case ErrorCode::CorruptBlob:
  case ErrorCode::EmptyCalibrationSet:
  case ErrorCode::EmptyProfile:
  case ErrorCode::UnknownNodeInList:
  case ErrorCode::MissingCalibration:
  case ErrorCode::KeyMismatch:
  case ErrorCode::MissingLabels:
  case ErrorCode::EmptyImageBatch:
  case ErrorCode::IncompleteConfig:
  case ErrorCode::StageMismatch:
    return kExitData;
  default:
    return kExitInternal;
  }
}

std::string targetDirName(double target) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", target);
  return buf;
}

namespace {

/// Fixed artifact layout under the work directory.
struct Paths {
  fs::path root;

  explicit Paths(const std::string &work) : root(work) {}

  fs::path model() const { return root / "model"; }
  fs::path calibImages() const { return root / "calib_images.bin"; }
  fs::path evalImages() const { return root / "eval_images.bin"; }
  fs::path labels() const { return root / "labels.json"; }
  fs::path calib() const { return root / "calib.json"; }
  fs::path runConfig() const { return root / "run_config.json"; }
  fs::path method(SensitivityMethod m) const {
    return root / "methods" / methodName(m);
  }
  fs::path sensitivity(SensitivityMethod m) const {
    return method(m) / "sensitivity.txt";
  }
  fs::path target(SensitivityMethod m, double t) const {
    return method(m) / "targets" / targetDirName(t);
  }
};

void require(const fs::path &p, const char *producer) {
  if (!fs::exists(p))
    throw Error(ErrorCode::StageMismatch,
                "missing '" + p.string() + "'; run `mixq " + producer +
                    "` first");
}

void writeText(const fs::path &p, const std::string &text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text))
    throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
}

json readJson(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::IoError,
                "malformed JSON '" + p.string() + "': " + e.what());
  }
}

void writeJson(const fs::path &p, const json &j) {
  writeText(p, j.dump(1) + "\n");
}

/// Records the flags a stage ran with under its own key.
void recordStage(const Paths &paths, const std::string &stage,
                 const json &fields) {
  json cfg = fs::exists(paths.runConfig()) ? readJson(paths.runConfig())
                                           : json::object();
  cfg[stage] = fields;
  writeJson(paths.runConfig(), cfg);
}

json methodNames(const std::vector<SensitivityMethod> &methods) {
  json out = json::array();
  for (auto m : methods)
    out.push_back(methodName(m));
  return out;
}

struct Workspace {
  Graph model;
  CalibrationProfile calib;
};

Workspace loadAnalyzed(const Paths &paths) {
  require(paths.model() / "manifest.json", "synth");
  require(paths.calib(), "calibrate");
  return {loadModel(paths.model().string()),
          loadCalibration(paths.calib().string())};
}

/// The list for \p m, refusing one ranked against a different calibration.
std::vector<std::string> readSensitivity(const Paths &paths,
                                         SensitivityMethod m,
                                         const CalibrationProfile &calib) {
  require(paths.sensitivity(m), "analyze");
  json info = readJson(paths.method(m) / "analysis.json");
  if (info.value("calibration_digest", "") !=
      sha256Hex(calibrationToJson(calib)))
    throw Error(ErrorCode::StageMismatch,
                std::string(methodName(m)) +
                    " list predates calib.json; rerun `mixq analyze`");
  return loadNodeList(paths.sensitivity(m).string());
}

/// Concatenated logits of every image, for a pooled SQNR.
std::vector<float> collectLogits(Executor &exec, const Graph &g,
                                 const std::vector<Tensor> &images,
                                 bool quantized,
                                 std::vector<int64_t> *predictions) {
  std::string logits = logitNodeId(g);
  std::vector<float> out;
  for (const auto &img : images) {
    auto r = quantized ? exec.runQuantized(g, img, true)
                       : exec.runFp32(g, img, true);
    auto v = r.trace.outputs.at(logits).f32();
    out.insert(out.end(), v.begin(), v.end());
    if (predictions)
      predictions->push_back(argmax(r.output));
  }
  return out;
}

double accuracyOf(const std::vector<int64_t> &pred,
                  const std::vector<int64_t> &labels) {
  if (pred.size() != labels.size() || labels.empty())
    throw Error(ErrorCode::MissingLabels,
                "label count does not match the evaluation images");
  size_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    correct += pred[i] == labels[i];
  return double(correct) / double(labels.size());
}

} // namespace

void cmdSynth(const RunConfig &cfg) {
  Paths paths(cfg.work);
  Graph g = genSynthetic(cfg.arch, cfg.seed);
  if (!cfg.pathology.empty())
    g = injectWeightPathology(g, cfg.pathology, cfg.pathologyFactor);
  auto calibImages = genImages(g, cfg.numCalib, cfg.seed + 1);
  auto evalImages = genImages(g, cfg.numEval, cfg.seed + 2);
  Executor exec;
  auto labels = teacherLabels(exec, g, evalImages);

  fs::create_directories(paths.root);
  saveModel(g, paths.model().string());
  saveImages(calibImages, paths.calibImages().string());
  saveImages(evalImages, paths.evalImages().string());
  saveLabels(labels, paths.labels().string());
  recordStage(paths, "synth",
              {{"arch", cfg.arch},
               {"seed", cfg.seed},
               {"num_calib", cfg.numCalib},
               {"num_eval", cfg.numEval},
               {"pathology", cfg.pathology},
               {"pathology_factor", cfg.pathologyFactor}});
  std::cout << "synth: " << cfg.arch << " (" << g.size() << " nodes) -> "
            << paths.root.string() << "\n";
}

void cmdCalibrate(const RunConfig &cfg) {
  Paths paths(cfg.work);
  require(paths.model() / "manifest.json", "synth");
  require(paths.calibImages(), "synth");
  Graph g = loadModel(paths.model().string());
  auto images = loadImages(paths.calibImages().string());
  Executor exec;
  auto profile = profileActivations(exec, g, images, cfg.bins);
  saveCalibration(profile, paths.calib().string());
  recordStage(paths, "calibrate", {{"bins", cfg.bins}});
  std::cout << "calibrate: " << profile.nodes.size() << " activations over "
            << images.size() << " images\n";
}

void cmdAnalyze(const RunConfig &cfg) {
  Paths paths(cfg.work);
  auto ws = loadAnalyzed(paths);
  Graph g = lowerToStage(ws.model, cfg.irStage);
  Executor exec;
  for (auto m : cfg.methods) {
    SensitivityList list;
    json info;
    exec.resetPassCount();
    if (m == SensitivityMethod::QuantuneV2) {
      require(paths.calibImages(), "synth");
      auto images = loadImages(paths.calibImages().string());
      SensitivityOptions opts;
      opts.mixup = cfg.mixup;
      auto result = generateSensitivityList(exec, g, ws.calib, images, opts);
      list = std::move(result.list);
      fs::create_directories(paths.method(m));
      saveMetricsCsv(result.samples,
                     (paths.method(m) / "metrics.csv").string());
      info["images"] = images.size();
    } else {
      std::vector<Tensor> images;
      std::vector<int64_t> labels;
      if (m == SensitivityMethod::Top1) {
        require(paths.evalImages(), "synth");
        require(paths.labels(), "synth");
        images = loadImages(paths.evalImages().string());
        labels = loadLabels(paths.labels().string());
        size_t n = std::min(cfg.top1Images, images.size());
        images.resize(n);
        labels.resize(std::min(n, labels.size()));
      }
      list = baselineOrder(exec, g, m, ws.calib, images, &labels);
      info["images"] = images.size();
    }
    list.irStage = cfg.irStage;
    fs::create_directories(paths.method(m));
    saveNodeList(list.ids, paths.sensitivity(m).string());
    info["method"] = methodName(m);
    info["ir_stage"] = irStageName(list.irStage);
    info["calibration_digest"] = list.calibrationDigest;
    info["inference_passes"] = exec.passCount();
    writeJson(paths.method(m) / "analysis.json", info);
    std::cout << "analyze: " << methodName(m) << " ranked " << list.ids.size()
              << " layers in " << exec.passCount() << " passes\n";
  }
  recordStage(paths, "analyze",
              {{"methods", methodNames(cfg.methods)},
               {"ir_stage", irStageName(cfg.irStage)},
               {"mixup_weights", {cfg.mixup.weight, cfg.mixup.activation}},
               {"top1_images", cfg.top1Images}});
}

void cmdQuantize(const RunConfig &cfg) {
  Paths paths(cfg.work);
  auto ws = loadAnalyzed(paths);
  Graph g = lowerToStage(ws.model, cfg.applyStage);
  for (auto m : cfg.methods) {
    auto list = readSensitivity(paths, m, ws.calib);
    for (double t : cfg.targets) {
      auto keep = selectDequantSet(list, g, t);
      Graph q = applyMixedPrecision(g, keep, ws.calib);
      fs::path dir = paths.target(m, t);
      fs::create_directories(dir);
      saveNodeList(keep, (dir / "dequant.txt").string());
      savePrecisionConfig(configForKeepList(g, keep),
                          (dir / "precision.json").string());
      saveModel(q, (dir / "model").string());
      std::cout << "quantize: " << methodName(m) << " @" << targetDirName(t)
                << "% keeps " << keep.size() << " groups, " << countQdq(q)
                << " Q/DQ nodes\n";
    }
  }
  json targets = cfg.targets;
  recordStage(paths, "quantize",
              {{"methods", methodNames(cfg.methods)},
               {"apply_stage", irStageName(cfg.applyStage)},
               {"target_reductions", targets}});
}

void cmdEvaluate(const RunConfig &cfg) {
  Paths paths(cfg.work);
  require(paths.model() / "manifest.json", "synth");
  require(paths.evalImages(), "synth");
  require(paths.labels(), "synth");
  Graph ref = loadModel(paths.model().string());
  auto images = loadImages(paths.evalImages().string());
  auto labels = loadLabels(paths.labels().string());
  Executor exec;
  std::vector<int64_t> refPred;
  auto refLogits = collectLogits(exec, ref, images, false, &refPred);
  double refAccuracy = accuracyOf(refPred, labels);

  for (auto m : cfg.methods) {
    for (double t : cfg.targets) {
      fs::path dir = paths.target(m, t);
      require(dir / "model" / "manifest.json", "quantize");
      Graph q = loadModel((dir / "model").string());
      std::vector<int64_t> pred;
      auto logits = collectLogits(exec, q, images, true, &pred);
      auto bops = computeBops(q, precisionConfigOf(q));
      json e;
      e["method"] = methodName(m);
      e["target_reduction"] = t;
      e["accuracy"] = accuracyOf(pred, labels);
      e["fp32_accuracy"] = refAccuracy;
      e["logit_sqnr_db"] = sqnr(refLogits, logits);
      e["qdq_count"] = countQdq(q);
      e["bops"] = {{"fp32", bops.bopsFp32},
                   {"int8", bops.bopsInt8},
                   {"config", bops.bopsConfig},
                   {"literal_reduction_pct", bops.literalReductionPct},
                   {"normalized_reduction_pct", bops.normalizedReductionPct}};
      writeJson(dir / "eval.json", e);
      std::cout << "evaluate: " << methodName(m) << " @" << targetDirName(t)
                << "% accuracy " << e["accuracy"].get<double>()
                << ", logit SQNR " << e["logit_sqnr_db"].get<double>()
                << " dB\n";
    }
  }
}

void cmdReport(const RunConfig &cfg) {
  Paths paths(cfg.work);
  require(paths.model() / "manifest.json", "synth");
  require(paths.calib(), "calibrate");

  json results = json::array();
  std::string csv = "method,target_reduction,normalized_reduction_pct,"
                    "literal_reduction_pct,accuracy,logit_sqnr_db,qdq_count\n";
  for (auto m : {SensitivityMethod::QuantuneV2, SensitivityMethod::InOrder,
                 SensitivityMethod::WeightSqnr, SensitivityMethod::Top1}) {
    fs::path targetsDir = paths.method(m) / "targets";
    if (!fs::exists(targetsDir))
      continue;
    std::vector<std::pair<double, fs::path>> evals;
    for (const auto &entry : fs::directory_iterator(targetsDir))
      if (fs::exists(entry.path() / "eval.json"))
        evals.emplace_back(std::stod(entry.path().filename().string()),
                           entry.path());
    std::sort(evals.begin(), evals.end());
    for (const auto &[t, dir] : evals) {
      json e = readJson(dir / "eval.json");
      e["dequantized"] = loadNodeList((dir / "dequant.txt").string());
      e["digests"] = {
          {"sensitivity_list", sha256File(paths.sensitivity(m).string())},
          {"dequant_list", sha256File((dir / "dequant.txt").string())},
          {"quantized_manifest",
           sha256File((dir / "model" / "manifest.json").string())},
          {"quantized_weights",
           sha256File((dir / "model" / "weights.bin").string())}};
      char row[256];
      std::snprintf(row, sizeof(row), "%s,%g,%.6f,%.6f,%.6f,%.6f,%d\n",
                    methodName(m), t,
                    e["bops"]["normalized_reduction_pct"].get<double>(),
                    e["bops"]["literal_reduction_pct"].get<double>(),
                    e["accuracy"].get<double>(),
                    e["logit_sqnr_db"].get<double>(),
                    e["qdq_count"].get<int>());
      csv += row;
      results.push_back(std::move(e));
    }
  }
  if (results.empty())
    throw Error(ErrorCode::StageMismatch,
                "nothing evaluated yet; run `mixq evaluate` first");

  json report;
  report["run_config"] = fs::exists(paths.runConfig())
                             ? readJson(paths.runConfig())
                             : json::object();
  report["digests"] = {
      {"model_manifest",
       sha256File((paths.model() / "manifest.json").string())},
      {"model_weights", sha256File((paths.model() / "weights.bin").string())},
      {"calibration", sha256File(paths.calib().string())},
      {"calib_images", sha256File(paths.calibImages().string())},
      {"eval_images", sha256File(paths.evalImages().string())},
      {"labels", sha256File(paths.labels().string())}};
  report["results"] = results;
  writeJson(paths.root / "report.json", report);
  writeText(paths.root / "recovery_curve.csv", csv);
  std::cout << "report: " << results.size() << " sweep points -> "
            << (paths.root / "report.json").string() << "\n";
}

void cmdPipeline(const RunConfig &cfg) {
  cmdSynth(cfg);
  cmdCalibrate(cfg);
  cmdAnalyze(cfg);
  cmdQuantize(cfg);
  cmdEvaluate(cfg);
  cmdReport(cfg);
}

} // namespace mixq::cli
