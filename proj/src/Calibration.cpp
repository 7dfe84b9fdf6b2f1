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

#include "mixq/Calibration.h"
#include "mixq/Error.h"
#include "mixq/QuantMath.h"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mixq {

HistogramProfile::HistogramProfile(size_t numBins) : bins_(numBins, 0) {
  if (numBins == 0)
    throw Error(ErrorCode::InvalidArgument, "histogram needs at least 1 bin");
}

size_t HistogramProfile::binIndex(double v) const {
  if (max_ <= min_)
    return 0;
  double pos = (v - min_) / (max_ - min_) * double(bins_.size());
  if (pos <= 0.0)
    return 0;
  return std::min(bins_.size() - 1, size_t(pos));
}

void HistogramProfile::rebin(double newMin, double newMax) {
  std::vector<uint64_t> old(bins_.size(), 0);
  old.swap(bins_);
  double oldMin = min_, oldMax = max_;
  min_ = newMin;
  max_ = newMax;
  double width = (oldMax - oldMin) / double(old.size());
  for (size_t i = 0; i < old.size(); ++i) {
    if (!old[i])
      continue;
    double centre = oldMax > oldMin ? oldMin + (double(i) + 0.5) * width
                                    : oldMin;
    bins_[binIndex(centre)] += old[i];
  }
}

void HistogramProfile::update(std::span<const float> values) {
  if (values.empty())
    return;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (empty()) {
    min_ = *lo;
    max_ = *hi;
  } else if (*lo < min_ || *hi > max_) {
    rebin(std::min<double>(min_, *lo), std::max<double>(max_, *hi));
  }
  for (float v : values)
    ++bins_[binIndex(v)];
  total_ += values.size();
}

HistogramProfile HistogramProfile::merge(const HistogramProfile &a,
                                         const HistogramProfile &b) {
  if (a.bins_.size() != b.bins_.size())
    throw Error(ErrorCode::InvalidArgument,
                "cannot merge histograms with different bin counts");
  if (a.empty())
    return b;
  if (b.empty())
    return a;
  HistogramProfile out(a.bins_.size());
  out.min_ = std::min(a.min_, b.min_);
  out.max_ = std::max(a.max_, b.max_);
  out.total_ = a.total_ + b.total_;
  for (const auto *src : {&a, &b}) {
    HistogramProfile tmp = *src;
    tmp.rebin(out.min_, out.max_);
    for (size_t i = 0; i < out.bins_.size(); ++i)
      out.bins_[i] += tmp.bins_[i];
  }
  return out;
}

std::pair<double, double> HistogramProfile::percentileRange(double tail) const {
  if (empty())
    throw Error(ErrorCode::EmptyProfile, "histogram has no samples");
  if (tail <= 0.0 || max_ <= min_)
    return {min_, max_};
  double width = (max_ - min_) / double(bins_.size());
  double cut = tail * double(total_);
  double cum = 0.0;
  size_t lo = 0;
  for (; lo < bins_.size(); ++lo) {
    cum += double(bins_[lo]);
    if (cum > cut)
      break;
  }
  cum = 0.0;
  size_t hi = bins_.size() - 1;
  for (;; --hi) {
    cum += double(bins_[hi]);
    if (cum > cut || hi == 0)
      break;
  }
  if (hi < lo)
    std::swap(lo, hi);
  return {min_ + double(lo) * width, min_ + double(hi + 1) * width};
}

HistogramProfile HistogramProfile::fromParts(double min, double max,
                                             std::vector<uint64_t> bins,
                                             uint64_t total) {
  if (bins.empty() || min > max)
    throw Error(ErrorCode::InvalidArgument, "malformed histogram");
  uint64_t sum = 0;
  for (auto b : bins)
    sum += b;
  if (sum != total)
    throw Error(ErrorCode::InvalidArgument,
                "histogram total does not equal the bin sum");
  HistogramProfile p(bins.size());
  p.min_ = min;
  p.max_ = max;
  p.bins_ = std::move(bins);
  p.total_ = total;
  return p;
}

const HistogramProfile &CalibrationProfile::at(const std::string &id) const {
  auto it = nodes.find(id);
  if (it == nodes.end())
    throw Error(ErrorCode::MissingCalibration,
                "no calibration data for node '" + id + "'");
  return it->second;
}

CalibrationProfile profileActivations(Executor &exec, const Graph &graph,
                                      const std::vector<Tensor> &images,
                                      size_t numBins) {
  if (images.empty())
    throw Error(ErrorCode::EmptyCalibrationSet,
                "calibration needs at least one image");
  CalibrationProfile profile;
  const std::string inputId = graph.inputNode().id;
  const std::string outputId = graph.outputNode().id;
  for (const auto &img : images) {
    auto res = exec.runFp32(graph, img, /*capture=*/true);
    auto &inHist = profile.nodes.try_emplace(inputId, numBins).first->second;
    inHist.update(img.f32());
    for (const auto &[id, t] : res.trace.outputs) {
      if (id == outputId)
        continue;
      profile.nodes.try_emplace(id, numBins).first->second.update(t.f32());
    }
    ++profile.imageCount;
  }
  return profile;
}

QuantParams activationQParams(const HistogramProfile &profile, int bits,
                              RangeOptions options) {
  if (profile.empty())
    throw Error(ErrorCode::EmptyProfile, "cannot derive ranges from no data");
  if (bits < 2 || bits > 16)
    throw Error(ErrorCode::InvalidArgument, "unsupported activation width");
  QuantParams qp;
  qp.bitWidth = bits;
  qp.symmetric = false;
  if (profile.min() == profile.max()) {
    qp.step = 1.0;
    qp.zeroPoint = 0;
    return qp;
  }
  auto [lo, hi] = options.mode == RangeMode::Percentile
                      ? profile.percentileRange(options.tail)
                      : std::pair{profile.min(), profile.max()};
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  const double levels = std::ldexp(1.0, bits) - 1.0;
  qp.step = (hi - lo) / levels;
  int64_t zp = -(int64_t(1) << (bits - 1)) + roundHalfAway(-lo / qp.step);
  qp.zeroPoint = int32_t(std::clamp<int64_t>(zp, qp.qmin(), qp.qmax()));
  return qp;
}

QuantParams weightQParams(const Tensor &weights, int bits) {
  double maxAbs = 0.0;
  for (float v : weights.f32())
    maxAbs = std::max(maxAbs, std::fabs(double(v)));
  QuantParams qp;
  qp.bitWidth = bits;
  qp.symmetric = true;
  qp.zeroPoint = 0;
  qp.step = maxAbs > 0.0 ? maxAbs / double((int64_t(1) << (bits - 1)) - 1)
                         : 1.0;
  return qp;
}

std::string calibrationToJson(const CalibrationProfile &profile) {
  nlohmann::json j;
  j["image_count"] = profile.imageCount;
  auto &nodes = j["nodes"] = nlohmann::json::object();
  for (const auto &[id, h] : profile.nodes)
    nodes[id] = {{"min", h.min()},
                 {"max", h.max()},
                 {"bins", h.bins()},
                 {"total", h.total()}};
  return j.dump(1) + "\n";
}

void saveCalibration(const CalibrationProfile &profile,
                     const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << calibrationToJson(profile);
}

CalibrationProfile loadCalibration(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read calibration '" + path + "'");
  CalibrationProfile profile;
  try {
    auto j = nlohmann::json::parse(in);
    profile.imageCount = j.at("image_count").get<uint64_t>();
    for (const auto &[id, h] : j.at("nodes").items())
      profile.nodes.emplace(
          id, HistogramProfile::fromParts(
                  h.at("min").get<double>(), h.at("max").get<double>(),
                  h.at("bins").get<std::vector<uint64_t>>(),
                  h.at("total").get<uint64_t>()));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::IoError,
                "malformed calibration '" + path + "': " + e.what());
  }
  if (profile.imageCount < 1)
    throw Error(ErrorCode::EmptyCalibrationSet,
                "calibration '" + path + "' covers no images");
  return profile;
}

} // namespace mixq
