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

#include "mixq/Metrics.h"
#include "mixq/Error.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace mixq {

namespace {
void checkSameShape(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw Error(ErrorCode::ShapeMismatch, "metric operands " +
                                              shapeToString(a.shape()) +
                                              " and " +
                                              shapeToString(b.shape()));
}

void checkSameSize(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::ShapeMismatch, "metric operands differ in size");
}
} // namespace

double sqnr(std::span<const float> reference, std::span<const float> test) {
  checkSameSize(reference, test);
  double signal = 0.0, noise = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    double r = reference[i];
    double e = r - double(test[i]);
    signal += r * r;
    noise += e * e;
  }
  if (noise == 0.0)
    return kSqnrCeilingDb;
  if (signal == 0.0)
    return kSqnrFloorDb;
  // Both powers share the 1/n factor, which cancels in the ratio.
  double db = 10.0 * std::log10(signal / noise);
  return std::clamp(db, kSqnrFloorDb, kSqnrCeilingDb);
}

double sqnr(const Tensor &reference, const Tensor &test) {
  checkSameShape(reference, test);
  return sqnr(reference.f32(), test.f32());
}

double mse(std::span<const float> reference, std::span<const float> test) {
  checkSameSize(reference, test);
  if (reference.empty())
    return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    double e = double(reference[i]) - double(test[i]);
    acc += e * e;
  }
  return acc / double(reference.size());
}

double mse(const Tensor &reference, const Tensor &test) {
  checkSameShape(reference, test);
  return mse(reference.f32(), test.f32());
}

double cosineSimilarity(const Tensor &a, const Tensor &b) {
  checkSameShape(a, b);
  auto x = a.f32(), y = b.f32();
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    dot += double(x[i]) * double(y[i]);
    nx += double(x[i]) * double(x[i]);
    ny += double(y[i]) * double(y[i]);
  }
  if (nx == 0.0 || ny == 0.0)
    return 0.0;
  return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

double klDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty())
    throw Error(ErrorCode::ShapeMismatch, "distributions differ in length");
  auto normalize = [](std::span<const double> v) {
    double sum = 0.0;
    for (double x : v)
      sum += x + kKlSmoothing;
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i)
      out[i] = (v[i] + kKlSmoothing) / sum;
    return out;
  };
  auto pn = normalize(p), qn = normalize(q);
  double kl = 0.0;
  for (size_t i = 0; i < pn.size(); ++i)
    kl += pn[i] * std::log(pn[i] / qn[i]);
  return std::max(kl, 0.0);
}

double klDivergence(const Tensor &reference, const Tensor &test, size_t bins) {
  checkSameShape(reference, test);
  if (bins == 0)
    throw Error(ErrorCode::InvalidArgument, "KL needs at least one bin");
  auto r = reference.f32(), t = test.f32();
  if (r.empty())
    return 0.0;
  auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  double mn = *lo, mx = *hi;
  auto binOf = [&](double v) -> size_t {
    if (mx <= mn)
      return v < mn ? 0 : (v > mn ? bins - 1 : 0);
    double pos = (v - mn) / (mx - mn) * double(bins);
    if (pos <= 0.0)
      return 0;
    return std::min(bins - 1, size_t(pos));
  };
  std::vector<double> p(bins, 0.0), q(bins, 0.0);
  for (float v : r)
    p[binOf(v)] += 1.0;
  for (float v : t)
    q[binOf(v)] += 1.0;
  return klDivergence(p, q);
}

std::vector<double>
sqnrDelta(const std::vector<std::pair<int64_t, double>> &sqnrByLayer) {
  std::vector<double> deltas(sqnrByLayer.size(), 0.0);
  for (size_t n = 1; n < sqnrByLayer.size(); ++n) {
    const auto &[li, si] = sqnrByLayer[n];
    const auto &[lp, sp] = sqnrByLayer[n - 1];
    if (li <= lp)
      throw Error(ErrorCode::NonMonotonicIndices,
                  "layer indices must strictly increase (" +
                      std::to_string(lp) + " then " + std::to_string(li) + ")");
    deltas[n] = (si - sp) / double(li - lp);
  }
  return deltas;
}

void saveMetricsCsv(const std::vector<MetricSample> &samples,
                    const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "id,L_n,weight_sqnr,act_sqnr,weight_delta,act_delta,act_mse,"
         "weight_mse,cosine,kl\n";
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto &s : samples)
    out << s.id << "," << s.layerIndex << "," << num(s.weightSqnr) << ","
        << num(s.activationSqnr) << "," << num(s.weightDelta) << ","
        << num(s.activationDelta) << "," << num(s.activationMse) << ","
        << num(s.weightMse) << "," << (s.cosine ? num(*s.cosine) : "") << ","
        << (s.kl ? num(*s.kl) : "") << "\n";
}

} // namespace mixq
