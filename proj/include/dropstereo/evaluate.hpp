#pragma once

// Error statistics between a predicted and a true float map (height field or
// depth map), normalized by the drop diameter or the scene depth.

#include "dropstereo/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dropstereo {

enum class Normalization { diameter, depth };

struct ErrorReport {
  long compared = 0;  // pixels finite in both maps
  long missing = 0;   // finite in the truth only
  double rms = 0.0;
  double median_abs = 0.0;
  double max_abs = 0.0;
  double scale = 0.0;  // normalizer
  double rms_normalized = 0.0;
  double median_normalized = 0.0;
};

// Diameter: equivalent diameter of the finite truth region. Depth: median
// finite truth value.
inline ErrorReport compare_maps(const Grid<float>& pred, const Grid<float>& truth,
                                Normalization norm) {
  if (pred.width() != truth.width() || pred.height() != truth.height())
    throw DomainError("compare_maps: map sizes differ");
  ErrorReport r;
  std::vector<double> err, tv;
  for (int i = 0; i < truth.height(); ++i)
    for (int j = 0; j < truth.width(); ++j) {
      const float t = truth(i, j);
      if (!std::isfinite(t)) continue;
      tv.push_back(t);
      const float p = pred(i, j);
      if (!std::isfinite(p)) {
        ++r.missing;
        continue;
      }
      err.push_back(std::abs(static_cast<double>(p) - t));
    }
  if (tv.empty()) throw EmptyOutputError("compare_maps: truth has no finite pixels");
  if (err.empty()) throw EmptyOutputError("compare_maps: no pixel is finite in both maps");
  r.compared = static_cast<long>(err.size());
  double ss = 0.0;
  for (double e : err) {
    ss += e * e;
    r.max_abs = std::max(r.max_abs, e);
  }
  r.rms = std::sqrt(ss / static_cast<double>(err.size()));
  auto median = [](std::vector<double> v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    const double hi = v[m];
    if (v.size() % 2) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
  };
  r.median_abs = median(err);
  r.scale = norm == Normalization::diameter
                ? 2.0 * std::sqrt(static_cast<double>(tv.size()) / M_PI)
                : median(tv);
  if (!(r.scale > 0.0)) throw DomainError("compare_maps: normalizer is not positive");
  r.rms_normalized = r.rms / r.scale;
  r.median_normalized = r.median_abs / r.scale;
  return r;
}

}  // namespace dropstereo
