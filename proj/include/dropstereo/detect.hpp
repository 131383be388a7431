#pragma once

// Drop detection. Drops are in focus against a blurred background, so they
// stand out in the gradient magnitude: Sobel edges thinned by non-maximum
// suppression, percentile hysteresis and closing. Regions enclosed by edges
// are then kept without the edges themselves, which cuts off background
// clutter touching a drop outline, and each region is grown back over its
// outline. Connected components are filtered by solidity and equivalent
// diameter.

#include "dropstereo/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace dropstereo {

struct DetectParams {
  double low_percentile = 70.0;
  double high_percentile = 90.0;
  int closing_radius = 5;
  int opening_radius = 0;  // 0 disables the opening
  int outline_width = 2;   // growth of each region over its outline, pixels
  double min_solidity = 0.85;
  double min_diameter = 300.0;  // equivalent diameter, pixels

  void validate() const {
    if (!(low_percentile >= 0.0 && low_percentile <= high_percentile && high_percentile <= 100.0))
      throw DomainError("DetectParams: need 0 <= low <= high <= 100 percentiles");
    if (closing_radius < 0 || opening_radius < 0 || outline_width < 0)
      throw DomainError("DetectParams: radii must be non-negative");
    if (!(min_solidity >= 0.0 && min_solidity <= 1.0))
      throw DomainError("DetectParams: min_solidity must lie in [0, 1]");
    if (!(min_diameter >= 0.0)) throw DomainError("DetectParams: min_diameter must be >= 0");
  }
};

using Binary = Grid<std::uint8_t>;

struct SobelField {
  Grid<double> gx, gy, mag;
};

inline SobelField sobel(const RasterGray& img) {
  const int w = img.width(), h = img.height();
  SobelField s{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0)};
  auto at = [&](int i, int j) {
    return img(std::clamp(i, 0, h - 1), std::clamp(j, 0, w - 1));
  };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double gx = (at(i - 1, j + 1) + 2 * at(i, j + 1) + at(i + 1, j + 1)) -
                        (at(i - 1, j - 1) + 2 * at(i, j - 1) + at(i + 1, j - 1));
      const double gy = (at(i + 1, j - 1) + 2 * at(i + 1, j) + at(i + 1, j + 1)) -
                        (at(i - 1, j - 1) + 2 * at(i - 1, j) + at(i - 1, j + 1));
      s.gx(i, j) = gx;
      s.gy(i, j) = gy;
      s.mag(i, j) = std::hypot(gx, gy);
    }
  return s;
}

inline Grid<double> sobel_magnitude(const RasterGray& img) { return sobel(img).mag; }

// Keeps pixels whose magnitude is a local maximum across the edge (gradient
// direction quantised to 45 degrees); others are zeroed.
inline Grid<double> non_max_suppression(const SobelField& s) {
  const int w = s.mag.width(), h = s.mag.height();
  Grid<double> out(w, h, 0.0);
  auto m = [&](int i, int j) { return s.mag.in_bounds(i, j) ? s.mag(i, j) : 0.0; };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double v = s.mag(i, j);
      if (v == 0.0) continue;
      double ang = std::atan2(s.gy(i, j), s.gx(i, j)) * 180.0 / M_PI;
      if (ang < 0) ang += 180.0;
      int di = 0, dj = 1;
      if (ang >= 22.5 && ang < 67.5) {
        di = 1;
        dj = 1;
      } else if (ang >= 67.5 && ang < 112.5) {
        di = 1;
        dj = 0;
      } else if (ang >= 112.5 && ang < 157.5) {
        di = 1;
        dj = -1;
      }
      if (v >= m(i + di, j + dj) && v >= m(i - di, j - dj)) out(i, j) = v;
    }
  return out;
}

// Nearest-rank percentile, p in [0, 100].
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw DomainError("percentile: empty input");
  const std::size_t k = std::min(
      v.size() - 1, static_cast<std::size_t>(std::ceil(p / 100.0 * v.size())) - (p > 0 ? 1 : 0));
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

// Pixels >= low connected (8-neighbourhood) to a pixel >= high. Zero
// magnitude never counts as an edge.
inline Binary hysteresis(const Grid<double>& mag, double low, double high) {
  const int w = mag.width(), h = mag.height();
  Binary out(w, h, 0);
  std::vector<std::pair<int, int>> stack;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (mag(i, j) > 0.0 && mag(i, j) >= high) {
        out(i, j) = 1;
        stack.emplace_back(i, j);
      }
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        const int a = i + di, b = j + dj;
        if (!mag.in_bounds(a, b) || out(a, b)) continue;
        if (mag(a, b) > 0.0 && mag(a, b) >= low) {
          out(a, b) = 1;
          stack.emplace_back(a, b);
        }
      }
  }
  return out;
}

inline std::vector<std::array<int, 2>> disk_offsets(int r) {
  std::vector<std::array<int, 2>> d;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j)
      if (i * i + j * j <= r * r) d.push_back({i, j});
  return d;
}

// Outside the image counts as background for dilation and as foreground for
// erosion, so a closing does not eat shapes touching the border.
inline Binary dilate(const Binary& b, int r) {
  if (r == 0) return b;
  const auto se = disk_offsets(r);
  Binary out(b.width(), b.height(), 0);
  for (int i = 0; i < b.height(); ++i)
    for (int j = 0; j < b.width(); ++j) {
      if (!b(i, j)) continue;
      for (const auto& o : se)
        if (out.in_bounds(i + o[0], j + o[1])) out(i + o[0], j + o[1]) = 1;
    }
  return out;
}

inline Binary erode(const Binary& b, int r) {
  if (r == 0) return b;
  const auto se = disk_offsets(r);
  Binary out(b.width(), b.height(), 0);
  for (int i = 0; i < b.height(); ++i)
    for (int j = 0; j < b.width(); ++j) {
      bool all = true;
      for (const auto& o : se) {
        const int a = i + o[0], c = j + o[1];
        if (b.in_bounds(a, c) && !b(a, c)) {
          all = false;
          break;
        }
      }
      out(i, j) = all ? 1 : 0;
    }
  return out;
}

inline Binary close_binary(const Binary& b, int r) { return erode(dilate(b, r), r); }

inline Binary open_binary(const Binary& b, int r) {
  if (r == 0) return b;
  // Opening treats outside as background on both passes.
  const auto se = disk_offsets(r);
  Binary er(b.width(), b.height(), 0);
  for (int i = 0; i < b.height(); ++i)
    for (int j = 0; j < b.width(); ++j) {
      bool all = true;
      for (const auto& o : se) {
        const int a = i + o[0], c = j + o[1];
        if (!b.in_bounds(a, c) || !b(a, c)) {
          all = false;
          break;
        }
      }
      er(i, j) = all ? 1 : 0;
    }
  return dilate(er, r);
}

// Background pixels not 4-connected to the image border become foreground.
inline Binary fill_holes(const Binary& b) {
  const int w = b.width(), h = b.height();
  Binary outside(w, h, 0);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int i, int j) {
    if (!b(i, j) && !outside(i, j)) {
      outside(i, j) = 1;
      stack.emplace_back(i, j);
    }
  };
  for (int j = 0; j < w; ++j) {
    seed(0, j);
    seed(h - 1, j);
  }
  for (int i = 0; i < h; ++i) {
    seed(i, 0);
    seed(i, w - 1);
  }
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], c = j + dj[k];
      if (b.in_bounds(a, c)) seed(a, c);
    }
  }
  Binary out(w, h, 0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) out(i, j) = outside(i, j) ? 0 : 1;
  return out;
}

// 4-connected components in row-major order of their first pixel.
inline std::vector<Binary> components(const Binary& b) {
  const int w = b.width(), h = b.height();
  Grid<int> label(w, h, -1);
  std::vector<Binary> out;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (!b(i, j) || label(i, j) >= 0) continue;
      const int id = static_cast<int>(out.size());
      Binary comp(w, h, 0);
      std::vector<std::pair<int, int>> stack{{i, j}};
      label(i, j) = id;
      while (!stack.empty()) {
        auto [a, c] = stack.back();
        stack.pop_back();
        comp(a, c) = 1;
        const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int x = a + di[k], y = c + dj[k];
          if (b.in_bounds(x, y) && b(x, y) && label(x, y) < 0) {
            label(x, y) = id;
            stack.emplace_back(x, y);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  return out;
}

// Area over convex-hull area, with pixels as unit squares.
inline double solidity(const Binary& b) {
  std::vector<std::array<long, 2>> pts;
  long area = 0;
  for (int i = 0; i < b.height(); ++i)
    for (int j = 0; j < b.width(); ++j) {
      if (!b(i, j)) continue;
      ++area;
      // Only corners on a row's outermost pixels can be hull vertices.
      const bool left = j == 0 || !b(i, j - 1), right = j + 1 == b.width() || !b(i, j + 1);
      if (left) {
        pts.push_back({j, i});
        pts.push_back({j, i + 1});
      }
      if (right) {
        pts.push_back({j + 1, i});
        pts.push_back({j + 1, i + 1});
      }
    }
  if (area == 0) return 0.0;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto cross = [](const auto& o, const auto& a, const auto& c) {
    return (a[0] - o[0]) * (c[1] - o[1]) - (a[1] - o[1]) * (c[0] - o[0]);
  };
  std::vector<std::array<long, 2>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  long twice = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % hull.size()];
    twice += p[0] * q[1] - q[0] * p[1];
  }
  return static_cast<double>(area) / (0.5 * std::abs(static_cast<double>(twice)));
}

inline std::vector<DropMask> detect_drops(const RasterGray& image, const DetectParams& params = {}) {
  params.validate();
  const auto field = sobel(image);
  const double lo = percentile(field.mag.data(), params.low_percentile);
  const double hi = percentile(field.mag.data(), params.high_percentile);
  Binary b = hysteresis(non_max_suppression(field), lo, hi);
  b = close_binary(b, params.closing_radius);
  const Binary filled = open_binary(fill_holes(b), params.opening_radius);
  Binary inside(b.width(), b.height(), 0);
  for (std::size_t k = 0; k < inside.data().size(); ++k)
    inside.data()[k] = filled.data()[k] && !b.data()[k] ? 1 : 0;
  // Edges strictly inside a drop become holes of its region.
  inside = open_binary(fill_holes(inside), params.opening_radius);

  auto accept = [&](const Binary& comp) {
    long area = 0;
    for (auto v : comp.data()) area += v;
    const double diameter = 2.0 * std::sqrt(static_cast<double>(area) / M_PI);
    return diameter >= params.min_diameter && solidity(comp) >= params.min_solidity;
  };
  std::vector<Binary> found;
  for (const auto& region : components(inside)) {
    Binary comp = dilate(region, params.outline_width);
    if (accept(comp)) found.push_back(std::move(comp));
  }
  // Small drops can be solid edge after closing and enclose nothing; their
  // filled component stands in.
  for (const auto& comp : components(filled)) {
    bool covered = false;
    for (const auto& f : found)
      for (std::size_t k = 0; k < comp.data().size() && !covered; ++k)
        covered = comp.data()[k] && f.data()[k];
    if (!covered && accept(comp)) found.push_back(comp);
  }

  std::vector<DropMask> out;
  for (const auto& comp : found) out.push_back(DropMask::from_membership(comp));
  std::sort(out.begin(), out.end(), [](const DropMask& a, const DropMask& c) {
    return std::pair(a.box().row0, a.box().col0) < std::pair(c.box().row0, c.box().col0);
  });
  return out;
}

}  // namespace dropstereo
