#pragma once

// Triangle splatting onto a regular raster. A warped pixel grid is cut into
// triangles whose vertices carry a target position and a payload; every
// target pixel centre inside a triangle receives the barycentric blend of the
// payloads. Used wherever a forward map has to be inverted on a grid.

#include <algorithm>
#include <array>
#include <cmath>

namespace dropstereo {

template <int N>
struct SplatVertex {
  double x = 0.0, y = 0.0;  // target column, row
  std::array<double, N> payload{};
};

// Returns the sign of the triangle's signed area in target space (+1, -1, or
// 0 when degenerate; degenerate triangles emit nothing). `emit(row, col,
// payload)` is called for every covered pixel centre.
template <int N, class Emit>
int splat_triangle(const SplatVertex<N>& a, const SplatVertex<N>& b, const SplatVertex<N>& c,
                   int width, int height, Emit&& emit) {
  const double area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  if (std::abs(area) < 1e-12) return 0;
  const int c0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x, b.x, c.x}) - 1e-9)));
  const int c1 = std::min(width - 1, static_cast<int>(std::floor(std::max({a.x, b.x, c.x}) + 1e-9)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y, b.y, c.y}) - 1e-9)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(std::max({a.y, b.y, c.y}) + 1e-9)));
  const double inv = 1.0 / area;
  constexpr double eps = 1e-9;
  for (int r = r0; r <= r1; ++r)
    for (int col = c0; col <= c1; ++col) {
      const double px = col, py = r;
      const double wa = ((b.x - px) * (c.y - py) - (c.x - px) * (b.y - py)) * inv;
      const double wb = ((c.x - px) * (a.y - py) - (a.x - px) * (c.y - py)) * inv;
      const double wc = 1.0 - wa - wb;
      if (wa < -eps || wb < -eps || wc < -eps) continue;
      std::array<double, N> p{};
      for (int k = 0; k < N; ++k) p[k] = wa * a.payload[k] + wb * b.payload[k] + wc * c.payload[k];
      emit(r, col, p);
    }
  return area > 0 ? 1 : -1;
}

// Splits every 2x2 block of a source grid into two triangles over the valid
// corners (a block with exactly three valid corners yields one triangle).
// `vertex(i, j)` returns an optional SplatVertex for source pixel (i, j).
// Returns {positive, negative} triangle counts.
template <int N, class VertexFn, class Emit>
std::array<long, 2> splat_grid(int row0, int col0, int rows, int cols, int width, int height,
                               VertexFn&& vertex, Emit&& emit) {
  std::array<long, 2> signs{0, 0};
  auto tri = [&](const auto& a, const auto& b, const auto& c) {
    const int s = splat_triangle<N>(*a, *b, *c, width, height, emit);
    if (s > 0) ++signs[0];
    if (s < 0) ++signs[1];
  };
  for (int i = row0; i + 1 < row0 + rows; ++i)
    for (int j = col0; j + 1 < col0 + cols; ++j) {
      const auto p00 = vertex(i, j), p01 = vertex(i, j + 1);
      const auto p10 = vertex(i + 1, j), p11 = vertex(i + 1, j + 1);
      const int n = !!p00 + !!p01 + !!p10 + !!p11;
      if (n < 3) continue;
      if (n == 4) {
        tri(p00, p01, p10);
        tri(p11, p10, p01);
      } else if (!p00) {
        tri(p11, p10, p01);
      } else if (!p11) {
        tri(p00, p01, p10);
      } else if (!p01) {
        tri(p00, p11, p10);
      } else {
        tri(p00, p01, p11);
      }
    }
  return signs;
}

}  // namespace dropstereo
