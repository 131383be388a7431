#pragma once

// Multi-view depth from several drops in one image. Correspondences are found
// between angular-dewarped drop images (ZNCC block matching), mapped back to
// warped pixels, traced to outbound rays and triangulated as the point
// closest to all rays in the least-squares sense.

#include "dropstereo/core.hpp"
#include "dropstereo/dewarp.hpp"
#include "dropstereo/raytrace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

namespace dropstereo {

class InsufficientDropsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Correspondence {
  int drop_a = 0, drop_b = 0;
  double i_a = 0, j_a = 0;  // warped pixel in drop a
  double i_b = 0, j_b = 0;  // warped pixel in drop b
  double score = 0;

  bool operator==(const Correspondence&) const = default;
};

// A match between two dewarped images, in output-pixel coordinates.
struct DewarpMatch {
  double r_a = 0, c_a = 0, r_b = 0, c_b = 0;
  double score = 0;
};

struct BlockMatchParams {
  int window = 11;  // odd side length
  int search_radius = 24;
  double min_score = 0.7;
  double lr_tolerance = 1.0;
  int stride = 4;                  // grid spacing of query pixels in image a
  std::array<int, 2> prior{0, 0};  // expected (row, col) offset of b relative to a
  // When set, each query first scans the (row, col) unit direction from the
  // prior out to guide_range pixels (one pixel either side of the line); the
  // 2D search is centred on the best hit.
  std::optional<std::array<double, 2>> guide;
  int guide_range = 96;
  double min_stddev = 1e-3;        // windows flatter than this are skipped
  std::uint32_t seed = 0;          // picks the grid phase
  int min_matches = 8;

  void validate() const {
    if (window < 3 || window % 2 == 0) throw DomainError("BlockMatchParams: window must be odd >= 3");
    if (search_radius < 0 || stride < 1 || min_matches < 1 || guide_range < 0)
      throw DomainError("BlockMatchParams: bad search radius, stride or min_matches");
    if (!(min_score >= -1.0 && min_score <= 1.0))
      throw DomainError("BlockMatchParams: min_score must lie in [-1, 1]");
  }
};

namespace detail {

// Window statistics for a valid-masked image.
class ZnccImage {
 public:
  ZnccImage(const RasterGray& img, const Grid<std::uint8_t>& valid, int half)
      : img_(img), half_(half), w_(img.width()), h_(img.height()) {
    ok_ = Grid<std::uint8_t>(w_, h_, 0);
    mean_ = Grid<double>(w_, h_, 0.0);
    inv_norm_ = Grid<double>(w_, h_, 0.0);
    const int n = (2 * half + 1) * (2 * half + 1);
    // Integral images of validity, value and value^2.
    Grid<double> sv(w_ + 1, h_ + 1, 0.0), s1(w_ + 1, h_ + 1, 0.0), s2(w_ + 1, h_ + 1, 0.0);
    for (int i = 0; i < h_; ++i)
      for (int j = 0; j < w_; ++j) {
        const double v = valid(i, j) ? 1.0 : 0.0, x = img(i, j);
        sv(i + 1, j + 1) = sv(i, j + 1) + sv(i + 1, j) - sv(i, j) + v;
        s1(i + 1, j + 1) = s1(i, j + 1) + s1(i + 1, j) - s1(i, j) + x;
        s2(i + 1, j + 1) = s2(i, j + 1) + s2(i + 1, j) - s2(i, j) + x * x;
      }
    auto box = [&](const Grid<double>& s, int i0, int j0, int i1, int j1) {
      return s(i1, j1) - s(i0, j1) - s(i1, j0) + s(i0, j0);
    };
    for (int i = half; i + half < h_; ++i)
      for (int j = half; j + half < w_; ++j) {
        const int i0 = i - half, j0 = j - half, i1 = i + half + 1, j1 = j + half + 1;
        if (box(sv, i0, j0, i1, j1) < n - 0.5) continue;
        const double m = box(s1, i0, j0, i1, j1) / n;
        const double var = box(s2, i0, j0, i1, j1) / n - m * m;
        ok_(i, j) = 1;
        mean_(i, j) = m;
        inv_norm_(i, j) = var > 0.0 ? 1.0 / std::sqrt(var * n) : 0.0;
      }
  }

  bool usable(int i, int j, double min_std) const {
    if (!ok_.in_bounds(i, j) || !ok_(i, j)) return false;
    const double inv = inv_norm_(i, j);
    const int n = (2 * half_ + 1) * (2 * half_ + 1);
    return inv > 0.0 && 1.0 / (inv * std::sqrt(static_cast<double>(n))) >= min_std;
  }

  double score(const ZnccImage& o, int ia, int ja, int ib, int jb) const {
    double acc = 0.0;
    const double ma = mean_(ia, ja), mb = o.mean_(ib, jb);
    for (int di = -half_; di <= half_; ++di)
      for (int dj = -half_; dj <= half_; ++dj)
        acc += (img_(ia + di, ja + dj) - ma) * (o.img_(ib + di, jb + dj) - mb);
    return acc * inv_norm_(ia, ja) * o.inv_norm_(ib, jb);
  }

 private:
  const RasterGray& img_;
  int half_, w_, h_;
  Grid<std::uint8_t> ok_;
  Grid<double> mean_, inv_norm_;
};

struct Best {
  int i = -1, j = -1;
  double score = -2.0;
};

inline Best search(const ZnccImage& a, const ZnccImage& b, int ia, int ja, int ci, int cj,
                   int radius, double min_std) {
  Best best;
  for (int i = ci - radius; i <= ci + radius; ++i)
    for (int j = cj - radius; j <= cj + radius; ++j) {
      if (!b.usable(i, j, min_std)) continue;
      const double s = a.score(b, ia, ja, i, j);
      if (s > best.score) best = {i, j, s};
    }
  return best;
}

inline Best search_line(const ZnccImage& a, const ZnccImage& b, int ia, int ja, int ci, int cj,
                        const std::array<double, 2>& dir, int range, double min_std) {
  Best best;
  for (int t = 0; t <= range; ++t)
    for (int side = -1; side <= 1; ++side) {
      const int i = ci + static_cast<int>(std::lround(t * dir[0] - side * dir[1]));
      const int j = cj + static_cast<int>(std::lround(t * dir[1] + side * dir[0]));
      if (!b.usable(i, j, min_std)) continue;
      const double s = a.score(b, ia, ja, i, j);
      if (s > best.score) best = {i, j, s};
    }
  return best;
}

// Vertex offset of a parabola through (-1, l), (0, m), (1, r).
inline double parabola_peak(double l, double m, double r) {
  const double den = l - 2.0 * m + r;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
}

}  // namespace detail

// ZNCC matches from a strided grid in image a to image b, kept only when the
// best match searched back from b lands within lr_tolerance of the query.
inline std::vector<DewarpMatch> block_match(const DewarpResult& a, const DewarpResult& b,
                                            const BlockMatchParams& params = {}) {
  params.validate();
  const int half = params.window / 2;
  const detail::ZnccImage za(a.image, a.valid, half), zb(b.image, b.valid, half);
  std::mt19937 rng(params.seed);
  const int phase_i = static_cast<int>(rng() % static_cast<unsigned>(params.stride));
  const int phase_j = static_cast<int>(rng() % static_cast<unsigned>(params.stride));

  // sign = +1 searches b for a query in a, -1 the reverse.
  auto find = [&](const detail::ZnccImage& from, const detail::ZnccImage& to, int i, int j,
                  int sign) {
    int ci = i + sign * params.prior[0], cj = j + sign * params.prior[1];
    if (params.guide) {
      const std::array<double, 2> dir{sign * (*params.guide)[0], sign * (*params.guide)[1]};
      const auto g = detail::search_line(from, to, i, j, ci, cj, dir, params.guide_range,
                                         params.min_stddev);
      if (g.i < 0) return g;
      ci = g.i;
      cj = g.j;
    }
    return detail::search(from, to, i, j, ci, cj, params.search_radius, params.min_stddev);
  };

  std::vector<DewarpMatch> out;
  for (int i = half + phase_i; i + half < a.height(); i += params.stride)
    for (int j = half + phase_j; j + half < a.width(); j += params.stride) {
      if (!za.usable(i, j, params.min_stddev)) continue;
      const auto fwd = find(za, zb, i, j, 1);
      if (fwd.i < 0 || fwd.score < params.min_score) continue;
      const auto back = find(zb, za, fwd.i, fwd.j, -1);
      if (back.i < 0 || std::hypot(back.i - i, back.j - j) > params.lr_tolerance) continue;

      // Refined along an axis only when both neighbours can be scored.
      auto refine = [&](int di, int dj) {
        if (!zb.usable(fwd.i - di, fwd.j - dj, params.min_stddev) ||
            !zb.usable(fwd.i + di, fwd.j + dj, params.min_stddev))
          return 0.0;
        return detail::parabola_peak(za.score(zb, i, j, fwd.i - di, fwd.j - dj), fwd.score,
                                     za.score(zb, i, j, fwd.i + di, fwd.j + dj));
      };
      const double oi = refine(1, 0);
      const double oj = refine(0, 1);
      out.push_back({double(i), double(j), fwd.i + oi, fwd.j + oj, std::clamp(fwd.score, 0.0, 1.0)});
    }
  if (static_cast<int>(out.size()) < params.min_matches)
    throw InsufficientMatchesError("block_match: fewer than " + std::to_string(params.min_matches) +
                                   " consistent matches");
  return out;
}

struct Triangulation {
  Vec3 point = Vec3::Zero();
  double residual = 0.0;  // sum of squared distances to the rays
};

inline constexpr double kMaxConditionNumber = 1e8;

// p = [sum (I - d d^T)]^{-1} sum (I - d d^T) x over rays (x, d).
inline Triangulation triangulate(const std::vector<Ray>& rays) {
  if (rays.size() < 2) throw DomainError("triangulate: at least two rays required");
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& r : rays) {
    if (!is_unit(r.direction, 1e-6)) throw DomainError("triangulate: ray direction not unit");
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - r.direction * r.direction.transpose();
    A += P;
    b += P * r.origin;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
  const Vec3 lam = es.eigenvalues();
  if (!(lam(0) > 0.0) || lam(2) / lam(0) > kMaxConditionNumber)
    throw DegenerateGeometryError("triangulate: rays are (nearly) parallel");
  const Eigen::Matrix3d& V = es.eigenvectors();
  Triangulation t;
  t.point = V * (V.transpose() * b).cwiseQuotient(lam);
  for (const auto& r : rays) {
    const Vec3 d = t.point - r.origin;
    t.residual += (d - d.dot(r.direction) * r.direction).squaredNorm();
  }
  return t;
}

struct StereoParams {
  int dewarp_resolution = 256;
  double max_tan = 2.0;
  BlockMatchParams match;
  // Longest disparity searched along the baseline, in dewarped pixels.
  int max_shift = 96;
  double outlier_factor = 3.0;  // residual above this times the median is rejected
};

struct DepthResult {
  std::vector<Vec3> points;
  std::vector<double> residuals;
  std::vector<std::uint8_t> valid;
  // Correspondences behind each point.
  std::vector<std::vector<Correspondence>> sources;
  std::vector<Grid<float>> depth_maps;  // full-size per drop, NaN = invalid

  long valid_count() const {
    long n = 0;
    for (auto v : valid) n += v;
    return n;
  }
  std::vector<double> valid_depths() const {
    std::vector<double> z;
    for (std::size_t k = 0; k < points.size(); ++k)
      if (valid[k]) z.push_back(points[k].z());
    return z;
  }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw DomainError("median_of: empty input");
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

// Dense correspondences between drop 0 and every other drop.
inline std::vector<Correspondence> match_drops(const RasterGray& image,
                                               const std::vector<DropSurface>& surfaces,
                                               const StereoParams& params = {}) {
  if (surfaces.size() < 2) throw InsufficientDropsError("match_drops: need at least two drops");
  std::vector<ForwardMap> maps;
  for (const auto& s : surfaces) maps.push_back(forward_map(s, params.max_tan));
  std::vector<const ForwardMap*> ptrs;
  for (const auto& m : maps) {
    if (m.count == 0) throw EmptyOutputError("match_drops: a drop has no traceable pixels");
    ptrs.push_back(&m);
  }
  const AngularWindow window = angular_window(ptrs);
  std::vector<DewarpResult> views;
  for (std::size_t k = 0; k < surfaces.size(); ++k)
    views.push_back(dewarp(image, surfaces[k], maps[k], window, params.dewarp_resolution));

  auto centroid = [&](std::size_t k) {
    double si = 0, sj = 0;
    surfaces[k].mask().for_each([&](int i, int j) {
      si += i;
      sj += j;
    });
    const double n = static_cast<double>(surfaces[k].mask().area());
    return std::array<double, 2>{si / n, sj / n};
  };

  std::vector<Correspondence> out;
  for (std::size_t k = 1; k < surfaces.size(); ++k) {
    // A distant point seen from drop b sits at direction offset -(X_b - X_a) / depth
    // relative to drop a, so matches lie along the reversed baseline.
    BlockMatchParams bp = params.match;
    const auto ca = centroid(0), cb = centroid(k);
    const double di = cb[0] - ca[0], dj = cb[1] - ca[1], len = std::hypot(di, dj);
    if (!bp.guide && len > 0.0) {
      bp.guide = std::array<double, 2>{-di / len, -dj / len};
      bp.guide_range = params.max_shift;
    }
    std::vector<DewarpMatch> matches;
    try {
      matches = block_match(views[0], views[k], bp);
    } catch (const InsufficientMatchesError&) {
      continue;
    }
    for (const auto& m : matches) {
      const auto pa = views[0].source_at(m.r_a, m.c_a);
      const auto pb = views[k].source_at(m.r_b, m.c_b);
      if (!pa || !pb) continue;
      out.push_back({0, static_cast<int>(k), (*pa)[0], (*pa)[1], (*pb)[0], (*pb)[1], m.score});
    }
  }
  if (static_cast<int>(out.size()) < params.match.min_matches)
    throw InsufficientMatchesError("match_drops: too few correspondences between drops");
  return out;
}

// Triangulates correspondences; those sharing the same pixel in drop_a are
// one multi-view point.
inline DepthResult triangulate_correspondences(const std::vector<DropSurface>& surfaces,
                                               const std::vector<Correspondence>& corr,
                                               const StereoParams& params = {}) {
  if (surfaces.size() < 2) throw InsufficientDropsError("depth: need at least two drops");
  const int nd = static_cast<int>(surfaces.size());
  std::map<std::tuple<int, double, double>, std::vector<Correspondence>> groups;
  for (const auto& c : corr) {
    if (c.drop_a < 0 || c.drop_b < 0 || c.drop_a >= nd || c.drop_b >= nd || c.drop_a == c.drop_b)
      throw DomainError("depth: correspondence refers to an unknown drop");
    groups[{c.drop_a, c.i_a, c.j_a}].push_back(c);
  }
  auto trace = [&](int d, double i, double j) -> std::optional<Ray> {
    const auto& s = surfaces[d];
    if (!s.can_interpolate(i, j)) return std::nullopt;
    const auto t = s.trace(i, j);
    if (!t) return std::nullopt;
    return t->outbound;
  };

  DepthResult res;
  long degenerate = 0;
  for (const auto& [key, cs] : groups) {
    std::vector<Ray> rays;
    const auto ra = trace(cs.front().drop_a, cs.front().i_a, cs.front().j_a);
    if (!ra) continue;
    rays.push_back(*ra);
    std::vector<Correspondence> used;
    for (const auto& c : cs) {
      const auto rb = trace(c.drop_b, c.i_b, c.j_b);
      if (!rb) continue;
      rays.push_back(*rb);
      used.push_back(c);
    }
    if (rays.size() < 2) continue;
    try {
      const auto t = triangulate(rays);
      res.points.push_back(t.point);
      res.residuals.push_back(t.residual);
      res.sources.push_back(std::move(used));
    } catch (const DegenerateGeometryError&) {
      ++degenerate;
    }
  }
  if (res.points.empty()) {
    if (degenerate > 0) throw DegenerateGeometryError("depth: every point is degenerate");
    throw InsufficientMatchesError("depth: no traceable correspondences");
  }

  const double med = median_of(res.residuals);
  std::vector<double> hmax(nd);
  for (int d = 0; d < nd; ++d) hmax[d] = surfaces[d].height_field().max_height();
  res.valid.assign(res.points.size(), 1);
  for (std::size_t k = 0; k < res.points.size(); ++k) {
    const auto& p = res.points[k];
    bool ok = p.allFinite() && res.residuals[k] <= params.outlier_factor * med;
    for (const auto& c : res.sources[k])
      ok = ok && p.z() > hmax[c.drop_a] && p.z() > hmax[c.drop_b];
    res.valid[k] = ok ? 1 : 0;
  }

  const int w = surfaces[0].mask().width(), h = surfaces[0].mask().height();
  res.depth_maps.assign(nd, Grid<float>(w, h, std::numeric_limits<float>::quiet_NaN()));
  for (std::size_t k = 0; k < res.points.size(); ++k) {
    if (!res.valid[k]) continue;
    const float z = static_cast<float>(res.points[k].z());
    auto put = [&](int d, double i, double j) {
      const int ii = static_cast<int>(std::lround(i)), jj = static_cast<int>(std::lround(j));
      if (res.depth_maps[d].in_bounds(ii, jj)) res.depth_maps[d](ii, jj) = z;
    };
    for (const auto& c : res.sources[k]) {
      put(c.drop_a, c.i_a, c.j_a);
      put(c.drop_b, c.i_b, c.j_b);
    }
  }
  return res;
}

// Full stereo stage: dewarp, match (unless correspondences are given),
// trace, triangulate.
inline DepthResult depth_from_drops(const RasterGray& image, const std::vector<HeightField>& drops,
                                    const OpticalConfig& cfg, const StereoParams& params = {},
                                    const std::optional<std::vector<Correspondence>>& corr = {}) {
  if (drops.size() < 2) throw InsufficientDropsError("depth_from_drops: need at least two drops");
  std::vector<DropSurface> surfaces;
  for (const auto& d : drops) {
    if (d.width() != image.width() || d.height() != image.height())
      throw DomainError("depth_from_drops: drop grid does not match the image size");
    surfaces.emplace_back(d, cfg);
  }
  const auto c = corr ? *corr : match_drops(image, surfaces, params);
  if (static_cast<int>(c.size()) < params.match.min_matches)
    throw InsufficientMatchesError("depth_from_drops: too few correspondences");
  return triangulate_correspondences(surfaces, c, params);
}

}  // namespace dropstereo
