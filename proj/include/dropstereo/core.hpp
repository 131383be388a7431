#pragma once

// Geometric and raster primitives shared by every stage of the pipeline:
// vectors, grayscale rasters, drop masks, height fields and the discrete
// differential operators used by the surface solver.
//
// Coordinates: (i, j) = (row, column) in image pixels. Plate coordinates are
// x = j - principal_x, y = i - principal_y, with the glass at z = 0 and the
// scene at z > 0. Drop heights grow toward the scene.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dropstereo {

using Vec3 = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Errors

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RingTooSmallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientMatchesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateGeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyOutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool is_unit(const Vec3& v, double tol = 1e-9) {
  return std::abs(v.norm() - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Grid<T>: dense row-major storage.

template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DomainError("Grid: negative size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int i, int j) const {
    return i >= 0 && j >= 0 && i < height_ && j < width_;
  }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * width_ + j;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// RasterGray: intensities in [0, 1].

class RasterGray {
 public:
  RasterGray() = default;
  RasterGray(int width, int height, double fill = 0.0)
      : grid_(checked_size(width), checked_size(height), clamp01(fill)) {}

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  bool in_bounds(int i, int j) const { return grid_.in_bounds(i, j); }

  double operator()(int i, int j) const { return grid_(i, j); }
  void set(int i, int j, double v) { grid_(i, j) = clamp01(v); }

  const std::vector<double>& samples() const { return grid_.data(); }

  // Bilinear lookup with edge replication; (fi, fj) in pixel-center units.
  double sample(double fi, double fj) const {
    fi = std::clamp(fi, 0.0, static_cast<double>(height() - 1));
    fj = std::clamp(fj, 0.0, static_cast<double>(width() - 1));
    const int i0 = static_cast<int>(std::floor(fi));
    const int j0 = static_cast<int>(std::floor(fj));
    const int i1 = std::min(i0 + 1, height() - 1);
    const int j1 = std::min(j0 + 1, width() - 1);
    const double a = fi - i0, b = fj - j0;
    return (1 - a) * ((1 - b) * grid_(i0, j0) + b * grid_(i0, j1)) +
           a * ((1 - b) * grid_(i1, j0) + b * grid_(i1, j1));
  }

  bool operator==(const RasterGray&) const = default;

  static double clamp01(double v) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  static int checked_size(int n) {
    if (n <= 0) throw DomainError("RasterGray: dimensions must be positive");
    return n;
  }

  Grid<double> grid_;
};

// ---------------------------------------------------------------------------
// DropMask: one 4-connected region of an image (the adhesion region).

struct PixelBox {
  int row0 = 0, col0 = 0, rows = 0, cols = 0;
  bool contains(int i, int j) const {
    return i >= row0 && j >= col0 && i < row0 + rows && j < col0 + cols;
  }
};

class DropMask {
 public:
  DropMask() = default;

  // Builds a mask from a full-image membership raster. Throws DomainError if
  // the member pixels do not form a single 4-connected component.
  static DropMask from_membership(const Grid<std::uint8_t>& membership) {
    DropMask m;
    m.width_ = membership.width();
    m.height_ = membership.height();
    int rmin = m.height_, rmax = -1, cmin = m.width_, cmax = -1;
    for (int i = 0; i < m.height_; ++i)
      for (int j = 0; j < m.width_; ++j)
        if (membership(i, j)) {
          rmin = std::min(rmin, i);
          rmax = std::max(rmax, i);
          cmin = std::min(cmin, j);
          cmax = std::max(cmax, j);
        }
    if (rmax < 0) {
      m.box_ = {};
      return m;
    }
    m.box_ = {rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
    m.bits_ = Grid<std::uint8_t>(m.box_.cols, m.box_.rows, 0);
    for (int i = rmin; i <= rmax; ++i)
      for (int j = cmin; j <= cmax; ++j)
        if (membership(i, j)) {
          m.bits_(i - rmin, j - cmin) = 1;
          ++m.area_;
        }
    if (m.count_component_from_first() != m.area_)
      throw DomainError("DropMask: membership is not a single 4-connected region");
    return m;
  }

  template <class Pred>
  static DropMask from_predicate(int width, int height, Pred&& inside) {
    Grid<std::uint8_t> g(width, height, 0);
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) g(i, j) = inside(i, j) ? 1 : 0;
    return from_membership(g);
  }

  static DropMask disk(int width, int height, double ci, double cj, double radius) {
    return from_predicate(width, height, [&](int i, int j) {
      return std::hypot(i - ci, j - cj) <= radius;
    });
  }

  int width() const { return width_; }
  int height() const { return height_; }
  long area() const { return area_; }
  bool empty() const { return area_ == 0; }
  const PixelBox& box() const { return box_; }

  bool contains(int i, int j) const {
    if (!box_.contains(i, j)) return false;
    return bits_(i - box_.row0, j - box_.col0) != 0;
  }

  // Mask pixel with a 4-neighbour outside the mask (the contact line).
  bool on_rim(int i, int j) const {
    return contains(i, j) && (!contains(i - 1, j) || !contains(i + 1, j) ||
                              !contains(i, j - 1) || !contains(i, j + 1));
  }

  double equivalent_diameter() const {
    return 2.0 * std::sqrt(static_cast<double>(area_) / M_PI);
  }

  // Visits member pixels in row-major order.
  template <class F>
  void for_each(F&& f) const {
    for (int r = 0; r < box_.rows; ++r)
      for (int c = 0; c < box_.cols; ++c)
        if (bits_(r, c)) f(box_.row0 + r, box_.col0 + c);
  }

  Grid<std::uint8_t> to_membership() const {
    Grid<std::uint8_t> g(width_, height_, 0);
    for_each([&](int i, int j) { g(i, j) = 1; });
    return g;
  }

  DropMask translated(int di, int dj, int new_width, int new_height) const {
    return from_predicate(new_width, new_height, [&](int i, int j) {
      return contains(i - di, j - dj);
    });
  }

  bool operator==(const DropMask& o) const {
    return width_ == o.width_ && height_ == o.height_ && area_ == o.area_ &&
           box_.row0 == o.box_.row0 && box_.col0 == o.box_.col0 &&
           box_.rows == o.box_.rows && box_.cols == o.box_.cols && bits_ == o.bits_;
  }

 private:
  long count_component_from_first() const {
    Grid<std::uint8_t> seen(box_.cols, box_.rows, 0);
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < box_.rows && stack.empty(); ++r)
      for (int c = 0; c < box_.cols; ++c)
        if (bits_(r, c)) {
          stack.emplace_back(r, c);
          seen(r, c) = 1;
          break;
        }
    long n = 0;
    while (!stack.empty()) {
      auto [r, c] = stack.back();
      stack.pop_back();
      ++n;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= box_.rows || cc >= box_.cols) continue;
        if (bits_(rr, cc) && !seen(rr, cc)) {
          seen(rr, cc) = 1;
          stack.emplace_back(rr, cc);
        }
      }
    }
    return n;
  }

  int width_ = 0, height_ = 0;
  long area_ = 0;
  PixelBox box_;
  Grid<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// HeightField: z >= 0 on the mask, 0 elsewhere. Storage covers the mask's
// bounding box only.

class HeightField {
 public:
  HeightField() = default;
  explicit HeightField(DropMask mask, double fill = 0.0) : mask_(std::move(mask)) {
    z_ = Grid<double>(mask_.box().cols, mask_.box().rows, 0.0);
    mask_.for_each([&](int i, int j) { local(i, j) = fill; });
  }

  const DropMask& mask() const { return mask_; }
  int width() const { return mask_.width(); }
  int height() const { return mask_.height(); }

  double operator()(int i, int j) const {
    if (!mask_.contains(i, j)) return 0.0;
    return z_(i - mask_.box().row0, j - mask_.box().col0);
  }
  void set(int i, int j, double v) {
    if (!mask_.contains(i, j)) throw DomainError("HeightField::set: pixel outside mask");
    local(i, j) = v;
  }

  double max_height() const {
    double m = 0.0;
    mask_.for_each([&](int i, int j) { m = std::max(m, (*this)(i, j)); });
    return m;
  }

  // Height at a fractional position by bilinear interpolation of the
  // surrounding pixels (non-members read as 0).
  double interpolate(double fi, double fj) const {
    const int i0 = static_cast<int>(std::floor(fi));
    const int j0 = static_cast<int>(std::floor(fj));
    const double a = fi - i0, b = fj - j0;
    return (1 - a) * ((1 - b) * (*this)(i0, j0) + b * (*this)(i0, j0 + 1)) +
           a * ((1 - b) * (*this)(i0 + 1, j0) + b * (*this)(i0 + 1, j0 + 1));
  }

  bool operator==(const HeightField&) const = default;

 private:
  double& local(int i, int j) { return z_(i - mask_.box().row0, j - mask_.box().col0); }

  DropMask mask_;
  Grid<double> z_;
};

// ---------------------------------------------------------------------------
// OpticalConfig

struct OpticalConfig {
  double n_air = 1.0;
  double n_water = 4.0 / 3.0;
  double camera_z = 5000.0;  // perpendicular camera-to-plate distance, pixels
  std::array<double, 3> gravity_cosines{0.0, 0.0, 1.0};
  double tension_weight = 1.0;
  double gravity_weight = 1e-4;
  double pixel_pitch = 6e-6;  // metres per pixel, metadata only
  // Principal point in image pixels; unset means the image centre.
  std::optional<std::array<double, 2>> principal_point;
  // Rays from the camera are parallel to +z (theta_C' = 0 everywhere).
  bool camera_at_infinity = false;
  // Use C' = (0, 0, (n_w / n_a) z_c) instead of the exact position.
  bool paraxial_camera = false;

  void validate() const {
    if (!(n_air > 0.0) || !(n_water > n_air))
      throw DomainError("OpticalConfig: require n_water > n_air > 0");
    if (!(camera_z > 0.0)) throw DomainError("OpticalConfig: camera_z must be positive");
    const double g = std::sqrt(gravity_cosines[0] * gravity_cosines[0] +
                               gravity_cosines[1] * gravity_cosines[1] +
                               gravity_cosines[2] * gravity_cosines[2]);
    if (std::abs(g - 1.0) > 1e-6)
      throw DomainError("OpticalConfig: gravity_cosines must have unit norm");
    if (!(tension_weight >= 0.0) || !(gravity_weight >= 0.0))
      throw DomainError("OpticalConfig: solver weights must be non-negative");
  }

  std::array<double, 2> principal(int width, int height) const {
    if (principal_point) return *principal_point;
    return {(height - 1) / 2.0, (width - 1) / 2.0};
  }
};

// Plate position of pixel (fi, fj): (x, y, 0).
inline Vec3 plate_point(const OpticalConfig& cfg, int width, int height, double fi, double fj) {
  const auto pp = cfg.principal(width, height);
  return {fj - pp[1], fi - pp[0], 0.0};
}

// Inverse of plate_point; returns (fi, fj).
inline std::array<double, 2> plate_to_pixel(const OpticalConfig& cfg, int width, int height,
                                            double x, double y) {
  const auto pp = cfg.principal(width, height);
  return {y + pp[0], x + pp[1]};
}

// ---------------------------------------------------------------------------
// Discrete operators on mask pixels. Central differences where both
// neighbours are members, one-sided where only one is, zero otherwise.

struct Gradient {
  double dx = 0.0;  // along columns (j)
  double dy = 0.0;  // along rows (i)
};

template <class F>
double mask_derivative(const DropMask& mask, int i, int j, int di, int dj, F&& value) {
  const bool fwd = mask.contains(i + di, j + dj);
  const bool bwd = mask.contains(i - di, j - dj);
  if (fwd && bwd) return 0.5 * (value(i + di, j + dj) - value(i - di, j - dj));
  if (fwd) return value(i + di, j + dj) - value(i, j);
  if (bwd) return value(i, j) - value(i - di, j - dj);
  return 0.0;
}

inline Gradient gradient_at(const HeightField& hf, int i, int j) {
  const auto& m = hf.mask();
  if (!m.contains(i, j)) throw DomainError("gradient: pixel outside mask");
  auto z = [&](int a, int b) { return hf(a, b); };
  return {mask_derivative(m, i, j, 0, 1, z), mask_derivative(m, i, j, 1, 0, z)};
}

// Per-pixel gradient over the mask bounding box (zero outside the mask).
struct GradientField {
  DropMask mask;
  Grid<double> dx, dy;  // bounding-box local storage

  Gradient at(int i, int j) const {
    if (!mask.contains(i, j)) throw DomainError("GradientField: pixel outside mask");
    const auto& b = mask.box();
    return {dx(i - b.row0, j - b.col0), dy(i - b.row0, j - b.col0)};
  }
};

inline GradientField gradient(const HeightField& hf) {
  const auto& m = hf.mask();
  const auto& b = m.box();
  GradientField g{m, Grid<double>(b.cols, b.rows, 0.0), Grid<double>(b.cols, b.rows, 0.0)};
  m.for_each([&](int i, int j) {
    const Gradient d = gradient_at(hf, i, j);
    g.dx(i - b.row0, j - b.col0) = d.dx;
    g.dy(i - b.row0, j - b.col0) = d.dy;
  });
  return g;
}

// div(F) for a vector field sampled on the mask; returned in bounding-box
// local storage (0 outside the mask).
inline Grid<double> divergence(const GradientField& f) {
  const auto& m = f.mask;
  const auto& b = m.box();
  Grid<double> out(b.cols, b.rows, 0.0);
  auto fx = [&](int i, int j) { return f.dx(i - b.row0, j - b.col0); };
  auto fy = [&](int i, int j) { return f.dy(i - b.row0, j - b.col0); };
  m.for_each([&](int i, int j) {
    out(i - b.row0, j - b.col0) =
        mask_derivative(m, i, j, 0, 1, fx) + mask_derivative(m, i, j, 1, 0, fy);
  });
  return out;
}

// Unit surface normal in the +z hemisphere: (-z_x, -z_y, 1) / norm, so a
// convex drop has normals tilting outward.
inline Vec3 surface_normal(const HeightField& hf, int i, int j) {
  const Gradient g = gradient_at(hf, i, j);
  return Vec3(-g.dx, -g.dy, 1.0).normalized();
}

// z-weighted centroid normalised by area B (not by volume). Returns (x_g, y_g)
// in column/row units.
inline std::array<double, 2> mask_centroid(const HeightField& hf) {
  const auto& m = hf.mask();
  if (m.empty()) throw DomainError("mask_centroid: empty mask");
  double sx = 0.0, sy = 0.0;
  m.for_each([&](int i, int j) {
    sx += hf(i, j) * j;
    sy += hf(i, j) * i;
  });
  const double B = static_cast<double>(m.area());
  return {sx / B, sy / B};
}

}  // namespace dropstereo
