#pragma once

// Physical-space scalar volumes and binary masks.
//
// Voxel (ix, iy, iz) has its center at (ix*sx, iy*sy, iz*sz) mm. Data is
// stored x-fastest, then y, then z.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "logcg/error.hpp"

namespace logcg {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  constexpr std::size_t voxel_count() const noexcept { return nx * ny * nz; }
  constexpr std::size_t operator[](int axis) const noexcept {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  constexpr double voxel_volume() const noexcept { return x * y * z; }
  constexpr double operator[](int axis) const noexcept {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr double finest() const noexcept { return std::min({x, y, z}); }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

struct Index3 {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;
  friend constexpr bool operator==(const Index3&, const Index3&) = default;
};

using Point3 = std::array<double, 3>;

enum class Units { hu, unitless };

inline std::string to_string(Units u) { return u == Units::hu ? "HU" : "unitless"; }

inline Units units_from_string(const std::string& s) {
  if (s == "HU") return Units::hu;
  if (s == "unitless") return Units::unitless;
  throw InvalidArgument("unknown units '" + s + "' (expected HU or unitless)");
}

inline double distance(const Point3& a, const Point3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

/// Dense 3D grid of T with physical voxel spacing.
template <class T>
class Volume3D {
 public:
  using value_type = T;

  Volume3D() = default;

  Volume3D(Dims dims, Spacing spacing, Units units = Units::unitless, T fill = T{})
      : dims_(dims), spacing_(spacing), units_(units), data_(dims.voxel_count(), fill) {
    validate();
  }

  Volume3D(Dims dims, Spacing spacing, std::vector<T> data, Units units = Units::unitless)
      : dims_(dims), spacing_(spacing), units_(units), data_(std::move(data)) {
    validate();
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  Units units() const noexcept { return units_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }

  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const noexcept {
    return ix + dims_.nx * (iy + dims_.ny * iz);
  }
  Index3 unravel(std::size_t i) const noexcept {
    const std::size_t ix = i % dims_.nx;
    const std::size_t rest = i / dims_.nx;
    return {ix, rest % dims_.ny, rest / dims_.ny};
  }

  const T& operator()(std::size_t ix, std::size_t iy, std::size_t iz) const noexcept {
    return data_[index(ix, iy, iz)];
  }
  T& operator()(std::size_t ix, std::size_t iy, std::size_t iz) noexcept {
    return data_[index(ix, iy, iz)];
  }

  Point3 position_mm(const Index3& v) const noexcept {
    return {static_cast<double>(v.x) * spacing_.x, static_cast<double>(v.y) * spacing_.y,
            static_cast<double>(v.z) * spacing_.z};
  }

  bool same_grid(const Dims& d, const Spacing& s) const noexcept {
    return dims_ == d && spacing_ == s;
  }
  template <class U>
  bool same_grid(const Volume3D<U>& other) const noexcept {
    return same_grid(other.dims(), other.spacing());
  }

 private:
  void validate() const {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
      throw InvalidArgument("volume dims must be positive");
    if (!(spacing_.x > 0.0 && spacing_.y > 0.0 && spacing_.z > 0.0) ||
        !std::isfinite(spacing_.voxel_volume()))
      throw InvalidArgument("volume spacing must be positive and finite");
    if (data_.size() != dims_.voxel_count())
      throw InvalidArgument("volume data length " + std::to_string(data_.size()) +
                            " does not match dims (" + std::to_string(dims_.voxel_count()) +
                            ")");
    if constexpr (std::is_floating_point_v<T>) {
      for (const T& v : data_)
        if (!std::isfinite(v)) throw InvalidArgument("volume contains a non-finite value");
    }
  }

  Dims dims_{};
  Spacing spacing_{};
  Units units_ = Units::unitless;
  std::vector<T> data_;
};

using Volume = Volume3D<double>;

/// Binary mask; nonzero entries are members.
using Mask3D = Volume3D<std::uint8_t>;

inline Mask3D full_mask(Dims dims, Spacing spacing) { return Mask3D(dims, spacing, Units::unitless, 1); }

inline std::size_t count_set(const Mask3D& m) {
  return static_cast<std::size_t>(
      std::count_if(m.values().begin(), m.values().end(), [](std::uint8_t b) { return b != 0; }));
}

/// Intensity windowing: every voxel brighter than `level` is clipped down to it.
template <class T>
Volume3D<T> window_clamp(const Volume3D<T>& v, T level) {
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(level)) throw InvalidArgument("window level must be finite");
  }
  std::vector<T> out(v.values().begin(), v.values().end());
  for (T& x : out) x = std::min(x, level);
  return Volume3D<T>(v.dims(), v.spacing(), std::move(out), v.units());
}

namespace detail {

// Exact 1D squared-distance transform (lower envelope of parabolas) with
// sample pitch `h`: out[p] = min_q ((p - q) h)^2 + f[q].
inline void distance_transform_1d(std::span<const double> f, double h, std::span<double> out,
                                  std::vector<std::size_t>& v, std::vector<double>& z) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double h2 = h * h;
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  std::size_t first = n;
  for (std::size_t q = 0; q < n; ++q)
    if (f[q] < inf) {
      first = q;
      break;
    }
  if (first == n) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (!(f[q] < inf)) continue;
    const auto qd = static_cast<double>(q);
    auto intersect = [&](std::size_t r) {
      const auto rd = static_cast<double>(r);
      return ((f[q] + h2 * qd * qd) - (f[r] + h2 * rd * rd)) / (2.0 * h2 * (qd - rd));
    };
    double s = intersect(v[k]);
    while (s <= z[k]) s = intersect(v[--k]);
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto pd = static_cast<double>(p);
    while (z[k + 1] < pd) ++k;
    const double d = (pd - static_cast<double>(v[k])) * h;
    out[p] = d * d + f[v[k]];
  }
}

}  // namespace detail

/// Squared Euclidean distance (mm^2) from each voxel center to the nearest
/// set voxel center, x-fastest. Infinity everywhere when the mask is empty.
inline std::vector<double> squared_distance_map(const Mask3D& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Dims d = m.dims();
  std::vector<double> dist(d.voxel_count());
  for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = m.values()[i] ? 0.0 : inf;

  std::vector<std::size_t> v;
  std::vector<double> z;
  auto pass = [&](int axis) {
    const std::size_t n = d[axis];
    const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
    std::vector<double> line(n), out(n);
    const std::size_t lines = d.voxel_count() / n;
    for (std::size_t l = 0; l < lines; ++l) {
      std::size_t base = 0;
      if (axis == 0) {
        base = l * d.nx;
      } else if (axis == 1) {
        base = (l % d.nx) + (l / d.nx) * d.nx * d.ny;
      } else {
        base = l;
      }
      for (std::size_t i = 0; i < n; ++i) line[i] = dist[base + i * stride];
      detail::distance_transform_1d(line, m.spacing()[axis], out, v, z);
      for (std::size_t i = 0; i < n; ++i) dist[base + i * stride] = out[i];
    }
  };
  pass(0);
  pass(1);
  pass(2);
  return dist;
}

/// Morphological dilation by a solid ball of `radius_mm` measured in physical
/// space: a voxel is set iff its center lies within radius_mm of a set voxel
/// center.
inline Mask3D dilate_mask(const Mask3D& m, double radius_mm) {
  if (!(radius_mm >= 0.0) || !std::isfinite(radius_mm))
    throw InvalidArgument("dilation radius must be finite and >= 0");
  if (radius_mm == 0.0) return m;
  const auto dist2 = squared_distance_map(m);
  const double limit = radius_mm * radius_mm * (1.0 + 1e-12);
  std::vector<std::uint8_t> out(m.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist2[i] <= limit ? 1 : 0;
  return Mask3D(m.dims(), m.spacing(), std::move(out));
}

}  // namespace logcg
