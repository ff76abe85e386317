#pragma once

// Synthetic scenes built from spheres, cylinders, and walls, rasterized with
// supersampled coverage, plus the sphere/cylinder and sphere/wall
// interference sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "logcg/detect.hpp"
#include "logcg/error.hpp"
#include "logcg/log_filter.hpp"
#include "logcg/scale_plan.hpp"
#include "logcg/volume.hpp"

namespace logcg::phantom {

namespace detail {
inline double dot(const Point3& a, const Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Point3 sub(const Point3& a, const Point3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }
inline Point3 normalized(const Point3& a, const char* what) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument(std::string(what) + " must be a nonzero vector");
  return {a[0] / n, a[1] / n, a[2] / n};
}
inline void require_size(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
}
}  // namespace detail

struct Sphere {
  Point3 center_mm{};
  double diameter_mm = 0.0;

  double signed_distance(const Point3& p) const {
    return detail::norm(detail::sub(p, center_mm)) - 0.5 * diameter_mm;
  }
  void validate() const { detail::require_size(diameter_mm, "sphere diameter"); }
};

/// Solid cylinder; length 0 means infinitely long.
struct Cylinder {
  Point3 point_mm{};  ///< a point on the axis (the center when finite)
  Point3 axis{0.0, 0.0, 1.0};
  double diameter_mm = 0.0;
  double length_mm = 0.0;

  double signed_distance(const Point3& p) const {
    const Point3 u = detail::normalized(axis, "cylinder axis");
    const Point3 r = detail::sub(p, point_mm);
    const double t = detail::dot(r, u);
    const Point3 radial{r[0] - t * u[0], r[1] - t * u[1], r[2] - t * u[2]};
    const double dr = detail::norm(radial) - 0.5 * diameter_mm;
    if (length_mm <= 0.0) return dr;
    const double dt = std::abs(t) - 0.5 * length_mm;
    const double outside = std::hypot(std::max(dr, 0.0), std::max(dt, 0.0));
    return std::min(std::max(dr, dt), 0.0) + outside;
  }
  void validate() const {
    detail::require_size(diameter_mm, "cylinder diameter");
    (void)detail::normalized(axis, "cylinder axis");
    if (length_mm < 0.0 || !std::isfinite(length_mm)) throw InvalidArgument("cylinder length must be >= 0");
  }
};

/// Slab behind the plane through `point_mm`: points with
/// -thickness <= (p - point) . normal <= 0. Thickness 0 means a half-space.
struct Wall {
  Point3 point_mm{};
  Point3 normal{1.0, 0.0, 0.0};
  double thickness_mm = 0.0;

  double signed_distance(const Point3& p) const {
    const Point3 n = detail::normalized(normal, "wall normal");
    const double t = detail::dot(detail::sub(p, point_mm), n);
    if (thickness_mm <= 0.0) return t;
    return std::abs(t + 0.5 * thickness_mm) - 0.5 * thickness_mm;
  }
  void validate() const {
    (void)detail::normalized(normal, "wall normal");
    if (thickness_mm < 0.0 || !std::isfinite(thickness_mm)) throw InvalidArgument("wall thickness must be >= 0");
  }
};

struct Primitive {
  std::variant<Sphere, Cylinder, Wall> shape;
  double intensity = 1.0;

  double signed_distance(const Point3& p) const {
    return std::visit([&](const auto& s) { return s.signed_distance(p); }, shape);
  }
  void validate() const {
    std::visit([](const auto& s) { s.validate(); }, shape);
    if (!std::isfinite(intensity)) throw InvalidArgument("primitive intensity must be finite");
  }
};

enum class Composite { max, add };

struct Scene {
  Dims dims;
  Spacing spacing;
  double background = 0.0;
  Units units = Units::unitless;
  Composite composite = Composite::max;
  std::vector<Primitive> primitives;
};

/// Voxel value = coverage-weighted composite of the primitives over the
/// background, with coverage estimated from supersample^3 sub-voxel points.
/// Voxels that no primitive boundary can cross are resolved exactly from
/// the signed distance at their center.
inline Volume rasterize(const Scene& scene, int supersample = 3, unsigned workers = 1) {
  if (supersample < 1) throw InvalidArgument("supersample must be >= 1");
  for (const auto& p : scene.primitives) p.validate();
  const Dims d = scene.dims;
  Volume out(d, scene.spacing, scene.units, scene.background);  // validates dims/spacing
  const Spacing h = scene.spacing;
  const double half_diag = 0.5 * std::sqrt(h.x * h.x + h.y * h.y + h.z * h.z);
  const std::size_t np = scene.primitives.size();
  if (np == 0) return out;

  const int s = supersample;
  std::vector<double> offsets(static_cast<std::size_t>(s));
  for (int j = 0; j < s; ++j) offsets[static_cast<std::size_t>(j)] = (j + 0.5) / s - 0.5;
  const double inv_samples = 1.0 / (static_cast<double>(s) * s * s);

  auto composite = [&](const std::vector<char>& covered) {
    if (scene.composite == Composite::max) {
      double v = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t k = 0; k < np; ++k)
        if (covered[k]) {
          v = std::max(v, scene.primitives[k].intensity);
          any = true;
        }
      return any ? v : scene.background;
    }
    double v = scene.background;
    for (std::size_t k = 0; k < np; ++k)
      if (covered[k]) v += scene.primitives[k].intensity - scene.background;
    return v;
  };

  auto slab = [&](std::size_t z0, std::size_t z1) {
    std::vector<int> state(np);  // -1 outside, 1 inside, 0 partial
    std::vector<char> covered(np);
    auto vals = out.values();
    for (std::size_t z = z0; z < z1; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const Point3 c = out.position_mm({x, y, z});
          bool partial = false;
          for (std::size_t k = 0; k < np; ++k) {
            const double sd = scene.primitives[k].signed_distance(c);
            state[k] = sd > half_diag ? -1 : (sd < -half_diag ? 1 : 0);
            partial = partial || state[k] == 0;
          }
          double value = 0.0;
          if (!partial) {
            for (std::size_t k = 0; k < np; ++k) covered[k] = state[k] == 1;
            value = composite(covered);
          } else {
            double acc = 0.0;
            for (double oz : offsets)
              for (double oy : offsets)
                for (double ox : offsets) {
                  const Point3 p{c[0] + ox * h.x, c[1] + oy * h.y, c[2] + oz * h.z};
                  for (std::size_t k = 0; k < np; ++k)
                    covered[k] = state[k] == 1 ||
                                 (state[k] == 0 && scene.primitives[k].signed_distance(p) <= 0.0);
                  acc += composite(covered);
                }
            value = acc * inv_samples;
          }
          vals[out.index(x, y, z)] = value;
        }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(d.nz)));
  if (workers == 1) {
    slab(0, d.nz);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t step = (d.nz + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t z0 = std::min(d.nz, w * step);
      pool.emplace_back(slab, z0, std::min(d.nz, z0 + step));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interference sweeps

struct SweepOptions {
  std::size_t grid = 128;  ///< voxels per axis (cubic volume)
  double spacing_mm = 1.0;
  int supersample = 3;
  double response_floor = 0.1;  ///< ignore maxima weaker than this (unit contrast)
  FilterOptions filter{};
  unsigned workers = 1;
};

struct SweepRow {
  double distance_diameters = 0.0;
  double response = 0.0;
  double size_estimate_mm = 0.0;
  bool merged = false;
  std::size_t scale_index = 0;
  Point3 position_mm{};
};

/// Reference point of an interfering structure: distance from a position to it.
using DistanceToStructure = double (*)(const Point3&, const Point3&, double);

namespace detail {

inline Point3 grid_center(const SweepOptions& o) {
  const double c = static_cast<double>(o.grid / 2) * o.spacing_mm;
  return {c, c, c};
}

inline std::vector<Candidate> unthresholded(const Volume& v, const ScalePlan& plan, const SweepOptions& o) {
  LogFilterBank bank(v, plan, o.filter);
  auto cands = find_local_maxima(bank, full_mask(v.dims(), v.spacing()), o.workers);
  return apply_threshold(cands, o.response_floor);
}

// The sphere's candidate: the strongest maximum within one diameter of the
// sphere center that lies closer to the sphere center than to the other
// structure. If none qualifies the sphere has merged with the structure, and
// the strongest maximum within one diameter stands in for it.
template <class DistToOther>
SweepRow pick_sphere_candidate(const std::vector<Candidate>& cands, const Point3& center, double d,
                               DistToOther dist_other) {
  const Candidate* own = nullptr;
  const Candidate* any = nullptr;
  const Candidate* nearest = nullptr;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    const double dc = distance(c.position_mm, center);
    if (dc < nearest_dist) {
      nearest_dist = dc;
      nearest = &c;
    }
    if (dc > d) continue;
    if (!any || c.response > any->response) any = &c;
    if (dc < dist_other(c.position_mm) && (!own || c.response > own->response)) own = &c;
  }
  SweepRow row;
  const Candidate* pick = own ? own : (any ? any : nearest);
  row.merged = own == nullptr;
  if (pick) {
    row.response = pick->response;
    row.size_estimate_mm = pick->diameter_mm;
    row.scale_index = pick->scale_index;
    row.position_mm = pick->position_mm;
  }
  return row;
}

inline void require_descending(const std::vector<double>& distances) {
  if (distances.empty()) throw InvalidArgument("sweep needs at least one distance");
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0) || !std::isfinite(distances[i]))
      throw InvalidArgument("sweep distances must be positive");
    if (i > 0 && !(distances[i] < distances[i - 1]))
      throw InvalidArgument("sweep distances must be sorted in descending order");
  }
}

inline Scene sweep_scene(const SweepOptions& o) {
  Scene s;
  s.dims = {o.grid, o.grid, o.grid};
  s.spacing = {o.spacing_mm, o.spacing_mm, o.spacing_mm};
  s.background = 0.0;
  return s;
}

}  // namespace detail

/// Response and size estimate of a lone unit sphere at the sweep grid center.
inline SweepRow isolated_sphere(double d, const ScalePlan& plan, const SweepOptions& o = {}) {
  detail::require_size(d, "sphere diameter");
  const Point3 c = detail::grid_center(o);
  Scene s = detail::sweep_scene(o);
  s.primitives.push_back({Sphere{c, d}, 1.0});
  const auto cands = detail::unthresholded(rasterize(s, o.supersample, o.workers), plan, o);
  auto row = detail::pick_sphere_candidate(cands, c, d, [](const Point3&) {
    return std::numeric_limits<double>::infinity();
  });
  row.distance_diameters = std::numeric_limits<double>::infinity();
  return row;
}

/// Unit sphere of diameter d next to an infinitely long unit cylinder of the
/// same diameter; the cylinder axis runs along z at `distance * d` from the
/// sphere center along x.
inline std::vector<SweepRow> sweep_sphere_cylinder(double d, const std::vector<double>& distances,
                                                   const ScalePlan& plan, const SweepOptions& o = {}) {
  detail::require_size(d, "sphere diameter");
  detail::require_descending(distances);
  const Point3 c = detail::grid_center(o);
  std::vector<SweepRow> rows;
  for (double dist : distances) {
    const Point3 axis_point{c[0] + dist * d, c[1], c[2]};
    Scene s = detail::sweep_scene(o);
    s.primitives.push_back({Sphere{c, d}, 1.0});
    s.primitives.push_back({Cylinder{axis_point, {0.0, 0.0, 1.0}, d, 0.0}, 1.0});
    const auto cands = detail::unthresholded(rasterize(s, o.supersample, o.workers), plan, o);
    auto row = detail::pick_sphere_candidate(cands, c, d, [&](const Point3& p) {
      return std::hypot(p[0] - axis_point[0], p[1] - axis_point[1]);
    });
    row.distance_diameters = dist;
    rows.push_back(row);
  }
  return rows;
}

/// Unit sphere of diameter d in front of a unit half-space wall whose face
/// lies `distance * d` from the sphere center (wall on the -x side).
inline std::vector<SweepRow> sweep_sphere_wall(double d, const std::vector<double>& distances,
                                               const ScalePlan& plan, const SweepOptions& o = {}) {
  detail::require_size(d, "sphere diameter");
  detail::require_descending(distances);
  const Point3 c = detail::grid_center(o);
  std::vector<SweepRow> rows;
  for (double dist : distances) {
    const double face_x = c[0] - dist * d;
    Scene s = detail::sweep_scene(o);
    s.primitives.push_back({Sphere{c, d}, 1.0});
    s.primitives.push_back({Wall{{face_x, c[1], c[2]}, {1.0, 0.0, 0.0}, 0.0}, 1.0});
    const auto cands = detail::unthresholded(rasterize(s, o.supersample, o.workers), plan, o);
    auto row = detail::pick_sphere_candidate(cands, c, d, [&](const Point3& p) { return std::abs(p[0] - face_x); });
    row.distance_diameters = dist;
    rows.push_back(row);
  }
  return rows;
}

inline const std::vector<double>& default_cylinder_distances() {
  static const std::vector<double> v{2.0, 1.5, 1.0, 0.75, 0.6, 0.45, 0.3, 0.2};
  return v;
}

inline const std::vector<double>& default_wall_distances() {
  static const std::vector<double> v{1.5, 1.25, 1.0, 0.75, 0.5, 0.4, 0.25};
  return v;
}

}  // namespace logcg::phantom
