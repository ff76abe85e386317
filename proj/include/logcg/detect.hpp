#pragma once

// Candidate extraction: 4D (space x scale) local maxima of the normalized
// LoG response inside a mask, followed by the minimum-response criterion.
//
// A point (Y, i) with i an interior scale is a maximum iff its response is
// >= all 26 same-scale neighbours and >= the 7-point stencils (center + 6 face
// neighbours) at scales i-1 and i+1, and at least one of those 40 neighbours
// is strictly lower (a perfectly flat neighbourhood is not a blob). Voxels on
// the volume border are skipped. Co-maximal points that touch (same scale,
// 26-connected, equal response) are collapsed onto the smallest (z, y, x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <iterator>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "logcg/analytic.hpp"
#include "logcg/error.hpp"
#include "logcg/log_filter.hpp"
#include "logcg/scale_plan.hpp"
#include "logcg/volume.hpp"

namespace logcg {

struct Candidate {
  Index3 voxel;
  Point3 position_mm{};
  std::size_t scale_index = 0;
  double sigma_mm = 0.0;
  double diameter_mm = 0.0;
  double response = 0.0;
};

inline constexpr double kSolidResponseThreshold = 226.0;
inline constexpr double kNonsolidWindowHU = -700.0;
inline constexpr double kLungDilationMM = 10.0;

struct DetectionConfig {
  std::optional<double> response_threshold = kSolidResponseThreshold;
  std::optional<double> window_T;
  double dilation_radius_mm = kLungDilationMM;
  unsigned workers = 1;
  FilterOptions filter{};
  /// Called with (plan entry, response) as each scale is computed.
  std::function<void(std::size_t, const Volume&)> response_observer;

  static DetectionConfig solid() { return {}; }
  static DetectionConfig nonsolid() {
    DetectionConfig c;
    c.response_threshold.reset();
    c.window_T = kNonsolidWindowHU;
    return c;
  }
};

namespace detail {

inline constexpr double kPlateauTolerance = 1e-9;

// Maxima of `cur` against its 26 neighbours and the 7-point stencils of the
// adjacent scales, for z in [z0, z1).
inline void scan_slab(const Volume& below, const Volume& cur, const Volume& above, const Mask3D& mask,
                      const ScaleEntry& entry, std::size_t z0, std::size_t z1,
                      std::vector<Candidate>& out) {
  const Dims d = cur.dims();
  const auto nx = static_cast<std::ptrdiff_t>(d.nx);
  const auto nxy = static_cast<std::ptrdiff_t>(d.nx * d.ny);
  const auto c = cur.values();
  const auto lo = below.values();
  const auto hi = above.values();
  const auto m = mask.values();

  std::ptrdiff_t cube[26];
  int n = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx || dy || dz) cube[n++] = dx + dy * nx + dz * nxy;
  const std::ptrdiff_t face[7] = {0, -1, 1, -nx, nx, -nxy, nxy};

  for (std::size_t z = std::max<std::size_t>(z0, 1); z < z1 && z + 1 < d.nz; ++z)
    for (std::size_t y = 1; y + 1 < d.ny; ++y)
      for (std::size_t x = 1; x + 1 < d.nx; ++x) {
        const std::size_t i = x + d.nx * (y + d.ny * z);
        if (!m[i]) continue;
        const double v = c[i];
        bool is_max = true;
        bool strict = false;
        const auto si = static_cast<std::ptrdiff_t>(i);
        for (std::ptrdiff_t off : cube) {
          const double w = c[static_cast<std::size_t>(si + off)];
          if (w > v) {
            is_max = false;
            break;
          }
          strict = strict || w < v;
        }
        if (!is_max) continue;
        for (std::ptrdiff_t off : face) {
          const auto j = static_cast<std::size_t>(si + off);
          const double a = lo[j], b = hi[j];
          if (a > v || b > v) {
            is_max = false;
            break;
          }
          strict = strict || a < v || b < v;
        }
        if (!is_max || !strict) continue;
        Candidate cand;
        cand.voxel = {x, y, z};
        cand.position_mm = cur.position_mm(cand.voxel);
        cand.scale_index = entry.index;
        cand.sigma_mm = entry.sigma_mm;
        cand.diameter_mm = analytic::sphere_diameter_for_sigma(entry.sigma_mm);
        cand.response = v;
        out.push_back(cand);
      }
}

inline std::vector<Candidate> scan_scale(const Volume& below, const Volume& cur, const Volume& above,
                                         const Mask3D& mask, const ScaleEntry& entry, unsigned workers) {
  const std::size_t nz = cur.dims().nz;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(nz)));
  std::vector<std::vector<Candidate>> parts(workers);
  if (workers == 1) {
    scan_slab(below, cur, above, mask, entry, 0, nz, parts[0]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      const std::size_t step = (nz + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            const std::size_t z0 = std::min(nz, w * step);
            scan_slab(below, cur, above, mask, entry, z0, std::min(nz, z0 + step), parts[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<Candidate> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Collapses 26-connected groups of equal-response maxima at one scale onto
// the member with the smallest linear (z, y, x) index. Input must be sorted
// by linear index.
inline std::vector<Candidate> collapse_plateaus(const std::vector<Candidate>& cands, const Dims& d) {
  auto lin = [&](const Index3& v) { return v.x + d.nx * (v.y + d.ny * v.z); };
  std::unordered_map<std::size_t, std::size_t> where;
  where.reserve(cands.size() * 2);
  for (std::size_t i = 0; i < cands.size(); ++i) where.emplace(lin(cands[i].voxel), i);

  std::vector<char> seen(cands.size(), 0);
  std::vector<Candidate> out;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (seen[i]) continue;
    seen[i] = 1;
    out.push_back(cands[i]);  // smallest index of its group, since input is sorted
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const Index3 v = cands[cur].voxel;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dx && !dy && !dz) continue;
            const auto x = static_cast<std::ptrdiff_t>(v.x) + dx;
            const auto y = static_cast<std::ptrdiff_t>(v.y) + dy;
            const auto z = static_cast<std::ptrdiff_t>(v.z) + dz;
            if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(d.nx) ||
                y >= static_cast<std::ptrdiff_t>(d.ny) || z >= static_cast<std::ptrdiff_t>(d.nz))
              continue;
            const auto it = where.find(lin({static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                            static_cast<std::size_t>(z)}));
            if (it == where.end() || seen[it->second]) continue;
            if (std::abs(cands[it->second].response - cands[cur].response) > kPlateauTolerance) continue;
            seen[it->second] = 1;
            stack.push_back(it->second);
          }
    }
  }
  return out;
}

inline void require_grid(const Volume& v, const Mask3D& mask) {
  if (!v.same_grid(mask)) throw InvalidArgument("mask dims/spacing do not match the volume");
}

}  // namespace detail

/// Candidates from a precomputed stack, ordered by (scale, z, y, x).
inline std::vector<Candidate> find_local_maxima(const ResponseStack& stack, const Mask3D& mask,
                                                unsigned workers = 1) {
  if (stack.size() < 3) throw InvalidArgument("local maxima need at least 3 scales");
  detail::require_grid(stack[0], mask);
  std::vector<Candidate> out;
  for (std::size_t i = 1; i + 1 < stack.size(); ++i) {
    if (!stack.plan.is_interior(i)) continue;
    auto found = detail::scan_scale(stack[i - 1], stack[i], stack[i + 1], mask, stack.plan[i], workers);
    auto unique = detail::collapse_plateaus(found, stack[i].dims());
    out.insert(out.end(), unique.begin(), unique.end());
  }
  return out;
}

/// Candidates computed scale by scale from a filter bank, holding only the
/// current scale and its two neighbours in memory.
inline std::vector<Candidate> find_local_maxima(
    const LogFilterBank& bank, const Mask3D& mask, unsigned workers = 1,
    const std::function<void(std::size_t, const Volume&)>& observer = {}) {
  const ScalePlan& plan = bank.plan();
  if (plan.size() < 3) throw InvalidArgument("local maxima need at least 3 scales");
  if (!(bank.dims() == mask.dims() && bank.spacing() == mask.spacing()))
    throw InvalidArgument("mask dims/spacing do not match the volume");

  auto compute = [&](std::size_t i) {
    Volume v = bank.response(i);
    if (observer) observer(i, v);
    return v;
  };
  std::vector<Candidate> out;
  Volume below = compute(0);
  Volume cur = compute(1);
  for (std::size_t i = 1; i + 1 < plan.size(); ++i) {
    Volume above = compute(i + 1);
    if (plan.is_interior(i)) {
      auto found = detail::scan_scale(below, cur, above, mask, plan[i], workers);
      auto unique = detail::collapse_plateaus(found, cur.dims());
      out.insert(out.end(), unique.begin(), unique.end());
    }
    below = std::move(cur);
    cur = std::move(above);
  }
  return out;
}

/// Keeps candidates with response >= threshold, preserving order.
inline std::vector<Candidate> apply_threshold(const std::vector<Candidate>& cands, double threshold) {
  std::vector<Candidate> out;
  std::copy_if(cands.begin(), cands.end(), std::back_inserter(out),
               [&](const Candidate& c) { return c.response >= threshold; });
  return out;
}

namespace detail {

inline std::vector<Candidate> run_pipeline(const Volume& v, const Mask3D& mask, const ScalePlan& plan,
                                           const DetectionConfig& cfg) {
  require_grid(v, mask);
  if (cfg.response_threshold && !(*cfg.response_threshold >= 0.0))
    throw InvalidArgument("response threshold must be >= 0");
  const Mask3D search = dilate_mask(mask, cfg.dilation_radius_mm);
  if (count_set(search) == 0) return {};
  LogFilterBank bank(v, plan, cfg.filter);
  auto cands = find_local_maxima(bank, search, cfg.workers, cfg.response_observer);
  if (cfg.response_threshold) cands = apply_threshold(cands, *cfg.response_threshold);
  return cands;
}

}  // namespace detail

/// Solid-nodule pipeline: dilate mask, filter, 4D maxima, threshold.
inline std::vector<Candidate> detect_solid(const Volume& v, const Mask3D& mask, const ScalePlan& plan,
                                           const DetectionConfig& cfg = DetectionConfig::solid()) {
  if (cfg.window_T) throw InvalidArgument("solid detection does not take a window level");
  return detail::run_pipeline(v, mask, plan, cfg);
}

/// Nonsolid pipeline: clip intensities above window_T, then the solid pipeline.
inline std::vector<Candidate> detect_nonsolid(const Volume& v, const Mask3D& mask, const ScalePlan& plan,
                                              const DetectionConfig& cfg = DetectionConfig::nonsolid()) {
  if (!cfg.window_T) throw InvalidArgument("nonsolid detection requires a window level");
  return detail::run_pipeline(window_clamp(v, *cfg.window_T), mask, plan, cfg);
}

}  // namespace logcg
