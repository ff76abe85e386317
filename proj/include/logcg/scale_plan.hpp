#pragma once

// Quantized scale sets: a geometric progression of sphere diameters plus one
// boundary scale on each side. Each interior entry owns the range of sphere
// diameters between the dip diameters it shares with its neighbours.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "logcg/analytic.hpp"
#include "logcg/error.hpp"

namespace logcg {

struct ScaleEntry {
  std::size_t index = 0;
  double diameter_mm = 0.0;
  double sigma_mm = 0.0;
  double range_lo_mm = 0.0;  ///< zero on boundary entries
  double range_hi_mm = 0.0;  ///< zero on boundary entries
  bool boundary = false;
};

class ScalePlan {
 public:
  ScalePlan() = default;
  ScalePlan(std::vector<ScaleEntry> entries, double k) : entries_(std::move(entries)), k_(k) {}

  const std::vector<ScaleEntry>& entries() const noexcept { return entries_; }
  const ScaleEntry& operator[](std::size_t i) const { return entries_.at(i); }
  std::size_t size() const noexcept { return entries_.size(); }
  double k() const noexcept { return k_; }

  /// Interior (candidate-emitting) entry indices are 1..interior_count().
  std::size_t interior_count() const noexcept { return entries_.size() < 2 ? 0 : entries_.size() - 2; }
  std::size_t first_interior() const noexcept { return 1; }
  std::size_t last_interior() const noexcept { return entries_.size() - 2; }
  bool is_interior(std::size_t i) const noexcept {
    return i < entries_.size() && !entries_[i].boundary;
  }

  double max_sigma() const noexcept { return entries_.empty() ? 0.0 : entries_.back().sigma_mm; }
  double min_sigma() const noexcept { return entries_.empty() ? 0.0 : entries_.front().sigma_mm; }

 private:
  std::vector<ScaleEntry> entries_;
  double k_ = 0.0;
};

/// Geometric plan with `n_scales` interior diameters from d_min to d_max
/// inclusive, plus boundary entries at d_min/k and d_max*k.
inline ScalePlan build_plan(double d_min, double d_max, std::size_t n_scales) {
  if (!(d_min > 0.0) || !std::isfinite(d_max) || !(d_min < d_max))
    throw InvalidArgument("build_plan requires 0 < d_min < d_max");
  if (n_scales < 2) throw InvalidArgument("build_plan requires at least 2 scales");

  const double k = std::pow(d_max / d_min, 1.0 / static_cast<double>(n_scales - 1));
  std::vector<ScaleEntry> entries(n_scales + 2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    e.index = i;
    if (i == 1) {
      e.diameter_mm = d_min;
    } else if (i == n_scales) {
      e.diameter_mm = d_max;
    } else {
      e.diameter_mm = d_min * std::pow(k, static_cast<double>(i) - 1.0);
    }
    e.sigma_mm = analytic::sigma_for_sphere(e.diameter_mm);
    e.boundary = (i == 0 || i == n_scales + 1);
  }
  for (std::size_t i = 1; i <= n_scales; ++i) {
    entries[i].range_lo_mm = analytic::dip_diameter(entries[i - 1].sigma_mm, entries[i].sigma_mm);
    entries[i].range_hi_mm = analytic::dip_diameter(entries[i].sigma_mm, entries[i + 1].sigma_mm);
  }
  return ScalePlan(std::move(entries), k);
}

struct PlanViolation {
  std::optional<std::size_t> entry;  ///< absent for plan-wide rules
  std::string rule;
  std::string detail;
};

/// Checks the plan invariants and the shape-confusion bound `max_k`.
/// Returns an empty list iff the plan is acceptable.
inline std::vector<PlanViolation> validate_plan(const ScalePlan& p,
                                                double max_k = analytic::kShapeConfusionRatio) {
  std::vector<PlanViolation> out;
  const auto& e = p.entries();
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };

  if (e.size() < 3) {
    out.push_back({std::nullopt, "structure", "plan needs two boundary entries and at least one interior entry"});
    return out;
  }
  if (!(p.k() > 1.0)) out.push_back({std::nullopt, "ratio", "k must exceed 1, got " + fmt(p.k())});
  if (p.k() > max_k)
    out.push_back({std::nullopt, "shape-confusion bound exceeded",
                   "k = " + fmt(p.k()) + " exceeds the limit " + fmt(max_k)});

  if (!e.front().boundary) out.push_back({0, "boundary", "first entry must be a boundary scale"});
  if (!e.back().boundary) out.push_back({e.size() - 1, "boundary", "last entry must be a boundary scale"});

  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& s = e[i];
    if (s.index != i) out.push_back({i, "index", "entry index " + std::to_string(s.index) + " out of order"});
    if (i > 0 && i + 1 < e.size() && s.boundary)
      out.push_back({i, "boundary", "interior entry flagged as boundary"});
    const double expect_sigma = analytic::sigma_for_sphere(s.diameter_mm);
    if (std::abs(s.sigma_mm - expect_sigma) > 1e-9 * expect_sigma)
      out.push_back({i, "sigma", "sigma " + fmt(s.sigma_mm) + " != d/(2 sqrt 3) = " + fmt(expect_sigma)});
    if (i > 0) {
      const double ratio = s.diameter_mm / e[i - 1].diameter_mm;
      if (!(ratio > 1.0)) out.push_back({i, "order", "diameters must strictly increase"});
      if (std::abs(ratio - p.k()) > 1e-9 * p.k())
        out.push_back({i, "ratio", "diameter ratio " + fmt(ratio) + " != k = " + fmt(p.k())});
    }
  }
  for (std::size_t i = 1; i + 1 < e.size(); ++i) {
    const auto& s = e[i];
    if (!(s.range_lo_mm < s.diameter_mm && s.diameter_mm < s.range_hi_mm))
      out.push_back({i, "range", "range must bracket the entry diameter"});
    if (i > 1 && std::abs(s.range_lo_mm - e[i - 1].range_hi_mm) > 1e-9 * s.range_lo_mm)
      out.push_back({i, "tiling", "range does not start where the previous one ends"});
  }
  return out;
}

/// Interior entry whose size range contains `d_mm`. A diameter exactly on a
/// shared range boundary is assigned to the smaller scale.
inline std::size_t assign_size(double d_mm, const ScalePlan& p) {
  if (p.interior_count() == 0) throw InvalidArgument("plan has no interior scales");
  const auto& first = p[p.first_interior()];
  const auto& last = p[p.last_interior()];
  if (!(d_mm >= first.range_lo_mm && d_mm <= last.range_hi_mm)) {
    std::ostringstream os;
    os << "diameter " << d_mm << " mm outside plan range [" << first.range_lo_mm << ", "
       << last.range_hi_mm << "]";
    throw InvalidArgument(os.str());
  }
  for (std::size_t i = p.first_interior(); i <= p.last_interior(); ++i)
    if (d_mm <= p[i].range_hi_mm) return i;
  return p.last_interior();
}

}  // namespace logcg
