#pragma once

// Matching candidates against reference nodules: sensitivity, diameter bias,
// and centroid distance.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "logcg/detect.hpp"
#include "logcg/error.hpp"
#include "logcg/volume.hpp"

namespace logcg {

enum class NoduleClass { solid, nonsolid };

inline std::string to_string(NoduleClass c) { return c == NoduleClass::solid ? "solid" : "nonsolid"; }

inline NoduleClass nodule_class_from_string(const std::string& s) {
  if (s == "solid") return NoduleClass::solid;
  if (s == "nonsolid") return NoduleClass::nonsolid;
  throw InvalidArgument("unknown nodule class '" + s + "' (expected solid or nonsolid)");
}

inline double effective_diameter(double length_mm, double width_mm) {
  if (!(width_mm > 0.0) || !(length_mm >= width_mm) || !std::isfinite(length_mm))
    throw InvalidArgument("nodule size requires length >= width > 0");
  return 0.5 * (length_mm + width_mm);
}

struct GroundTruthNodule {
  Index3 centroid;
  Point3 position_mm{};
  double length_mm = 0.0;
  double width_mm = 0.0;
  NoduleClass cls = NoduleClass::solid;

  double effective_diameter_mm() const { return effective_diameter(length_mm, width_mm); }
};

inline GroundTruthNodule make_nodule(Index3 centroid, double length_mm, double width_mm, const Spacing& spacing,
                                     NoduleClass cls = NoduleClass::solid) {
  GroundTruthNodule n;
  n.centroid = centroid;
  n.position_mm = {static_cast<double>(centroid.x) * spacing.x, static_cast<double>(centroid.y) * spacing.y,
                   static_cast<double>(centroid.z) * spacing.z};
  n.length_mm = length_mm;
  n.width_mm = width_mm;
  n.cls = cls;
  (void)n.effective_diameter_mm();
  return n;
}

struct NoduleMatch {
  bool matched = false;
  std::optional<std::size_t> candidate;  ///< index into the candidate list
  double distance_mm = 0.0;
  double diameter_error_mm = 0.0;  ///< effective diameter minus candidate diameter
};

struct MatchReport {
  std::vector<NoduleMatch> nodules;
  std::size_t matched = 0;
  double sensitivity = 0.0;
  double diameter_bias_mean = 0.0;
  double diameter_bias_sd = 0.0;  ///< sample SD (n - 1); 0 with fewer than two matches
  double mean_distance_mm = 0.0;
  std::size_t candidate_count = 0;
};

/// A nodule is found when some candidate lies within half its length. Each
/// nodule counts once; the nearest such candidate (earliest on ties) is the
/// one used for the bias and distance statistics.
inline MatchReport match(const std::vector<GroundTruthNodule>& truth, const std::vector<Candidate>& cands) {
  if (truth.empty()) throw InvalidArgument("sensitivity is undefined for an empty ground-truth set");
  MatchReport r;
  r.candidate_count = cands.size();
  r.nodules.resize(truth.size());
  double sum_err = 0.0, sum_dist = 0.0;
  std::vector<double> errs;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& n = truth[k];
    const double d_eff = n.effective_diameter_mm();
    const double radius = 0.5 * n.length_mm;
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> pick;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double dist = distance(n.position_mm, cands[c].position_mm);
      if (dist <= radius && dist < best) {
        best = dist;
        pick = c;
      }
    }
    auto& m = r.nodules[k];
    if (!pick) continue;
    m.matched = true;
    m.candidate = pick;
    m.distance_mm = best;
    m.diameter_error_mm = d_eff - cands[*pick].diameter_mm;
    ++r.matched;
    errs.push_back(m.diameter_error_mm);
    sum_err += m.diameter_error_mm;
    sum_dist += best;
  }
  r.sensitivity = static_cast<double>(r.matched) / static_cast<double>(truth.size());
  if (r.matched > 0) {
    const auto n = static_cast<double>(r.matched);
    r.diameter_bias_mean = sum_err / n;
    r.mean_distance_mm = sum_dist / n;
    if (r.matched > 1) {
      double ss = 0.0;
      for (double e : errs) ss += (e - r.diameter_bias_mean) * (e - r.diameter_bias_mean);
      r.diameter_bias_sd = std::sqrt(ss / (n - 1.0));
    }
  }
  return r;
}

}  // namespace logcg
