#pragma once

// Closed-form responses of the negated, scale-normalized LoG filter to ideal
// shapes, and the scale-quantization bounds that follow from them. Every
// function here is evaluated straight from its formula; the planner and the
// test oracles both depend on that.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "logcg/error.hpp"

namespace logcg::analytic {

namespace detail {
inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvalidArgument(std::string(name) + " must be positive and finite");
}
inline void require_ratio(double k) {
  if (!(k > 1.0) || !std::isfinite(k)) throw InvalidArgument("scale ratio k must be > 1");
}
}  // namespace detail

/// Ratio between a sphere's diameter and its best-matching scale: d = 2*sqrt(3)*sigma.
inline constexpr double kSphereDiameterPerSigma = 2.0 * std::numbers::sqrt3;

/// Ratio between a cylinder's diameter and its best-matching scale: d = 2*sqrt(2)*sigma.
inline constexpr double kCylinderDiameterPerSigma = 2.0 * std::numbers::sqrt2;

inline double sigma_for_sphere(double diameter) { return diameter / kSphereDiameterPerSigma; }
inline double sphere_diameter_for_sigma(double sigma) { return sigma * kSphereDiameterPerSigma; }

/// Center response of the normalized LoG at scale `sigma` to a unit-intensity
/// solid sphere of diameter `d` on a zero background.
inline double sphere_response(double sigma, double d) {
  detail::require_positive(sigma, "sigma");
  detail::require_positive(d, "diameter");
  const double ratio = d / sigma;
  return ratio * ratio * ratio / (std::pow(2.0, 2.5) * std::sqrt(std::numbers::pi)) *
         std::exp(-ratio * ratio / 8.0);
}

/// Peak sphere response, reached at sigma = d / (2 sqrt 3) for any diameter.
inline double peak_sphere_response() { return std::sqrt(54.0 / std::numbers::pi) * std::exp(-1.5); }

/// Axis response of the normalized LoG to an infinitely long unit solid cylinder.
inline double cylinder_response(double sigma, double d) {
  detail::require_positive(sigma, "sigma");
  detail::require_positive(d, "diameter");
  const double r2 = (d * d) / (sigma * sigma);
  return r2 / 4.0 * std::exp(-r2 / 8.0);
}

/// Peak cylinder response 2/e, reached at sigma = d / (2 sqrt 2).
inline double peak_cylinder_response() { return 2.0 / std::numbers::e; }

/// Diameter whose responses at two adjacent scales coincide; it is the
/// worst-case (minimum) response point between them.
inline double dip_diameter(double sigma1, double sigma2) {
  detail::require_positive(sigma1, "sigma1");
  detail::require_positive(sigma2, "sigma2");
  if (!(sigma1 < sigma2)) throw InvalidArgument("dip_diameter requires sigma1 < sigma2");
  const double num = 3.0 * (std::log(sigma2) - std::log(sigma1));
  const double den = sigma2 * sigma2 - sigma1 * sigma1;
  return std::sqrt(8.0) * sigma1 * sigma2 * std::sqrt(num / den);
}

/// Minimum sphere response between two scales with ratio k; depends on k only.
/// k is clamped to 1 + 1e-6 from below to avoid the 0/0 limit at k = 1.
inline double dip_response(double k) {
  detail::require_ratio(k);
  const double x = 1.0 / std::max(k, 1.0 + 1e-6);
  const double x2 = x * x;
  return 4.0 / std::sqrt(std::numbers::pi) * std::pow(x, 3.0 / (1.0 - x2)) *
         std::pow(3.0 * std::log(x) / (x2 - 1.0), 1.5);
}

struct SizeErrorBounds {
  double underestimate = 0.0;  ///< largest relative diameter underestimation
  double overestimate = 0.0;   ///< largest relative diameter overestimation
};

inline SizeErrorBounds size_error_bounds(double k) {
  detail::require_ratio(k);
  const double lnk = std::log(k);
  return {1.0 - std::sqrt((1.0 - 1.0 / (k * k)) / (2.0 * lnk)),
          std::sqrt((k * k - 1.0) / (2.0 * lnk)) - 1.0};
}

/// All bounds implied by a geometric scale ratio.
struct QuantizationBounds {
  double k = 0.0;
  double r_dip = 0.0;
  double d_ue = 0.0;
  double d_oe = 0.0;
};

inline QuantizationBounds quantization_bounds(double k) {
  const auto e = size_error_bounds(k);
  return {k, dip_response(k), e.underestimate, e.overestimate};
}

/// Largest ratio k for which the dip response still exceeds the cylinder
/// peak 2/e (the shape-confusion bound). Solved by bisection on the
/// monotone dip_response.
inline double shape_confusion_ratio() {
  double lo = 1.0 + 1e-6;
  double hi = 4.0;
  const double target = peak_cylinder_response();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (dip_response(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Center response of the 1D normalized LoG to a unit rectangle of width d.
inline double rect_response_1d(double sigma, double d) {
  detail::require_positive(sigma, "sigma");
  detail::require_positive(d, "width");
  return d / (std::sqrt(2.0 * std::numbers::pi) * sigma) * std::exp(-d * d / (8.0 * sigma * sigma));
}

/// Minimum filter response a low-contrast solid nodule can produce after
/// interference (r_int), quantization (r_dip / r_peak), and contrast scaling.
inline double derive_solid_threshold(double r_int, double r_dip, double r_peak,
                                     double i_solid_min, double i_paren) {
  if (!std::isfinite(r_int) || !std::isfinite(r_dip) || !std::isfinite(i_solid_min) ||
      !std::isfinite(i_paren))
    throw InvalidArgument("threshold inputs must be finite");
  detail::require_positive(r_peak, "r_peak");
  return r_int * (r_dip / r_peak) * (i_solid_min - i_paren);
}

inline constexpr double kDefaultInterferenceResponse = 0.7;
inline constexpr double kParenchymaHU = -810.0;
inline constexpr double kSolidTissueMinHU = -474.0;
inline constexpr double kShapeConfusionRatio = 1.746;

}  // namespace logcg::analytic
