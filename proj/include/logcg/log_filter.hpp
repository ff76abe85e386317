#pragma once

// Multiscale negated, scale-normalized LoG responses computed in the
// frequency domain. The image is transformed once; every scale multiplies
// that spectrum with the kernel spectrum, inverts, and rescales by -sigma^2.
//
// Two kernel models are available:
//  - KernelModel::truncated (default): the LoG sampled at voxel centers and
//    cut off at support_sigmas * sigma (a ball in mm). With padding of at
//    least that radius the circular convolution equals the linear one.
//  - KernelModel::analytic: the closed-form continuous transform evaluated
//    on the padded frequency grid (optionally alias-corrected, which makes it
//    the exact DFT of the untruncated sampled kernel).
//
// The padded image has its mean subtracted and the DC bin of the product is
// zeroed, so constant images give an exactly zero response.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "logcg/error.hpp"
#include "logcg/fft.hpp"
#include "logcg/scale_plan.hpp"
#include "logcg/volume.hpp"

namespace logcg {

enum class PadMode { zero, replicate };
enum class KernelModel { truncated, analytic };

struct FilterOptions {
  PadMode pad = PadMode::replicate;
  KernelModel kernel = KernelModel::truncated;
  double support_sigmas = 4.0;  ///< truncated kernel radius, in units of sigma
  double padding_sigmas = 4.0;  ///< per-side margin, in units of the largest sigma
  bool alias_corrected = true;  ///< analytic model only
  unsigned workers = 1;         ///< scales computed concurrently by respond_all_scales
};

/// Placement of the input inside the padded transform grid.
struct Padding {
  Dims original;
  Dims padded;
  std::array<std::size_t, 3> before{};  ///< voxels inserted before the data on each axis
};

/// Angular frequencies (rad/mm) of a real 3D DFT grid; x holds the half axis.
struct FrequencyGrid {
  std::vector<double> wx;
  std::vector<double> wy;
  std::vector<double> wz;
  Spacing spacing;

  static std::vector<double> axis(std::size_t n, double h, bool half) {
    const std::size_t count = half ? n / 2 + 1 : n;
    std::vector<double> w(count);
    const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * h);
    for (std::size_t k = 0; k < count; ++k) {
      const auto kk = static_cast<double>(k);
      w[k] = base * (k <= n / 2 ? kk : kk - static_cast<double>(n));
    }
    return w;
  }

  static FrequencyGrid make(const Dims& padded, const Spacing& spacing) {
    return {axis(padded.nx, spacing.x, true), axis(padded.ny, spacing.y, false),
            axis(padded.nz, spacing.z, false), spacing};
  }

  std::size_t size() const noexcept { return wx.size() * wy.size() * wz.size(); }
};

/// Sampled (non-normalized) Laplacian of the unit-mass Gaussian at squared
/// radius r2 (mm^2).
inline double log_kernel_value(double r2, double sigma) {
  const double s2 = sigma * sigma;
  return (r2 / (s2 * s2) - 3.0 / s2) * std::exp(-r2 / (2.0 * s2)) /
         (std::pow(2.0 * std::numbers::pi, 1.5) * s2 * sigma);
}

namespace detail {

// Per-axis factors of the separable spectrum -|w|^2 exp(-sigma^2 |w|^2 / 2):
// gauss[k] = sum_m g(w_k + 2 pi m / h), quad[k] = sum_m (w_k + 2 pi m / h)^2 g(...).
inline void axis_factors(const std::vector<double>& w, double h, double sigma, bool alias,
                         std::vector<double>& gauss, std::vector<double>& quad) {
  gauss.assign(w.size(), 0.0);
  quad.assign(w.size(), 0.0);
  const int terms = alias ? 6 : 0;
  const double period = 2.0 * std::numbers::pi / h;
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (int m = -terms; m <= terms; ++m) {
      const double om = w[k] + period * m;
      const double g = std::exp(-0.5 * sigma * sigma * om * om);
      gauss[k] += g;
      quad[k] += om * om * g;
    }
  }
}

}  // namespace detail

/// Frequency response of the (non-normalized) LoG at `sigma` on `grid`,
/// half-spectrum layout (x fastest, nx/2+1 bins). Scaled by 1/voxel_volume
/// so that the normalized inverse DFT of spectrum x image-DFT is the discrete
/// convolution with the sampled kernel. The DC bin is zero.
inline std::vector<double> log_spectrum(const FrequencyGrid& grid, double sigma,
                                        bool alias_corrected = false) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
  std::vector<double> gx, qx, gy, qy, gz, qz;
  detail::axis_factors(grid.wx, grid.spacing.x, sigma, alias_corrected, gx, qx);
  detail::axis_factors(grid.wy, grid.spacing.y, sigma, alias_corrected, gy, qy);
  detail::axis_factors(grid.wz, grid.spacing.z, sigma, alias_corrected, gz, qz);
  const double scale = -1.0 / grid.spacing.voxel_volume();
  std::vector<double> out(grid.size());
  std::size_t i = 0;
  for (std::size_t z = 0; z < gz.size(); ++z)
    for (std::size_t y = 0; y < gy.size(); ++y)
      for (std::size_t x = 0; x < gx.size(); ++x)
        out[i++] = scale * (qx[x] * gy[y] * gz[z] + gx[x] * qy[y] * gz[z] + gx[x] * gy[y] * qz[z]);
  out[0] = 0.0;
  return out;
}

/// One response volume per plan entry (boundary scales included), on the
/// input's grid.
struct ResponseStack {
  ScalePlan plan;
  std::vector<Volume> responses;
  Padding padding;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return responses.size(); }
  const Volume& operator[](std::size_t i) const { return responses.at(i); }
};

/// Holds the transformed image and produces per-scale responses on demand.
/// response() is safe to call concurrently.
class LogFilterBank {
 public:
  LogFilterBank(const Volume& image, ScalePlan plan, FilterOptions options = {})
      : plan_(std::move(plan)), options_(options), spacing_(image.spacing()), units_(image.units()) {
    if (plan_.size() == 0) throw InvalidArgument("scale plan is empty");
    if (!(options_.support_sigmas > 0.0) || !(options_.padding_sigmas >= 0.0))
      throw InvalidArgument("support_sigmas must be > 0 and padding_sigmas >= 0");
    const double sigma_max = plan_.max_sigma();
    const Dims d = image.dims();

    padding_.original = d;
    std::array<std::size_t, 3> padded{};
    for (int a = 0; a < 3; ++a) {
      const double h = spacing_[a];
      const auto margin = static_cast<std::size_t>(std::ceil(options_.padding_sigmas * sigma_max / h - 1e-9));
      const std::size_t total = d[a] + 2 * margin;
      if (static_cast<double>(total) * h < 8.0 * sigma_max) {
        std::ostringstream os;
        os << "volume too small for the largest kernel support along axis " << "xyz"[a] << ": "
           << static_cast<double>(total) * h << " mm padded extent < 8 sigma_max = "
           << 8.0 * sigma_max << " mm";
        throw InvalidArgument(os.str());
      }
      padding_.before[a] = margin;
      padded[a] = fft::good_size(total);
    }
    padding_.padded = {padded[0], padded[1], padded[2]};
    grid_ = {padding_.padded};

    for (const auto& e : plan_.entries()) {
      for (int a = 0; a < 3; ++a) {
        const double vox = e.sigma_mm / spacing_[a];
        if (vox < 0.5) {
          std::ostringstream os;
          os << "scale " << e.index << ": sigma " << e.sigma_mm << " mm is " << vox
             << " voxels along " << "xyz"[a] << " (< 0.5)";
          warnings_.push_back(os.str());
        }
      }
    }

    fft::RealBuffer padded_image(grid_.real_size());
    fill_padded(image, padded_image);
    // Removing the mean in the spatial domain keeps constant images exactly
    // zero instead of leaving FFT round-off for the maxima search to chase.
    const auto span = padded_image.span();
    const double mean = std::accumulate(span.begin(), span.end(), 0.0) / static_cast<double>(span.size());
    for (double& x : span) x -= mean;
    spectrum_ = fft::ComplexBuffer(grid_.complex_size());
    fft::forward(grid_, padded_image, spectrum_);
    spectrum_[0][0] = 0.0;
    spectrum_[0][1] = 0.0;
  }

  const ScalePlan& plan() const noexcept { return plan_; }
  const Padding& padding() const noexcept { return padding_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  const FilterOptions& options() const noexcept { return options_; }
  Dims dims() const noexcept { return padding_.original; }
  const Spacing& spacing() const noexcept { return spacing_; }

  /// Normalized response at plan entry `entry`.
  Volume response(std::size_t entry) const {
    const double sigma = plan_[entry].sigma_mm;
    fft::ComplexBuffer work(grid_.complex_size());
    fft::RealBuffer real(grid_.real_size());

    if (options_.kernel == KernelModel::truncated) {
      fill_truncated_kernel(sigma, real);
      fft::forward(grid_, real, work);
      for (std::size_t i = 0; i < work.size(); ++i) {
        const double kr = work[i][0], ki = work[i][1];
        const double ir = spectrum_[i][0], ii = spectrum_[i][1];
        work[i][0] = ir * kr - ii * ki;
        work[i][1] = ir * ki + ii * kr;
      }
    } else {
      const auto freq = FrequencyGrid::make(padding_.padded, spacing_);
      const auto kernel = log_spectrum(freq, sigma, options_.alias_corrected);
      for (std::size_t i = 0; i < work.size(); ++i) {
        work[i][0] = spectrum_[i][0] * kernel[i];
        work[i][1] = spectrum_[i][1] * kernel[i];
      }
    }
    work[0][0] = 0.0;
    work[0][1] = 0.0;
    fft::inverse(grid_, work, real);

    // Inverse DFT normalization, Riemann-sum voxel volume, and -sigma^2.
    const double scale = -sigma * sigma * spacing_.voxel_volume() / static_cast<double>(grid_.real_size());
    const Dims d = padding_.original;
    const Dims p = padding_.padded;
    std::vector<double> out(d.voxel_count());
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y) {
        const std::size_t src = padding_.before[0] + p.nx * ((y + padding_.before[1]) + p.ny * (z + padding_.before[2]));
        const std::size_t dst = d.nx * (y + d.ny * z);
        for (std::size_t x = 0; x < d.nx; ++x) out[dst + x] = scale * real[src + x];
      }
    return Volume(d, spacing_, std::move(out), units_);
  }

 private:
  void fill_padded(const Volume& image, fft::RealBuffer& buf) const {
    const Dims d = padding_.original;
    const Dims p = padding_.padded;
    auto clamp_axis = [&](std::size_t i, int a) -> std::ptrdiff_t {
      const auto rel = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(padding_.before[a]);
      const auto n = static_cast<std::ptrdiff_t>(d[a]);
      if (options_.pad == PadMode::zero) return (rel < 0 || rel >= n) ? -1 : rel;
      return std::clamp<std::ptrdiff_t>(rel, 0, n - 1);
    };
    std::vector<std::ptrdiff_t> mx(p.nx), my(p.ny), mz(p.nz);
    for (std::size_t i = 0; i < p.nx; ++i) mx[i] = clamp_axis(i, 0);
    for (std::size_t i = 0; i < p.ny; ++i) my[i] = clamp_axis(i, 1);
    for (std::size_t i = 0; i < p.nz; ++i) mz[i] = clamp_axis(i, 2);
    const auto src = image.values();
    std::size_t o = 0;
    for (std::size_t z = 0; z < p.nz; ++z)
      for (std::size_t y = 0; y < p.ny; ++y)
        for (std::size_t x = 0; x < p.nx; ++x, ++o) {
          if (mx[x] < 0 || my[y] < 0 || mz[z] < 0) {
            buf[o] = 0.0;
          } else {
            buf[o] = src[static_cast<std::size_t>(mx[x]) +
                         d.nx * (static_cast<std::size_t>(my[y]) + d.ny * static_cast<std::size_t>(mz[z]))];
          }
        }
  }

  // Sampled LoG inside a ball of support_sigmas * sigma, wrapped around the
  // origin of the padded grid.
  void fill_truncated_kernel(double sigma, fft::RealBuffer& buf) const {
    std::fill(buf.span().begin(), buf.span().end(), 0.0);
    const double radius = options_.support_sigmas * sigma;
    const double r2max = radius * radius;
    const Dims p = padding_.padded;
    std::array<std::ptrdiff_t, 3> reach{};
    for (int a = 0; a < 3; ++a) {
      reach[a] = static_cast<std::ptrdiff_t>(std::floor(radius / spacing_[a]));
      reach[a] = std::min<std::ptrdiff_t>(reach[a], static_cast<std::ptrdiff_t>((p[a] - 1) / 2));
    }
    auto wrap = [](std::ptrdiff_t i, std::size_t n) {
      return static_cast<std::size_t>(i < 0 ? i + static_cast<std::ptrdiff_t>(n) : i);
    };
    for (std::ptrdiff_t k = -reach[2]; k <= reach[2]; ++k) {
      const double dz = static_cast<double>(k) * spacing_.z;
      for (std::ptrdiff_t j = -reach[1]; j <= reach[1]; ++j) {
        const double dy = static_cast<double>(j) * spacing_.y;
        const double ryz = dy * dy + dz * dz;
        if (ryz > r2max) continue;
        const std::size_t row = p.nx * (wrap(j, p.ny) + p.ny * wrap(k, p.nz));
        for (std::ptrdiff_t i = -reach[0]; i <= reach[0]; ++i) {
          const double dx = static_cast<double>(i) * spacing_.x;
          const double r2 = ryz + dx * dx;
          if (r2 > r2max) continue;
          buf[row + wrap(i, p.nx)] = log_kernel_value(r2, sigma);
        }
      }
    }
  }

  ScalePlan plan_;
  FilterOptions options_;
  Spacing spacing_;
  Units units_;
  Padding padding_;
  fft::Grid grid_;
  fft::ComplexBuffer spectrum_;
  std::vector<std::string> warnings_;
};

/// Full response stack for every plan entry.
inline ResponseStack respond_all_scales(const Volume& image, const ScalePlan& plan,
                                        FilterOptions options = {}) {
  LogFilterBank bank(image, plan, options);
  ResponseStack stack{plan, std::vector<Volume>(plan.size()), bank.padding(), bank.warnings()};
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(plan.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < plan.size(); ++i) stack.responses[i] = bank.response(i);
    return stack;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < plan.size(); i += workers) stack.responses[i] = bank.response(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return stack;
}

}  // namespace logcg
