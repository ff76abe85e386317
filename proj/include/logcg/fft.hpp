#pragma once

// Thin RAII layer over FFTW's real<->complex 3D transforms.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include "logcg/error.hpp"
#include "logcg/volume.hpp"

namespace logcg::fft {

/// FFTW's planner is not thread-safe; executing plans is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwFree {
  void operator()(T* p) const noexcept { fftw_free(p); }
};

template <class T>
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n)
      : ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)))), size_(n) {
    if (!ptr_) throw Error("fftw_malloc failed for " + std::to_string(n) + " elements");
  }
  T* data() noexcept { return ptr_.get(); }
  const T* data() const noexcept { return ptr_.get(); }
  std::size_t size() const noexcept { return size_; }
  std::span<T> span() noexcept { return {ptr_.get(), size_}; }
  std::span<const T> span() const noexcept { return {ptr_.get(), size_}; }
  T& operator[](std::size_t i) noexcept { return ptr_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return ptr_.get()[i]; }

 private:
  std::unique_ptr<T, FftwFree<T>> ptr_;
  std::size_t size_ = 0;
};

using RealBuffer = Buffer<double>;
using ComplexBuffer = Buffer<fftw_complex>;

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
inline std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Grid of a real 3D transform, x fastest. The half-spectrum keeps
/// nx/2 + 1 bins along x.
struct Grid {
  Dims dims;

  std::size_t real_size() const noexcept { return dims.voxel_count(); }
  std::size_t half_nx() const noexcept { return dims.nx / 2 + 1; }
  std::size_t complex_size() const noexcept { return half_nx() * dims.ny * dims.nz; }
};

/// Forward real-to-complex transform (unnormalized).
inline void forward(const Grid& g, RealBuffer& in, ComplexBuffer& out) {
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_3d(static_cast<int>(g.dims.nz), static_cast<int>(g.dims.ny),
                                    static_cast<int>(g.dims.nx), in.data(), out.data(),
                                    FFTW_ESTIMATE));
  }
  if (!plan) throw Error("failed to create forward FFT plan");
  fftw_execute(plan.get());
}

/// Inverse complex-to-real transform (unnormalized; `in` is destroyed).
inline void inverse(const Grid& g, ComplexBuffer& in, RealBuffer& out) {
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_3d(static_cast<int>(g.dims.nz), static_cast<int>(g.dims.ny),
                                    static_cast<int>(g.dims.nx), in.data(), out.data(),
                                    FFTW_ESTIMATE));
  }
  if (!plan) throw Error("failed to create inverse FFT plan");
  fftw_execute(plan.get());
}

}  // namespace logcg::fft
