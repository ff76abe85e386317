#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "logcg/analytic.hpp"
#include "logcg/log_filter.hpp"
#include "logcg/phantom.hpp"
#include "oracles.hpp"

using namespace logcg;

namespace {

Volume random_volume(Dims d, Spacing s, unsigned seed, double offset = 0.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> v(d.voxel_count());
  for (auto& x : v) x = u(rng) + offset;
  return Volume(d, s, std::move(v));
}

double max_abs(const Volume& v) {
  double m = 0.0;
  for (double x : v.values()) m = std::max(m, std::abs(x));
  return m;
}

Volume sphere_volume(std::size_t n, double d, Spacing s = {1, 1, 1}) {
  phantom::Scene sc;
  sc.dims = {n, n, n};
  sc.spacing = s;
  const double c = static_cast<double>(n / 2);
  sc.primitives.push_back({phantom::Sphere{{c * s.x, c * s.y, c * s.z}, d}, 1.0});
  return phantom::rasterize(sc, 3);
}

}  // namespace

TEST(LogSpectrum, MatchesDftOfSampledKernel) {
  const Dims padded{16, 18, 20};
  const Spacing h{1.0, 0.8, 1.2};
  const double sigma = 1.0;
  const auto grid = FrequencyGrid::make(padded, h);
  const auto spec = log_spectrum(grid, sigma, true);
  ASSERT_EQ(spec.size(), (padded.nx / 2 + 1) * padded.ny * padded.nz);
  EXPECT_EQ(spec[0], 0.0);
  // Direct DTFT of the sampled kernel at a few DFT bins, summed far enough out
  // (over 9 sigma) that the tail is below rounding.
  const int bins[][3] = {{1, 0, 0}, {0, 2, 0}, {3, 4, 5}, {8, 9, 10}, {2, 17, 1}};
  for (const auto& b : bins) {
    std::complex<double> acc = 0.0;
    for (int k = -12; k <= 12; ++k)
      for (int j = -12; j <= 12; ++j)
        for (int i = -12; i <= 12; ++i) {
          const double r2 = i * h.x * i * h.x + j * h.y * j * h.y + k * h.z * k * h.z;
          const double phase = -2.0 * std::numbers::pi *
                               (double(b[0] * i) / double(padded.nx) + double(b[1] * j) / double(padded.ny) +
                                double(b[2] * k) / double(padded.nz));
          acc += log_kernel_value(r2, sigma) * std::polar(1.0, phase);
        }
    const std::size_t idx = b[0] + (padded.nx / 2 + 1) * (b[1] + padded.ny * std::size_t(b[2]));
    EXPECT_NEAR(spec[idx], acc.real(), 1e-9 * std::max(1.0, std::abs(acc.real()))) << b[0] << b[1] << b[2];
    EXPECT_NEAR(acc.imag(), 0.0, 1e-9);
  }
}

TEST(LogSpectrum, UncorrectedIsContinuousTransform) {
  const auto grid = FrequencyGrid::make({8, 8, 8}, {1, 1, 1});
  const double sigma = 2.0;
  const auto spec = log_spectrum(grid, sigma, false);
  const double w = 2 * std::numbers::pi / 8;
  EXPECT_NEAR(spec[1], -w * w * std::exp(-0.5 * sigma * sigma * w * w), 1e-15);
  EXPECT_THROW(log_spectrum(grid, 0.0), InvalidArgument);
}

TEST(LogFilter, ConstantInputGivesZero) {
  const Volume v({20, 18, 16}, {1, 1, 1}, Units::hu, -700.0);
  const auto plan = build_plan(2, 6, 3);
  for (auto kernel : {KernelModel::truncated, KernelModel::analytic}) {
    FilterOptions o;
    o.kernel = kernel;
    const auto st = respond_all_scales(v, plan, o);
    for (const auto& r : st.responses) EXPECT_LT(max_abs(r), 1e-9);
  }
}

TEST(LogFilter, MatchesDirectConvolution) {
  const Volume v = random_volume({22, 20, 18}, {1, 1, 1}, 5, 0.3);
  const auto plan = build_plan(2, 6, 3);
  LogFilterBank bank(v, plan);
  const double mean = oracle::replicate_padded_mean(v, bank.padding());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto got = bank.response(i);
    const auto ref = oracle::direct_response(v, plan[i].sigma_mm, 4.0, mean);
    const double scale = max_abs(ref);
    for (std::size_t j = 0; j < got.size(); ++j)
      ASSERT_NEAR(got.values()[j], ref.values()[j], 1e-9 * scale) << "scale " << i << " voxel " << j;
  }
}

TEST(LogFilter, AnisotropicMatchesDirectConvolution) {
  const Volume v = random_volume({16, 14, 10}, {0.7, 0.9, 1.6}, 9);
  const auto plan = build_plan(2.5, 5, 2);
  LogFilterBank bank(v, plan);
  const double mean = oracle::replicate_padded_mean(v, bank.padding());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto got = bank.response(i);
    const auto ref = oracle::direct_response(v, plan[i].sigma_mm, 4.0, mean);
    const double scale = max_abs(ref);
    for (std::size_t j = 0; j < got.size(); ++j) ASSERT_NEAR(got.values()[j], ref.values()[j], 1e-9 * scale);
  }
}

TEST(LogFilter, SphereCenterResponseNearAnalytic) {
  const auto plan = build_plan(3, 25, 10);
  const auto v = sphere_volume(64, 9.74);
  LogFilterBank bank(v, plan);
  const auto r = bank.response(6);
  EXPECT_NEAR(r(32, 32, 32), analytic::sphere_response(plan[6].sigma_mm, 9.74), 0.02);
  // The center beats both neighbouring scales.
  EXPECT_GT(r(32, 32, 32), bank.response(5)(32, 32, 32));
  EXPECT_GT(r(32, 32, 32), bank.response(7)(32, 32, 32));
}

TEST(LogFilter, AnalyticModelAgreesOnSmoothInput) {
  const auto plan = build_plan(6, 12, 2);
  const auto v = sphere_volume(48, 9.0);
  FilterOptions a;
  a.kernel = KernelModel::analytic;
  const auto st = respond_all_scales(v, plan);
  const auto sa = respond_all_scales(v, plan, a);
  // The 4-sigma truncation leaves the kernel a small nonzero sum, which shows
  // up inside the flat interior of the sphere at the smallest scale.
  for (std::size_t i = 0; i < plan.size(); ++i) EXPECT_NEAR(st[i](24, 24, 24), sa[i](24, 24, 24), 0.02);
}

TEST(LogFilter, PhysicalUnitsWithAnisotropicVoxels) {
  const auto plan = build_plan(6, 12, 2);
  const auto iso = sphere_volume(48, 9.0);
  phantom::Scene sc;
  sc.dims = {48, 48, 24};
  sc.spacing = {1, 1, 2};
  sc.primitives.push_back({phantom::Sphere{{24, 24, 24}, 9.0}, 1.0});
  const auto aniso = phantom::rasterize(sc, 5);
  const auto a = respond_all_scales(iso, plan);
  const auto b = respond_all_scales(aniso, plan);
  // The boundary entries are below one voxel along z and only warned about.
  for (std::size_t i = 1; i + 1 < plan.size(); ++i) EXPECT_NEAR(a[i](24, 24, 24), b[i](24, 24, 12), 0.05);
}

TEST(LogFilter, ParallelScalesAreIdentical) {
  const Volume v = random_volume({20, 20, 20}, {1, 1, 1}, 2);
  const auto plan = build_plan(2, 6, 3);
  FilterOptions par;
  par.workers = 3;
  const auto a = respond_all_scales(v, plan);
  const auto b = respond_all_scales(v, plan, par);
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) ASSERT_EQ(a[i].values()[j], b[i].values()[j]);
}

TEST(LogFilter, WarnsOnSubVoxelScalesAndRejectsTinyPadding) {
  const Volume v({12, 12, 12}, {2, 2, 2});
  const auto plan = build_plan(3, 6, 2);
  LogFilterBank bank(v, plan);
  EXPECT_FALSE(bank.warnings().empty());
  FilterOptions o;
  o.padding_sigmas = 0.0;
  EXPECT_THROW(LogFilterBank(Volume({4, 4, 4}, {1, 1, 1}), build_plan(3, 25, 10), o), InvalidArgument);
}

TEST(LogFilter, ZeroPaddingMatchesReplicateOnZeroBorder) {
  const auto plan = build_plan(4, 8, 2);
  const auto v = sphere_volume(40, 6.0);
  FilterOptions z;
  z.pad = PadMode::zero;
  const auto a = respond_all_scales(v, plan);
  const auto b = respond_all_scales(v, plan, z);
  // Background is zero, so both padding modes see the same padded image up to
  // the DC term, which has been removed from both.
  for (std::size_t i = 0; i < plan.size(); ++i) EXPECT_NEAR(a[i](20, 20, 20), b[i](20, 20, 20), 1e-9);
}
