#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "logcg/analytic.hpp"
#include "logcg/phantom.hpp"

using namespace logcg;
using namespace logcg::phantom;

namespace {

Scene base(std::size_t n = 32) {
  Scene s;
  s.dims = {n, n, n};
  s.spacing = {1, 1, 1};
  return s;
}

double excess(const Volume& v, double bg) {
  double m = 0.0;
  for (double x : v.values()) m += x - bg;
  return m * v.spacing().voxel_volume();
}

}  // namespace

TEST(Rasterize, SphereMass) {
  Scene s = base();
  s.background = -810.0;
  s.primitives.push_back({Sphere{{16, 16, 16}, 10.0}, -100.0});
  const auto v = rasterize(s, 3);
  const double expect = std::numbers::pi / 6.0 * 1000.0 * (-100.0 + 810.0);
  EXPECT_NEAR(excess(v, -810.0), expect, 0.02 * std::abs(expect));
}

TEST(Rasterize, EmptySceneIsBackground) {
  Scene s = base(8);
  s.background = 3.5;
  for (double x : rasterize(s).values()) EXPECT_EQ(x, 3.5);
}

TEST(Rasterize, SphereInsideWallIsIdempotent) {
  Scene wall = base(24);
  wall.primitives.push_back({Wall{{20, 0, 0}, {1, 0, 0}, 0.0}, 1.0});
  Scene both = wall;
  both.primitives.push_back({Sphere{{10, 12, 12}, 8.0}, 1.0});
  const auto a = rasterize(wall, 3);
  const auto b = rasterize(both, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.values()[i], b.values()[i]);
}

TEST(Rasterize, AdditiveCompositeSums) {
  Scene s = base(16);
  s.composite = Composite::add;
  s.primitives.push_back({Sphere{{8, 8, 8}, 6.0}, 1.0});
  s.primitives.push_back({Sphere{{8, 8, 8}, 6.0}, 1.0});
  EXPECT_DOUBLE_EQ(rasterize(s)(8, 8, 8), 2.0);
  s.composite = Composite::max;
  EXPECT_DOUBLE_EQ(rasterize(s)(8, 8, 8), 1.0);
}

TEST(Rasterize, CylinderCrossSection) {
  Scene s = base(24);
  s.primitives.push_back({Cylinder{{12, 12, 0}, {0, 0, 1}, 6.0, 0.0}, 1.0});
  const auto v = rasterize(s, 5);
  // Every z slice carries the disk area, ends included: the cylinder is infinite.
  for (std::size_t z : {0u, 12u, 23u}) {
    double area = 0.0;
    for (std::size_t y = 0; y < 24; ++y)
      for (std::size_t x = 0; x < 24; ++x) area += v(x, y, z);
    EXPECT_NEAR(area, std::numbers::pi * 9.0, 0.3);
  }
}

TEST(Rasterize, FiniteCylinderAndSlab) {
  Scene s = base(24);
  s.primitives.push_back({Cylinder{{12, 12, 12}, {0, 0, 2}, 4.0, 10.0}, 1.0});
  // The flat ends pass through voxel centers, so coarse sampling is lumpy.
  const auto v = rasterize(s, 12);
  EXPECT_NEAR(excess(v, 0.0), std::numbers::pi * 4.0 * 10.0, 1.0);
  EXPECT_EQ(v(12, 12, 2), 0.0);
  Scene w = base(16);
  w.primitives.push_back({Wall{{8, 0, 0}, {1, 0, 0}, 3.0}, 1.0});
  const auto wv = rasterize(w, 2);
  EXPECT_EQ(wv(6, 5, 5), 1.0);
  EXPECT_EQ(wv(3, 5, 5), 0.0);
  EXPECT_EQ(wv(10, 5, 5), 0.0);
  EXPECT_NEAR(excess(wv, 0.0), 3.0 * 256.0, 1e-9);
}

TEST(Rasterize, RefinementShrinksError) {
  // Against a finely sampled reference, doubling the sub-sample count reduces
  // the worst voxel error; it does not obey a 1/s^3 bound (see README).
  Scene s = base(20);
  s.primitives.push_back({Sphere{{10.3, 9.8, 10.1}, 9.0}, 1.0});
  const auto ref = rasterize(s, 24);
  double prev = 1.0;
  for (int ss : {2, 4, 8}) {
    const auto v = rasterize(s, ss);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(v.values()[i] - ref.values()[i]));
    EXPECT_LT(worst, prev);
    EXPECT_LE(worst, 1.0 / ss);
    prev = worst;
  }
}

TEST(Rasterize, ParallelSlabsIdentical) {
  Scene s = base(20);
  s.primitives.push_back({Sphere{{10, 10, 10}, 9.0}, 1.0});
  s.primitives.push_back({Cylinder{{4, 4, 4}, {1, 1, 0}, 3.0, 0.0}, 0.5});
  const auto a = rasterize(s, 3, 1);
  const auto b = rasterize(s, 3, 4);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.values()[i], b.values()[i]);
}

TEST(Rasterize, RejectsDegeneratePrimitives) {
  Scene s = base(8);
  s.primitives.push_back({Sphere{{4, 4, 4}, 0.0}, 1.0});
  EXPECT_THROW(rasterize(s), InvalidArgument);
  s.primitives[0] = {Cylinder{{4, 4, 4}, {0, 0, 0}, 2.0, 0.0}, 1.0};
  EXPECT_THROW(rasterize(s), InvalidArgument);
  s.primitives[0] = {Wall{{4, 4, 4}, {0, 0, 0}, 0.0}, 1.0};
  EXPECT_THROW(rasterize(s), InvalidArgument);
  s.primitives.clear();
  EXPECT_THROW(rasterize(s, 0), InvalidArgument);
}

TEST(Sweep, RejectsBadDistances) {
  const auto plan = build_plan(3, 25, 10);
  EXPECT_THROW(sweep_sphere_cylinder(10, {1.0, 2.0}, plan), InvalidArgument);
  EXPECT_THROW(sweep_sphere_wall(10, {1.0, -0.5}, plan), InvalidArgument);
  EXPECT_THROW(sweep_sphere_wall(10, {}, plan), InvalidArgument);
}

TEST(Sweep, IsolatedSphereNearAnalytic) {
  const auto plan = build_plan(3, 25, 10);
  SweepOptions o;
  o.grid = 64;
  const auto r = isolated_sphere(10.0, plan, o);
  EXPECT_EQ(r.scale_index, 6u);
  EXPECT_NEAR(r.response, analytic::sphere_response(plan[6].sigma_mm, 10.0), 0.05 * r.response);
}

TEST(Sweep, CylinderFarAndNear) {
  const auto plan = build_plan(3, 25, 10);
  SweepOptions o;
  o.grid = 72;
  const auto iso = isolated_sphere(10.0, plan, o);
  const auto rows = sweep_sphere_cylinder(10.0, {2.0, 0.2}, plan, o);
  EXPECT_FALSE(rows[0].merged);
  EXPECT_NEAR(rows[0].response, iso.response, 0.03 * iso.response);
  EXPECT_EQ(rows[0].scale_index, 6u);
  // Fully overlapped: the cylinder dominates and its matched scale
  // (sigma = d / (2 sqrt 2), about 12.25 mm sphere-equivalent) wins.
  EXPECT_TRUE(rows[1].merged);
  EXPECT_EQ(rows[1].scale_index, 7u);
}

TEST(Sweep, WallMonotone) {
  const auto plan = build_plan(3, 25, 10);
  SweepOptions o;
  o.grid = 72;
  const auto iso = isolated_sphere(10.0, plan, o);
  const auto rows = sweep_sphere_wall(10.0, {1.5, 0.75, 0.4}, plan, o);
  EXPECT_NEAR(rows[0].response, iso.response, 0.03 * iso.response);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i].response, rows[i - 1].response);
    EXPECT_LE(rows[i].size_estimate_mm, rows[i - 1].size_estimate_mm);
  }
}
