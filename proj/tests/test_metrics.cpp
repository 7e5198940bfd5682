#include <cmath>
#include <limits>

#include "doctest.h"
#include "isco/errors.hpp"
#include "isco/metrics.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace isco;

namespace {

double brute_chamfer(const PointSet& a, const PointSet& b) {
  auto one_way = [](const PointSet& x, const PointSet& y) {
    double sum = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) {
        const double dx = p.x() - q.x(), dy = p.y() - q.y(), dz = p.z() - q.z();
        best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
      }
      sum += best;
    }
    return sum / static_cast<double>(x.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

// Area of |x|^40 + |y|^40 + |z|^40 = 1: 48 times the graph x(y, z) over the
// wedge 0 <= z <= y <= x.
double graph_area_p40() {
  const double p = 40.0;
  const int n = 1500;
  double area = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;
    const double y_max = std::pow((1.0 - std::pow(z, p)) / 2.0, 1.0 / p);
    if (y_max <= z) continue;
    const double dy = (y_max - z) / n;
    for (int j = 0; j < n; ++j) {
      const double y = z + (j + 0.5) * dy;
      const double r = 1.0 - std::pow(y, p) - std::pow(z, p);
      const double k = std::pow(r, 1.0 / p - 1.0);
      const double gy = std::pow(y, p - 1) * k, gz = std::pow(z, p - 1) * k;
      area += std::sqrt(1.0 + gy * gy + gz * gz) * dy / n;
    }
  }
  return 48.0 * area;
}

OccupancyGrid tiny_grid() {
  OccupancyGrid g;
  g.m = 2;
  g.spacing = 1.0;
  g.occupied.assign(8, 0);
  return g;
}

}  // namespace

TEST_CASE("voxelizing nothing gives an empty grid") {
  const OccupancyGrid g = voxelize(Composition{}, 16, SceneBounds{});
  CHECK(g.count() == 0);
  CHECK(g.occupied.size() == 16 * 16 * 16);
  CHECK_THROWS_AS(voxelize(Composition{}, 1, SceneBounds{}), InvalidConfig);
}

TEST_CASE("unit sphere voxel volume") {
  const Composition s{{Superquadric::sphere(Vec3::Zero(), 1.0, ParamBounds{})}};
  const OccupancyGrid g = voxelize(s, 64, SceneBounds{Vec3::Zero(), 1.2});
  const double fraction = static_cast<double>(g.count()) / std::pow(64.0, 3);
  const double expected = (4.0 * M_PI / 3.0) / std::pow(2.4, 3);
  CHECK(std::abs(fraction / expected - 1.0) < 0.02);
  CHECK(std::abs(g.count() * std::pow(g.spacing, 3) / (4.0 * M_PI / 3.0) - 1.0) < 0.02);
}

TEST_CASE("voxelization agrees with the point-wise oracle") {
  Rng rng(1);
  Composition s;
  for (int i = 0; i < 3; ++i) s.items.push_back(test::random_primitive(rng));
  const OccupancyGrid g = voxelize(s, 32, SceneBounds{});
  for (int k = 0; k < 32; ++k)
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 32; ++i) {
        const Vec3 c = g.cell_center(i, j, k);
        CHECK(c.cwiseAbs().maxCoeff() < 1.0);
        bool inside = false;
        // Density above 1/2 at any gamma is the same as f < 1.
        for (const auto& p : s.items)
          inside = inside || test::oracle_density(c, p.alpha(), p.epsilon(), p.euler(), p.translation(), 1.0) > 0.5;
        CHECK(static_cast<bool>(g.occupied[(static_cast<std::size_t>(k) * 32 + j) * 32 + i]) == inside);
      }
}

TEST_CASE("larger scales voxelize to a superset") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto p = test::random_primitive(rng);
    const auto q = Superquadric::from_shape(1.1 * p.alpha(), p.epsilon(), p.euler(), p.translation(), p.bounds());
    const OccupancyGrid a = voxelize(Composition{{p}}, 48, SceneBounds{});
    const OccupancyGrid b = voxelize(Composition{{q}}, 48, SceneBounds{});
    for (std::size_t i = 0; i < a.occupied.size(); ++i)
      if (a.occupied[i]) CHECK(b.occupied[i]);
  }
}

TEST_CASE("iou analytic cases") {
  OccupancyGrid a = tiny_grid(), b = tiny_grid();
  CHECK(iou(a, b) == 1.0);
  a.occupied[0] = a.occupied[1] = 1;
  CHECK(iou(a, a) == 1.0);
  b.occupied[5] = b.occupied[6] = 1;
  CHECK(iou(a, b) == 0.0);
  b = tiny_grid();
  b.occupied[1] = b.occupied[2] = 1;
  CHECK(iou(a, b) == 1.0 / 3.0);
  CHECK(iou(b, a) == iou(a, b));
  OccupancyGrid c = tiny_grid();
  c.spacing = 0.5;
  CHECK_THROWS_AS(iou(a, c), GridMismatch);
  const OccupancyGrid big = voxelize(Composition{}, 4, SceneBounds{});
  CHECK_THROWS_AS(iou(a, big), GridMismatch);
}

TEST_CASE("voxelization is deterministic") {
  Rng rng(3);
  Composition s;
  for (int i = 0; i < 2; ++i) s.items.push_back(test::random_primitive(rng));
  CHECK(iou(voxelize(s, 64, SceneBounds{}), voxelize(s, 64, SceneBounds{})) == 1.0);
}

TEST_CASE("surface samples lie on the union surface") {
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    Composition s;
    for (int i = 0; i < 3; ++i) s.items.push_back(test::random_primitive(rng, ParamBounds{}, 0.15, 0.4, 0.25));
    const PointSet pts = sample_surface(s, 2000, rng);
    CHECK(pts.size() == 2000);
    for (const auto& x : pts) {
      double closest = std::numeric_limits<double>::infinity();
      bool inside_other = false;
      for (const auto& p : s.items) {
        const double f = implicit_value_world(x, p);
        closest = std::min(closest, std::abs(f - 1.0));
        inside_other = inside_other || f < 1.0 - 1e-6;
      }
      CHECK(closest < 1e-3);
      CHECK_FALSE(inside_other);
    }
  }
}

TEST_CASE("sphere samples are uniform over octants") {
  Rng rng(5);
  const Composition s{{Superquadric::sphere(Vec3(0.1, -0.2, 0.05), 0.5, ParamBounds{})}};
  const int n = 16000;
  const PointSet pts = sample_surface(s, n, rng);
  int counts[8] = {};
  for (const auto& x : pts) {
    const Vec3 d = x - Vec3(0.1, -0.2, 0.05);
    ++counts[(d.x() > 0) + 2 * (d.y() > 0) + 4 * (d.z() > 0)];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 8.0) * (c - n / 8.0) / (n / 8.0);
  // 99.9th percentile of chi-squared with 7 degrees of freedom.
  CHECK(chi2 < 24.32);
}

TEST_CASE("primitives are sampled in proportion to their area") {
  Rng rng(6);
  const Composition s{{Superquadric::sphere(Vec3(-0.5, 0, 0), 0.2, ParamBounds{}),
                       Superquadric::sphere(Vec3(0.4, 0, 0), 0.4, ParamBounds{})}};
  const int n = 20000;
  const PointSet pts = sample_surface(s, n, rng);
  int small = 0;
  for (const auto& x : pts) small += x.x() < 0.0;
  const double p = 0.2;
  CHECK(std::abs(small - n * p) < 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("surface area of a sphere") {
  const auto s = Superquadric::sphere(Vec3::Zero(), 0.7, ParamBounds{});
  CHECK(surface_area(s) == doctest::Approx(4 * M_PI * 0.49).epsilon(1e-3));
  ParamBounds wide;
  wide.eps_min = 0.01;
  const auto box = Superquadric::from_shape(Vec3::Ones(), Vec2(0.05, 0.05), Vec3::Zero(), Vec3::Zero(), wide);
  CHECK(surface_area(box) == doctest::Approx(graph_area_p40()).epsilon(1e-4));
}

TEST_CASE("sampling rejects bad requests") {
  Rng rng(7);
  CHECK_THROWS_AS(sample_surface(Composition{}, 10, rng), EmptyComposition);
  const Composition s{{Superquadric::sphere(Vec3::Zero(), 0.5, ParamBounds{})}};
  CHECK_THROWS_AS(sample_surface(s, 0, rng), InvalidConfig);
}

TEST_CASE("chamfer examples") {
  const PointSet a{{0, 0, 0}}, b{{1, 0, 0}};
  CHECK(chamfer_l1(a, b) == 1.0);
  CHECK(chamfer_l1(a, a) == 0.0);
  CHECK_THROWS_AS(chamfer_l1(a, PointSet{}), EmptyPointSet);
  CHECK_THROWS_AS(chamfer_l1(PointSet{}, a), EmptyPointSet);
}

TEST_CASE("chamfer equals the brute-force oracle exactly") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    PointSet a, b;
    for (int i = 0; i < 200; ++i) a.push_back(test::random_point(rng, 1.0));
    for (int i = 0; i < 200; ++i) b.push_back(test::random_point(rng, 1.0));
    CHECK(chamfer_l1(a, b) == brute_chamfer(a, b));
    CHECK(chamfer_l1(a, b) == chamfer_l1(b, a));
    CHECK(chamfer_l1(a, b) >= 0.0);
  }
}
