#include "isco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "isco/errors.hpp"

namespace isco {

std::size_t OccupancyGrid::count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

Vec3 OccupancyGrid::cell_center(int i, int j, int k) const {
  const double h = 0.5 * m;
  return center + spacing * Vec3(i + 0.5 - h, j + 0.5 - h, k + 0.5 - h);
}

OccupancyGrid voxelize(const Composition& s, int m, const SceneBounds& bounds) {
  if (m < 2) throw InvalidConfig("occupancy resolution must be at least 2");
  OccupancyGrid g;
  g.m = m;
  g.center = bounds.center;
  g.spacing = 2.0 * bounds.radius / m;
  g.occupied.assign(static_cast<std::size_t>(m) * m * m, 0);
  for (const auto& p : s.items) {
    Vec3 half = Vec3::Zero();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) half[r] += std::abs(p.rotation()(r, c)) * p.alpha()[c];
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      const double base = bounds.center[a] - bounds.radius;
      lo[a] = std::clamp(static_cast<int>(std::floor((p.translation()[a] - half[a] - base) / g.spacing)), 0, m - 1);
      hi[a] = std::clamp(static_cast<int>(std::ceil((p.translation()[a] + half[a] - base) / g.spacing)), 0, m - 1);
    }
#pragma omp parallel for schedule(static)
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const std::size_t idx = (static_cast<std::size_t>(k) * m + j) * m + i;
          if (g.occupied[idx]) continue;
          if (implicit_value_world(g.cell_center(i, j, k), p) < 1.0) g.occupied[idx] = 1;
        }
  }
  return g;
}

double iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (a.m != b.m || a.spacing != b.spacing || a.center != b.center || a.occupied.size() != b.occupied.size())
    throw GridMismatch("occupancy grids have different geometry");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.occupied.size(); ++i) {
    inter += a.occupied[i] & b.occupied[i];
    uni += a.occupied[i] | b.occupied[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Parametric patch table of one primitive: cumulative cell areas over an
// (eta, omega) grid.
struct PatchTable {
  int n_eta = 0;
  int n_omega = 0;
  std::vector<double> cdf;
  double total = 0.0;
};

PatchTable build_patches(const Superquadric& p, int g) {
  PatchTable t;
  t.n_eta = 2 * g;
  t.n_omega = 4 * g;
  t.cdf.resize(static_cast<std::size_t>(t.n_eta) * t.n_omega);
  auto pt = [&](int r, int c) {
    const double eta = -kHalfPi + std::numbers::pi * r / t.n_eta;
    const double omega = -std::numbers::pi + 2.0 * std::numbers::pi * c / t.n_omega;
    return surface_point_canonical(p.alpha(), p.epsilon(), eta, omega);
  };
  double acc = 0.0;
  for (int r = 0; r < t.n_eta; ++r)
    for (int c = 0; c < t.n_omega; ++c) {
      const Vec3 a = pt(r, c), b = pt(r, c + 1), cc = pt(r + 1, c + 1), d = pt(r + 1, c);
      acc += 0.5 * (b - a).cross(cc - a).norm() + 0.5 * (cc - a).cross(d - a).norm();
      t.cdf[static_cast<std::size_t>(r) * t.n_omega + c] = acc;
    }
  t.total = acc;
  return t;
}

}  // namespace

double surface_area(const Superquadric& p, int g) { return build_patches(p, g).total; }

PointSet sample_surface(const Composition& s, std::size_t n, Rng& rng) {
  if (s.empty()) throw EmptyComposition("cannot sample the surface of an empty composition");
  if (n == 0) throw InvalidConfig("point count must be at least 1");
  std::vector<PatchTable> tables;
  std::vector<double> prim_cdf;
  double acc = 0.0;
  for (const auto& p : s.items) {
    tables.push_back(build_patches(p, 64));
    acc += tables.back().total;
    prim_cdf.push_back(acc);
  }
  PointSet out;
  out.reserve(n);
  const std::size_t max_attempts = 1000 * n + 100000;
  for (std::size_t attempt = 0; out.size() < n && attempt < max_attempts; ++attempt) {
    const auto pi = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(prim_cdf.begin(), prim_cdf.end(), rng.uniform() * acc) -
                                     prim_cdf.begin(),
                                 static_cast<std::ptrdiff_t>(prim_cdf.size()) - 1));
    const PatchTable& t = tables[pi];
    const auto cell = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(t.cdf.begin(), t.cdf.end(), rng.uniform() * t.total) - t.cdf.begin(),
                                 static_cast<std::ptrdiff_t>(t.cdf.size()) - 1));
    const int r = static_cast<int>(cell / t.n_omega);
    const int c = static_cast<int>(cell % t.n_omega);
    const double eta = -kHalfPi + std::numbers::pi * (r + rng.uniform()) / t.n_eta;
    const double omega = -std::numbers::pi + 2.0 * std::numbers::pi * (c + rng.uniform()) / t.n_omega;
    const Superquadric& p = s.items[pi];
    const Vec3 x = canonical_to_world(surface_point_canonical(p.alpha(), p.epsilon(), eta, omega), p);
    bool hidden = false;
    for (std::size_t q = 0; q < s.size() && !hidden; ++q)
      if (q != pi && implicit_value_world(x, s.items[q]) < 1.0 - 1e-6) hidden = true;
    if (!hidden) out.push_back(x);
  }
  return out;
}

namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Mean over `from` of the distance to the nearest point of `to`.
double mean_nearest(const PointSet& from, const PointSet& to) {
  std::vector<std::pair<BPoint, std::size_t>> entries;
  entries.reserve(to.size());
  for (std::size_t i = 0; i < to.size(); ++i) entries.emplace_back(BPoint(to[i].x(), to[i].y(), to[i].z()), i);
  const bgi::rtree<std::pair<BPoint, std::size_t>, bgi::rstar<16>> tree(entries.begin(), entries.end());
  std::vector<double> d(from.size());
  const int n = static_cast<int>(from.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<BPoint, std::size_t>> hit;
    tree.query(bgi::nearest(BPoint(from[i].x(), from[i].y(), from[i].z()), 1), std::back_inserter(hit));
    d[i] = distance(from[i], to[hit.front().second]);
  }
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l1(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) throw EmptyPointSet("chamfer distance needs two non-empty point sets");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

}  // namespace isco
