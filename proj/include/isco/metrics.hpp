#pragma once

#include <cstdint>
#include <vector>

#include "isco/camera.hpp"
#include "isco/rng.hpp"
#include "isco/sqcore.hpp"

namespace isco {

/// M^3 boolean cells tiling the cube center +- half_extent.
struct OccupancyGrid {
  int m = 0;
  Vec3 center = Vec3::Zero();
  double spacing = 0.0;
  std::vector<std::uint8_t> occupied;

  std::size_t count() const;
  Vec3 cell_center(int i, int j, int k) const;
};

/// A cell is occupied iff its center satisfies f < 1 for some primitive.
OccupancyGrid voxelize(const Composition& s, int m, const SceneBounds& bounds);

/// |a & b| / |a | b|, 1 when both are empty. Throws GridMismatch.
double iou(const OccupancyGrid& a, const OccupancyGrid& b);

using PointSet = std::vector<Vec3>;

/// n points on the surface of the union: primitives and surface patches are
/// chosen proportionally to area, points strictly inside another primitive
/// are rejected. Throws EmptyComposition.
PointSet sample_surface(const Composition& s, std::size_t n, Rng& rng);

/// Surface area of one primitive estimated from a (2g x 4g) parametric mesh.
double surface_area(const Superquadric& p, int g = 64);

/// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). Throws EmptyPointSet.
double chamfer_l1(const PointSet& a, const PointSet& b);

}  // namespace isco
