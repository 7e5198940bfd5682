#pragma once

#include <vector>

#include "isco/camera.hpp"
#include "isco/objective.hpp"
#include "isco/render.hpp"
#include "isco/rng.hpp"
#include "isco/sqcore.hpp"

namespace isco {

/// Regular grid of N^3 voxel centers, x index fastest.
struct GridGeometry {
  int n = 64;
  Vec3 center = Vec3::Zero();
  double spacing = 1.0;

  /// Grid whose outermost voxel centers span the bounding sphere's diameter.
  static GridGeometry enclosing(const SceneBounds& bounds, int n);

  Vec3 voxel_center(int i, int j, int k) const {
    const double h = 0.5 * (n - 1);
    return center + spacing * Vec3(i - h, j - h, k - h);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * n + j) * n + i;
  }
  std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }
  /// Continuous voxel coordinates of a world point.
  Vec3 to_voxel(const Vec3& x) const { return (x - center) / spacing + Vec3::Constant(0.5 * (n - 1)); }
};

struct VoxelGrid {
  GridGeometry geom;
  std::vector<double> values;

  VoxelGrid() = default;
  explicit VoxelGrid(const GridGeometry& g, double fill = 0.0) : geom(g), values(g.size(), fill) {}

  double& at(int i, int j, int k) { return values[geom.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[geom.index(i, j, k)]; }
};

/// Composition density min(sum_k sigma_k, 1) at every voxel center.
VoxelGrid eval_grid_density(const Composition& s, const GridGeometry& geom, double gamma);

/// The (up to) 8 voxels with nonzero trilinear weight at a point.
struct TrilinearStencil {
  int count = 0;
  std::size_t index[8];
  double weight[8];
};

TrilinearStencil trilinear_stencil(const GridGeometry& geom, const Vec3& x);

/// sum_g V_g prod_i max(0, 1 - |x_i - g_i| / l). Zero beyond one spacing
/// outside the grid.
double trilinear_sample(const VoxelGrid& grid, const Vec3& x);

struct GridGradient {
  double loss = 0.0;
  /// dL/dV_g.
  VoxelGrid gradient;
};

/// Loss of the grid rendered along the batch rays, counting only object
/// rays (the lambda = 0 weighting).
double grid_loss(const VoxelGrid& density, const RayBatch& batch, const RenderConfig& cfg);

/// grid_loss and its exact gradient w.r.t. every voxel value.
GridGradient grid_error_gradient(const VoxelGrid& density, const RayBatch& batch, const RenderConfig& cfg);

/// Same, drawing rays_per_view uniform rays per view from `rng`.
GridGradient grid_error_gradient(const VoxelGrid& density, const std::vector<CameraView>& views,
                                 const SceneBounds& bounds, int rays_per_view, Rng& rng, const RenderConfig& cfg,
                                 std::uint64_t pass = 0);

/// Separable Gaussian blur (sigma in voxels), zero outside the grid.
VoxelGrid gaussian_smooth(const VoxelGrid& grid, double sigma_voxels);

/// Gaussian-smoothed positive part of -dL/dV: where added density helps most.
VoxelGrid descent_field(const VoxelGrid& error_gradient, double sigma_voxels);

struct Proposal {
  Superquadric primitive;
  Vec3 location = Vec3::Zero();
  double peak = 0.0;
};

/// Sphere of radius init_radius_fraction * scene radius at the argmax of the
/// descent field. Throws DegenerateErrorField when the field is ~0.
Proposal propose_init(const VoxelGrid& error_gradient, double sigma_voxels, const SceneBounds& bounds,
                      const ParamBounds& param_bounds, double init_radius_fraction = 0.1);

/// Greedy non-maximum suppression on a field: k voxel centers, each at
/// least nms_radius voxels from those before it.
std::vector<Vec3> top_k_peaks(const VoxelGrid& field, int k, double nms_radius_voxels);

}  // namespace isco
