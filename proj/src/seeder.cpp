#include "isco/seeder.hpp"

#include <algorithm>
#include <cmath>

#include "isco/detail/march.hpp"
#include "isco/errors.hpp"

namespace isco {

namespace {
constexpr double kDegeneratePeak = 1e-9;
}

GridGeometry GridGeometry::enclosing(const SceneBounds& bounds, int n) {
  if (n < 2) throw InvalidConfig("grid resolution must be at least 2");
  GridGeometry g;
  g.n = n;
  g.center = bounds.center;
  g.spacing = 2.0 * bounds.radius / (n - 1);
  return g;
}

VoxelGrid eval_grid_density(const Composition& s, const GridGeometry& geom, double gamma) {
  VoxelGrid grid(geom, 0.0);
  const int n = geom.n;
  for (const auto& p : s.items) {
    const auto prim = detail::PrimitiveT<double>::from(p, gamma);
    // World AABB of the culling box; voxels outside it have sigma < e^-50.
    Vec3 half_world = Vec3::Zero();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) half_world[r] += std::abs(p.rotation()(r, c)) * prim.half[c];
    const Vec3 lo = geom.to_voxel(p.translation() - half_world);
    const Vec3 hi = geom.to_voxel(p.translation() + half_world);
    int a[3], b[3];
    for (int i = 0; i < 3; ++i) {
      a[i] = std::clamp(static_cast<int>(std::floor(lo[i])), 0, n - 1);
      b[i] = std::clamp(static_cast<int>(std::ceil(hi[i])), 0, n - 1);
    }
#pragma omp parallel for schedule(static)
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) {
          const double f = implicit_value_world(geom.voxel_center(i, j, k), p);
          const double z = gamma * (1.0 - f);
          if (!(z >= -kDensityCutoff)) continue;
          grid.values[geom.index(i, j, k)] += logistic(z);
        }
  }
  for (double& v : grid.values) v = std::min(v, 1.0);
  return grid;
}

TrilinearStencil trilinear_stencil(const GridGeometry& geom, const Vec3& x) {
  TrilinearStencil st;
  const Vec3 u = geom.to_voxel(x);
  int base[3];
  double frac[3];
  for (int i = 0; i < 3; ++i) {
    if (!(u[i] > -1.0 && u[i] < geom.n)) return st;
    const double fl = std::floor(u[i]);
    base[i] = static_cast<int>(fl);
    frac[i] = u[i] - fl;
  }
  for (int c = 0; c < 8; ++c) {
    int idx[3];
    double w = 1.0;
    bool inside = true;
    for (int i = 0; i < 3; ++i) {
      const int bit = (c >> i) & 1;
      idx[i] = base[i] + bit;
      if (idx[i] < 0 || idx[i] >= geom.n) {
        inside = false;
        break;
      }
      w *= bit ? frac[i] : 1.0 - frac[i];
    }
    if (!inside || w == 0.0) continue;
    st.index[st.count] = geom.index(idx[0], idx[1], idx[2]);
    st.weight[st.count] = w;
    ++st.count;
  }
  return st;
}

double trilinear_sample(const VoxelGrid& grid, const Vec3& x) {
  const TrilinearStencil st = trilinear_stencil(grid.geom, x);
  double v = 0.0;
  for (int c = 0; c < st.count; ++c) v += grid.values[st.index[c]] * st.weight[c];
  return v;
}

namespace {

// Optical depth of the resampled grid along one ray.
double grid_depth(const VoxelGrid& grid, const Ray& r, const RaySamples& s, double extinction) {
  double tau = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) tau += trilinear_sample(grid, ray_point(r, s.t[i])) * s.delta[i];
  return extinction * tau;
}

bool contributes(const RayRecord& rec) { return !rec.ray.empty() && ray_weight(rec.target, 0.0) > 0.0; }

}  // namespace

double grid_loss(const VoxelGrid& density, const RayBatch& batch, const RenderConfig& cfg) {
  const int n = static_cast<int>(batch.size());
  std::vector<double> per_ray(batch.size(), 0.0);
#pragma omp parallel
  {
    RaySamples s;
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
      const RayRecord& rec = batch.rays[i];
      if (rec.ray.empty()) {
        per_ray[i] = ray_weight(rec.target, 0.0) * rec.target * rec.target;
        continue;
      }
      if (!contributes(rec)) continue;
      stratify(rec.ray, cfg.samples_per_ray, rec.key, s);
      const double d = -std::expm1(-grid_depth(density, rec.ray, s, cfg.extinction));
      const double e = d - rec.target;
      per_ray[i] = e * e;
    }
  }
  double loss = 0.0;
  for (double v : per_ray) loss += v;
  return loss;
}

GridGradient grid_error_gradient(const VoxelGrid& density, const RayBatch& batch, const RenderConfig& cfg) {
  GridGradient out;
  out.gradient = VoxelGrid(density.geom, 0.0);
  const int n = static_cast<int>(batch.size());
  std::vector<double> per_ray(batch.size(), 0.0);
  std::vector<double> dl_dtau(batch.size(), 0.0);
#pragma omp parallel
  {
    RaySamples s;
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
      const RayRecord& rec = batch.rays[i];
      if (rec.ray.empty()) {
        per_ray[i] = ray_weight(rec.target, 0.0) * rec.target * rec.target;
        continue;
      }
      if (!contributes(rec)) continue;
      stratify(rec.ray, cfg.samples_per_ray, rec.key, s);
      const double tau = grid_depth(density, rec.ray, s, cfg.extinction);
      const double d = -std::expm1(-tau);
      const double e = d - rec.target;
      per_ray[i] = e * e;
      dl_dtau[i] = 2.0 * e * std::exp(-tau);
    }
  }
  // Scatter in ray order.
  RaySamples s;
  for (int i = 0; i < n; ++i) {
    out.loss += per_ray[i];
    if (dl_dtau[i] == 0.0) continue;
    const RayRecord& rec = batch.rays[i];
    stratify(rec.ray, cfg.samples_per_ray, rec.key, s);
    for (std::size_t q = 0; q < s.t.size(); ++q) {
      const double dl_dk = dl_dtau[i] * cfg.extinction * s.delta[q];
      const TrilinearStencil st = trilinear_stencil(density.geom, ray_point(rec.ray, s.t[q]));
      for (int c = 0; c < st.count; ++c) out.gradient.values[st.index[c]] += dl_dk * st.weight[c];
    }
  }
  return out;
}

GridGradient grid_error_gradient(const VoxelGrid& density, const std::vector<CameraView>& views,
                                 const SceneBounds& bounds, int rays_per_view, Rng& rng, const RenderConfig& cfg,
                                 std::uint64_t pass) {
  const RayBatch batch = uniform_batch(views, bounds, rays_per_view, rng, cfg.seed, pass);
  return grid_error_gradient(density, batch, cfg);
}

VoxelGrid gaussian_smooth(const VoxelGrid& grid, double sigma_voxels) {
  if (!(sigma_voxels > 0.0)) return grid;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_voxels));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    kernel[d + radius] = std::exp(-0.5 * d * d / (sigma_voxels * sigma_voxels));
    total += kernel[d + radius];
  }
  for (double& k : kernel) k /= total;

  const int n = grid.geom.n;
  VoxelGrid a = grid;
  VoxelGrid b(grid.geom, 0.0);
  for (int axis = 0; axis < 3; ++axis) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int idx[3] = {i, j, k};
          const int center = idx[axis];
          double acc = 0.0;
          for (int d = -radius; d <= radius; ++d) {
            const int c = center + d;
            if (c < 0 || c >= n) continue;
            idx[axis] = c;
            acc += kernel[d + radius] * a.values[grid.geom.index(idx[0], idx[1], idx[2])];
          }
          b.values[grid.geom.index(i, j, k)] = acc;
        }
    std::swap(a, b);
  }
  return a;
}

VoxelGrid descent_field(const VoxelGrid& error_gradient, double sigma_voxels) {
  VoxelGrid pos = error_gradient;
  for (double& v : pos.values) v = std::max(-v, 0.0);
  return gaussian_smooth(pos, sigma_voxels);
}

namespace {

Vec3 voxel_center_of(const GridGeometry& g, std::size_t flat) {
  const int n = g.n;
  const int i = static_cast<int>(flat % n);
  const int j = static_cast<int>((flat / n) % n);
  const int k = static_cast<int>(flat / (static_cast<std::size_t>(n) * n));
  return g.voxel_center(i, j, k);
}

}  // namespace

Proposal propose_init(const VoxelGrid& error_gradient, double sigma_voxels, const SceneBounds& bounds,
                      const ParamBounds& param_bounds, double init_radius_fraction) {
  for (double v : error_gradient.values)
    if (!std::isfinite(v)) throw NonFiniteGradient("non-finite value in error grid");
  const VoxelGrid field = descent_field(error_gradient, sigma_voxels);
  const auto it = std::max_element(field.values.begin(), field.values.end());
  Proposal out;
  out.peak = *it;
  if (!(out.peak > kDegeneratePeak)) throw DegenerateErrorField("error field is uniformly ~0");
  out.location = voxel_center_of(field.geom, static_cast<std::size_t>(it - field.values.begin()));
  out.primitive = Superquadric::sphere(out.location, init_radius_fraction * bounds.radius, param_bounds);
  return out;
}

std::vector<Vec3> top_k_peaks(const VoxelGrid& field, int k, double nms_radius_voxels) {
  std::vector<std::size_t> order(field.values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return field.values[a] > field.values[b]; });
  std::vector<Vec3> peaks;
  std::vector<Vec3> picked_vox;
  const double r2 = nms_radius_voxels * nms_radius_voxels;
  for (std::size_t flat : order) {
    if (static_cast<int>(peaks.size()) == k) break;
    const Vec3 c = voxel_center_of(field.geom, flat);
    const Vec3 v = field.geom.to_voxel(c);
    bool suppressed = false;
    for (const auto& p : picked_vox)
      if ((p - v).squaredNorm() < r2) {
        suppressed = true;
        break;
      }
    if (suppressed) continue;
    picked_vox.push_back(v);
    peaks.push_back(c);
  }
  return peaks;
}

}  // namespace isco
