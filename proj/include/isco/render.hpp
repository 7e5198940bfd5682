#pragma once

#include <cstdint>
#include <vector>

#include "isco/camera.hpp"
#include "isco/sqcore.hpp"

namespace isco {

struct RenderConfig {
  /// Slope of the logistic density.
  double gamma = 150.0;
  int samples_per_ray = 96;
  std::uint64_t seed = 0;
  /// Optical depth accumulated per unit length of material with density 1.
  double extinction = 20.0;
};

/// Throws InvalidConfig.
void validate(const RenderConfig& cfg);

/// Stratified depths: bin i of [t_near, t_far] holds one uniformly jittered
/// sample. delta[i] = t[i+1] - t[i], with t[n] := t_far.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
  double bin = 0.0;
};

/// Key of the jitter stream for one ray.
std::uint64_t ray_key(std::uint64_t seed, std::uint64_t view, std::uint64_t pixel, std::uint64_t pass = 0);

void stratify(const Ray& r, int n, std::uint64_t key, RaySamples& out);
RaySamples stratify(const Ray& r, int n, std::uint64_t key);

/// Density samples with gamma * (f - 1) above this are treated as exactly 0.
inline constexpr double kDensityCutoff = 50.0;

/// Accumulated density of one primitive, 1 - exp(-extinction * sum sigma_i delta_i).
double render_primitive(const Ray& r, const Superquadric& p, const RenderConfig& cfg, std::uint64_t key = 0);

/// min(sum_k D_k, 1) with every primitive marched over the same samples.
double render_composition(const Ray& r, const Composition& s, const RenderConfig& cfg, std::uint64_t key = 0);

/// Per-pixel render_composition; jitter keyed by (cfg.seed, view_id, pixel).
std::vector<double> render_image(const CameraView& view, const Composition& s, const RenderConfig& cfg,
                                 const SceneBounds& bounds, int view_id = 0);

}  // namespace isco
