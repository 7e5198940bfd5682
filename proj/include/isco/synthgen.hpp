#pragma once

#include <cstdint>
#include <vector>

#include "isco/assets.hpp"
#include "isco/camera.hpp"
#include "isco/rng.hpp"
#include "isco/sqcore.hpp"

namespace isco {

enum class ViewPolicy { Uniform, Cap };

struct GenSpec {
  int count_min = 1;
  int count_max = 1;
  /// Ranges are relative to the scene radius.
  double alpha_min = 0.25;
  double alpha_max = 0.55;
  double eps_min = 0.5;
  double eps_max = 1.5;
  /// Euler angles are drawn uniformly from [-max_angle, max_angle].
  double max_angle = 3.14159265358979323846;
  /// Primitive centers lie within this fraction of the radius from the scene center.
  double center_spread = 0.5;
  /// Minimum gap between bounding spheres (relative to the radius); negative
  /// disables the separation test.
  double min_gap = -1.0;

  int views = 16;
  ViewPolicy policy = ViewPolicy::Uniform;
  double cap_deg = 90.0;
  double fov_deg = 60.0;
  double camera_distance = 3.0;  // in scene radii
  int image_size = 128;
  /// Per-pixel flip probability applied after thresholding.
  double noise = 0.0;

  double gamma_eval = 150.0;
  int render_samples = 256;
  double extinction = 20.0;

  SceneBounds bounds;
  std::uint64_t seed = 0;
};

/// Throws InvalidConfig.
void validate(const GenSpec& spec);

/// Ground-truth composition. Throws GenerationExhausted.
Composition gen_scene(const GenSpec& spec, Rng& rng);

/// Poses and intrinsics only (silhouettes left empty).
std::vector<CameraView> gen_views(const GenSpec& spec, Rng& rng);

struct GeneratedScene {
  SceneBundle bundle;
  Composition ground_truth;
};

/// gen_scene + gen_views + binary masks rendered at gamma_eval.
GeneratedScene gen_bundle(const GenSpec& spec);

/// The 26 surface probes used by the containment test, in world space.
std::vector<Vec3> probe_points(const Superquadric& p);

}  // namespace isco
