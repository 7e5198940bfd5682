#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "isco/camera.hpp"
#include "isco/sqcore.hpp"

namespace isco {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments and step count of one primitive's parameters.
struct AdamState {
  RawParams m{};
  RawParams v{};
  long step = 0;
};

/// One bias-corrected Adam descent step. `lr_scale`, when given, multiplies
/// the learning rate per entry.
void adam_step(RawParams& params, const RawParams& grad, AdamState& state, double lr, const AdamConfig& cfg = {},
               const RawParams* lr_scale = nullptr);

/// lr_end + (lr_start - lr_end) * (1 + cos(pi * step / total)) / 2
double cosine_lr(long step, long total_steps, double lr_start, double lr_end);

struct FitConfig {
  int max_superquadrics = 10;
  int steps_per_iter = 250;
  int rays_per_view = 500;
  int image_size = 128;
  double lambda = 0.6;
  /// Density slope while optimising and when rendering for evaluation.
  double gamma_opt = 20.0;
  /// When positive, gamma rises geometrically from gamma_opt to this value
  /// over the steps of every iteration.
  double gamma_opt_end = 150.0;
  double gamma_eval = 150.0;
  int samples_per_ray = 96;
  double extinction = 20.0;
  int grid_n = 64;
  double smoothing_sigma = 1.5;
  /// Radius of a freshly seeded sphere, relative to the scene radius.
  double init_radius_fraction = 0.1;
  double lr_start = 0.01;
  double lr_end = 0.001;
  /// Learning-rate multiplier of the Euler angles.
  double rotation_lr_scale = 1.0;
  AdamConfig adam;
  double eps_min = 0.1;
  double eps_max = 1.9;
  /// Slope of the logistic map from raw to constrained shape exponents.
  double eps_sharpness = 2.0;
  /// Stop adding primitives once the smoothed error peak drops below this.
  /// 0 disables.
  double early_stop_threshold = 0.0;
  /// Rays per view of a fixed held-out set scored after every iteration.
  /// 0 disables.
  int holdout_rays_per_view = 0;
  /// Draw training rays in proportion to their recent loss; uniform otherwise.
  bool importance_sampling = true;
  std::uint64_t seed = 0;
};

/// Throws InvalidConfig.
void validate(const FitConfig& cfg);

struct StepRecord {
  /// Iterations count from 1, steps from 0 within each iteration.
  int iter = 0;
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct FitTrace {
  /// Composition after each completed iteration.
  std::vector<Composition> snapshots;
  std::vector<StepRecord> steps;
  /// Peak of the smoothed error field at the start of each iteration.
  std::vector<double> grid_max;
  std::vector<double> holdout_loss;
  bool stopped_early = false;
};

struct FitResult {
  Composition composition;
  FitTrace trace;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Iterative recomposition: seed one sphere at the peak of the error grid,
/// then optimise every primitive jointly; repeat up to K times.
/// Throws EmptySilhouettes, InvalidConfig, NonFiniteGradient.
FitResult fit_isco(const std::vector<CameraView>& views, const SceneBounds& bounds, const FitConfig& cfg,
                   const ProgressFn& progress = {});

/// Non-iterative baseline: K spheres seeded at the top-K peaks of the
/// empty-scene error grid, optimised jointly for K * steps_per_iter steps.
FitResult fit_sco(const std::vector<CameraView>& views, const SceneBounds& bounds, const FitConfig& cfg,
                  const ProgressFn& progress = {});

}  // namespace isco
