#include "isco/fitter.hpp"

#include <cmath>
#include <numbers>

#include "isco/errors.hpp"
#include "isco/grad.hpp"
#include "isco/objective.hpp"
#include "isco/rng.hpp"
#include "isco/seeder.hpp"

namespace isco {

void adam_step(RawParams& params, const RawParams& grad, AdamState& state, double lr, const AdamConfig& cfg,
               const RawParams* lr_scale) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int i = 0; i < kNumParams; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double step_lr = lr_scale ? lr * (*lr_scale)[i] : lr;
    params[i] -= step_lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.eps);
  }
}

double cosine_lr(long step, long total_steps, double lr_start, double lr_end) {
  if (total_steps <= 0) return lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * frac));
}

void validate(const FitConfig& cfg) {
  if (cfg.max_superquadrics < 1) throw InvalidConfig("max_superquadrics must be at least 1");
  if (cfg.steps_per_iter < 0) throw InvalidConfig("steps_per_iter must be non-negative");
  if (cfg.rays_per_view < 1) throw InvalidConfig("rays_per_view must be at least 1");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0, 1]");
  if (!(cfg.lr_end > 0.0) || !(cfg.lr_start >= cfg.lr_end)) throw InvalidConfig("need lr_start >= lr_end > 0");
  if (!(cfg.gamma_opt > 0.0) || !(cfg.gamma_eval > 0.0)) throw InvalidConfig("gamma must be positive");
  if (!(cfg.gamma_opt_end >= 0.0)) throw InvalidConfig("gamma_opt_end must be non-negative");
  if (cfg.samples_per_ray < 2) throw InvalidConfig("samples_per_ray must be at least 2");
  if (cfg.grid_n < 2) throw InvalidConfig("grid resolution must be at least 2");
  if (!(cfg.eps_min > 0.0 && cfg.eps_max > cfg.eps_min)) throw InvalidConfig("need 0 < eps_min < eps_max");
  if (!(cfg.eps_sharpness > 0.0)) throw InvalidConfig("eps_sharpness must be positive");
  if (!(cfg.rotation_lr_scale > 0.0)) throw InvalidConfig("rotation_lr_scale must be positive");
  if (!(cfg.init_radius_fraction > 0.0)) throw InvalidConfig("init_radius_fraction must be positive");
}

namespace {

enum Stream : std::uint64_t { kPixelStream = 1, kGridStream = 2, kJitterStream = 3, kHoldoutStream = 4 };

struct FitContext {
  const std::vector<CameraView>& views;
  const SceneBounds& bounds;
  const FitConfig& cfg;
  const ProgressFn& progress;
  ParamBounds param_bounds;
  GridGeometry geom;
  RenderConfig opt_render;
  RenderConfig grid_render;
  ImportanceSampler sampler;
  Rng pixel_rng;
  Rng grid_rng;
  RayBatch holdout;
  RawParams lr_scale{};
  long global_step = 0;
  long total_steps = 0;

  FitContext(const std::vector<CameraView>& v, const SceneBounds& b, const FitConfig& c, const ProgressFn& p)
      : views(v),
        bounds(b),
        cfg(c),
        progress(p),
        sampler(v),
        pixel_rng(hash_key({c.seed, kPixelStream})),
        grid_rng(hash_key({c.seed, kGridStream})) {
    validate(cfg);
    bool any_inside = false;
    for (const auto& view : views) {
      validate_view(view, 1e-6);
      if (view.silhouette.empty()) throw DimensionMismatch("view without silhouette");
      for (float s : view.silhouette)
        if (s >= kMaskEps) {
          any_inside = true;
          break;
        }
    }
    if (views.empty() || !any_inside) throw EmptySilhouettes("no view contains an object pixel");

    param_bounds = ParamBounds::for_scene_radius(bounds.radius);
    param_bounds.eps_min = cfg.eps_min;
    param_bounds.eps_max = cfg.eps_max;
    param_bounds.eps_sharpness = cfg.eps_sharpness;
    geom = GridGeometry::enclosing(bounds, cfg.grid_n);
    lr_scale.fill(1.0);
    for (int i = 0; i < 3; ++i) lr_scale[kRawEuler + i] = cfg.rotation_lr_scale;
    opt_render.gamma = cfg.gamma_opt;
    opt_render.samples_per_ray = cfg.samples_per_ray;
    opt_render.extinction = cfg.extinction;
    opt_render.seed = hash_key({cfg.seed, kJitterStream});
    grid_render = opt_render;
    grid_render.gamma = cfg.gamma_eval;
    grid_render.seed = hash_key({cfg.seed, kGridStream});
    if (cfg.holdout_rays_per_view > 0) {
      Rng hr(hash_key({cfg.seed, kHoldoutStream}));
      holdout = uniform_batch(views, bounds, cfg.holdout_rays_per_view, hr, hash_key({cfg.seed, kHoldoutStream}), 0);
    }
  }

  VoxelGrid error_gradient(const Composition& comp, std::uint64_t pass) {
    const VoxelGrid density = eval_grid_density(comp, geom, cfg.gamma_eval);
    return grid_error_gradient(density, views, bounds, cfg.rays_per_view, grid_rng, grid_render, pass).gradient;
  }

  void optimise(Composition& comp, std::vector<AdamState>& states, int iter, int steps, FitTrace& trace) {
    for (int step = 0; step < steps; ++step) {
      const double lr = cosine_lr(global_step, total_steps, cfg.lr_start, cfg.lr_end);
      const auto pass = static_cast<std::uint64_t>(global_step);
      const RayBatch batch = cfg.importance_sampling
                                 ? sampler.sample(views, bounds, cfg.rays_per_view, pixel_rng, opt_render.seed, pass)
                                 : uniform_batch(views, bounds, cfg.rays_per_view, pixel_rng, opt_render.seed, pass);
      RenderConfig rc = opt_render;
      if (cfg.gamma_opt_end > 0.0 && steps > 1)
        rc.gamma = cfg.gamma_opt * std::pow(cfg.gamma_opt_end / cfg.gamma_opt, static_cast<double>(step) / (steps - 1));
      const LossGrad lg = loss_and_grad(batch, comp, rc, cfg.lambda);
      sampler.update(batch, lg.per_ray_loss);
      for (std::size_t j = 0; j < comp.size(); ++j) {
        RawParams raw = comp.items[j].raw();
        adam_step(raw, lg.grad.per_primitive[j], states[j], lr, cfg.adam, &lr_scale);
        comp.items[j] = Superquadric::from_raw(raw, param_bounds);
      }
      const StepRecord rec{iter, step, lg.loss, lr};
      trace.steps.push_back(rec);
      if (progress) progress(rec);
      ++global_step;
    }
  }

  void snapshot(const Composition& comp, FitTrace& trace) const {
    trace.snapshots.push_back(comp);
    if (!holdout.empty()) trace.holdout_loss.push_back(weighted_loss(holdout, comp, opt_render, cfg.lambda));
  }
};

}  // namespace

FitResult fit_isco(const std::vector<CameraView>& views, const SceneBounds& bounds, const FitConfig& cfg,
                   const ProgressFn& progress) {
  FitContext ctx(views, bounds, cfg, progress);
  ctx.total_steps = static_cast<long>(cfg.max_superquadrics) * cfg.steps_per_iter;
  FitResult out;
  std::vector<AdamState> states;
  for (int k = 1; k <= cfg.max_superquadrics; ++k) {
    const VoxelGrid grad = ctx.error_gradient(out.composition, static_cast<std::uint64_t>(k));
    Proposal prop;
    try {
      prop = propose_init(grad, cfg.smoothing_sigma, bounds, ctx.param_bounds, cfg.init_radius_fraction);
    } catch (const DegenerateErrorField&) {
      out.trace.stopped_early = true;
      break;
    }
    out.trace.grid_max.push_back(prop.peak);
    if (cfg.early_stop_threshold > 0.0 && prop.peak < cfg.early_stop_threshold) {
      out.trace.stopped_early = true;
      break;
    }
    out.composition.items.push_back(prop.primitive);
    states.emplace_back();
    ctx.optimise(out.composition, states, k, cfg.steps_per_iter, out.trace);
    ctx.snapshot(out.composition, out.trace);
  }
  return out;
}

FitResult fit_sco(const std::vector<CameraView>& views, const SceneBounds& bounds, const FitConfig& cfg,
                  const ProgressFn& progress) {
  FitContext ctx(views, bounds, cfg, progress);
  const int k = cfg.max_superquadrics;
  ctx.total_steps = static_cast<long>(k) * cfg.steps_per_iter;
  FitResult out;
  const VoxelGrid grad = ctx.error_gradient(out.composition, 1);
  const VoxelGrid field = descent_field(grad, cfg.smoothing_sigma);
  double peak = 0.0;
  for (double v : field.values) peak = std::max(peak, v);
  out.trace.grid_max.push_back(peak);
  const double radius = cfg.init_radius_fraction * bounds.radius;
  for (const Vec3& c : top_k_peaks(field, k, 2.0 * cfg.smoothing_sigma))
    out.composition.items.push_back(Superquadric::sphere(c, radius, ctx.param_bounds));
  std::vector<AdamState> states(out.composition.size());
  ctx.optimise(out.composition, states, 1, k * cfg.steps_per_iter, out.trace);
  ctx.snapshot(out.composition, out.trace);
  return out;
}

}  // namespace isco
