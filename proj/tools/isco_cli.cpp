#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isco/assets.hpp"
#include "isco/errors.hpp"
#include "isco/fitter.hpp"
#include "isco/metrics.hpp"
#include "isco/render.hpp"
#include "isco/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FitOptions {
  isco::FitConfig cfg;
  int views = 0;
  bool sco = false;
  bool quiet = false;
};

void add_fit_options(CLI::App* app, FitOptions& o) {
  auto& c = o.cfg;
  app->add_option("--k", c.max_superquadrics, "Maximum number of superquadrics")->capture_default_str();
  app->add_option("--steps", c.steps_per_iter, "Adam steps per iteration")->capture_default_str();
  app->add_option("--rays", c.rays_per_view, "Rays sampled per view and step")->capture_default_str();
  app->add_option("--lambda", c.lambda, "Weight of background rays")->capture_default_str();
  app->add_option("--views", o.views, "Use only the first N views of the bundle (0 = all)")->capture_default_str();
  app->add_option("--gamma-opt", c.gamma_opt, "Density slope at the start of every iteration")->capture_default_str();
  app->add_option("--gamma-opt-end", c.gamma_opt_end, "Density slope at the end of every iteration (0 = constant)")
      ->capture_default_str();
  app->add_option("--gamma-eval", c.gamma_eval, "Density slope of the error grid")->capture_default_str();
  app->add_option("--samples", c.samples_per_ray, "Stratified samples per ray")->capture_default_str();
  app->add_option("--extinction", c.extinction, "Optical depth per unit length of solid material")
      ->capture_default_str();
  app->add_option("--grid-n", c.grid_n, "Error grid resolution per axis")->capture_default_str();
  app->add_option("--smoothing-sigma", c.smoothing_sigma, "Gaussian smoothing of the error grid, in voxels")
      ->capture_default_str();
  app->add_option("--init-radius", c.init_radius_fraction, "Radius of a new sphere relative to the scene radius")
      ->capture_default_str();
  app->add_option("--lr-start", c.lr_start, "Initial learning rate")->capture_default_str();
  app->add_option("--lr-end", c.lr_end, "Final learning rate")->capture_default_str();
  app->add_option("--beta1", c.adam.beta1, "Adam beta1")->capture_default_str();
  app->add_option("--beta2", c.adam.beta2, "Adam beta2")->capture_default_str();
  app->add_option("--adam-eps", c.adam.eps, "Adam epsilon")->capture_default_str();
  app->add_option("--eps-min", c.eps_min, "Lower bound of the shape exponents")->capture_default_str();
  app->add_option("--eps-max", c.eps_max, "Upper bound of the shape exponents")->capture_default_str();
  app->add_option("--eps-sharpness", c.eps_sharpness, "Slope of the raw-to-exponent logistic map")
      ->capture_default_str();
  app->add_option("--rotation-lr-scale", c.rotation_lr_scale, "Learning-rate multiplier of the Euler angles")
      ->capture_default_str();
  app->add_option("--early-stop", c.early_stop_threshold, "Stop when the error peak drops below this (0 = off)")
      ->capture_default_str();
  app->add_option("--holdout-rays", c.holdout_rays_per_view, "Held-out rays per view scored per iteration")
      ->capture_default_str();
  app->add_flag("!--uniform-rays", c.importance_sampling, "Sample training rays uniformly instead of by loss");
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_flag("--sco", o.sco, "Run the non-iterative baseline instead");
  app->add_flag("--quiet", o.quiet, "Do not print progress records");
}

std::vector<isco::CameraView> select_views(const isco::SceneBundle& b, int n) {
  if (n < 0) throw isco::InvalidConfig("--views must be non-negative");
  if (n == 0 || n >= static_cast<int>(b.views.size())) return b.views;
  return {b.views.begin(), b.views.begin() + n};
}

isco::FitResult run_fit(const isco::SceneBundle& bundle, const FitOptions& o, int views) {
  const auto v = select_views(bundle, views);
  isco::ProgressFn progress;
  if (!o.quiet) progress = [](const isco::StepRecord& r) { std::cerr << isco::trace_record(r) << '\n'; };
  return o.sco ? isco::fit_sco(v, bundle.bounds, o.cfg, progress) : isco::fit_isco(v, bundle.bounds, o.cfg, progress);
}

std::string snapshot_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%02zu.json", k);
  return buf;
}

int cmd_fit(const std::string& bundle_path, const fs::path& out, const FitOptions& o) {
  const isco::SceneBundle bundle = isco::load_bundle(bundle_path);
  const isco::FitResult res = run_fit(bundle, o, o.views);
  fs::create_directories(out / "snapshots");
  isco::save_composition(res.composition, out / "composition.json");
  for (std::size_t k = 0; k < res.trace.snapshots.size(); ++k)
    isco::save_composition(res.trace.snapshots[k], out / "snapshots" / snapshot_name(k + 1));
  isco::write_trace(res.trace.steps, out / "trace.jsonl");
  json summary = {{"primitives", res.composition.size()},
                  {"iterations", res.trace.snapshots.size()},
                  {"grid_max", res.trace.grid_max},
                  {"stopped_early", res.trace.stopped_early}};
  if (!res.trace.holdout_loss.empty()) summary["holdout_loss"] = res.trace.holdout_loss;
  std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
  std::cout << "wrote " << (out / "composition.json").string() << " (" << res.composition.size() << " primitives)\n";
  return 0;
}

struct RenderOptions {
  isco::RenderConfig cfg;
  bool mesh = false;
  int mesh_density = 64;
};

std::string render_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "render_%03zu.png", i);
  return buf;
}

int cmd_render(const std::string& comp_path, const std::string& bundle_path, const fs::path& out,
               const RenderOptions& o) {
  const isco::Composition s = isco::load_composition(comp_path);
  const isco::SceneBundle bundle = isco::load_bundle(bundle_path);
  isco::validate(o.cfg);
  fs::create_directories(out);
  for (std::size_t i = 0; i < bundle.views.size(); ++i) {
    const auto img = isco::render_image(bundle.views[i], s, o.cfg, bundle.bounds, static_cast<int>(i));
    const std::vector<float> f(img.begin(), img.end());
    isco::write_mask_png(out / render_name(i), f, bundle.views[i].width, bundle.views[i].height);
  }
  if (o.mesh) isco::export_mesh(s, out / "mesh.obj", o.mesh_density);
  std::cout << "rendered " << bundle.views.size() << " views into " << out.string() << '\n';
  return 0;
}

struct EvalOptions {
  int m = 64;
  std::size_t points = 100000;
  std::uint64_t seed = 0;
  std::string bundle;
  std::vector<double> center;
  double radius = 1.0;
  std::string out;
};

json evaluate(const isco::Composition& pred, const isco::Composition& ref, const isco::SceneBounds& bounds,
              const EvalOptions& o) {
  json r;
  r["iou"] = isco::iou(isco::voxelize(pred, o.m, bounds), isco::voxelize(ref, o.m, bounds));
  if (pred.empty() || ref.empty()) {
    r["chamfer_l1"] = nullptr;
  } else {
    // Both shapes draw from the same stream so identical inputs sample identical points.
    isco::Rng rp(isco::hash_key({o.seed, 1})), rr(isco::hash_key({o.seed, 1}));
    r["chamfer_l1"] =
        isco::chamfer_l1(isco::sample_surface(pred, o.points, rp), isco::sample_surface(ref, o.points, rr));
  }
  r["per_primitive_count"] = {{"prediction", pred.size()}, {"reference", ref.size()}};
  r["voxel_resolution"] = o.m;
  r["surface_points"] = o.points;
  return r;
}

isco::SceneBounds eval_bounds(const EvalOptions& o) {
  if (!o.bundle.empty()) return isco::load_bundle(o.bundle).bounds;
  isco::SceneBounds b;
  if (!o.center.empty()) {
    if (o.center.size() != 3) throw isco::InvalidConfig("--center needs three values");
    b.center = isco::Vec3(o.center[0], o.center[1], o.center[2]);
  }
  if (!(o.radius > 0.0)) throw isco::InvalidConfig("--radius must be positive");
  b.radius = o.radius;
  return b;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_path, const EvalOptions& o) {
  const isco::Composition pred = isco::load_composition(pred_path);
  const isco::Composition ref = isco::load_composition(ref_path);
  if (o.m < 2) throw isco::InvalidConfig("--m must be at least 2");
  if (o.points < 1) throw isco::InvalidConfig("--points must be at least 1");
  const json report = evaluate(pred, ref, eval_bounds(o), o);
  std::cout << report.dump(2) << '\n';
  if (!o.out.empty()) std::ofstream(o.out) << report.dump(2) << '\n';
  return 0;
}

struct GenOptions {
  isco::GenSpec spec;
  int count = 1;
  int count_max = 0;
  double cap_deg = 0.0;
  double separation = -1.0;
};

int cmd_gen(const fs::path& out, GenOptions o) {
  auto& s = o.spec;
  s.count_min = o.count;
  s.count_max = o.count_max > 0 ? o.count_max : o.count;
  if (o.cap_deg > 0.0) {
    s.policy = isco::ViewPolicy::Cap;
    s.cap_deg = o.cap_deg;
  }
  s.min_gap = o.separation;
  const isco::GeneratedScene g = isco::gen_bundle(s);
  isco::save_bundle(g.bundle, out);
  isco::save_composition(g.ground_truth, out / "gt_composition.json");
  std::cout << "wrote " << g.bundle.views.size() << " views and " << g.ground_truth.size() << " primitives to "
            << out.string() << '\n';
  return 0;
}

int cmd_sweep(const std::string& bundle_path, const std::string& param, const std::vector<double>& values,
              std::string gt_path, const std::string& out, FitOptions o, const EvalOptions& eo) {
  const isco::SceneBundle bundle = isco::load_bundle(bundle_path);
  if (param != "lambda" && param != "views" && param != "k")
    throw isco::InvalidConfig("--param must be one of lambda, views, k");
  if (values.empty()) throw isco::InvalidConfig("--values must not be empty");
  if (gt_path.empty()) {
    const fs::path dir = fs::is_directory(bundle_path) ? fs::path(bundle_path) : fs::path(bundle_path).parent_path();
    if (fs::exists(dir / "gt_composition.json")) gt_path = (dir / "gt_composition.json").string();
  }
  isco::Composition gt;
  const bool have_gt = !gt_path.empty();
  if (have_gt) gt = isco::load_composition(gt_path);

  std::ostringstream csv;
  csv << "value,iou,chamfer,wall_time\n";
  csv.precision(10);
  for (double v : values) {
    FitOptions run = o;
    int views = o.views;
    if (param == "lambda") run.cfg.lambda = v;
    if (param == "k") run.cfg.max_superquadrics = static_cast<int>(v);
    if (param == "views") views = static_cast<int>(v);
    const auto t0 = std::chrono::steady_clock::now();
    const isco::FitResult res = run_fit(bundle, run, views);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    csv << v << ',';
    if (have_gt) {
      const json r = evaluate(res.composition, gt, bundle.bounds, eo);
      csv << r["iou"].get<double>() << ',';
      if (r["chamfer_l1"].is_null())
        csv << "nan";
      else
        csv << r["chamfer_l1"].get<double>();
    } else {
      csv << "nan,nan";
    }
    csv << ',' << dt << '\n';
    std::cerr << "sweep " << param << "=" << v << " done in " << dt << " s\n";
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(out);
    f << csv.str();
    if (!f) throw isco::InputError("cannot write " + out);
  }
  return 0;
}

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("ISCO_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superquadric recomposition of objects from multi-view silhouettes"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = ISCO_THREADS or all cores)")->capture_default_str();

  FitOptions fit_opts;
  std::string fit_bundle;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "Fit a composition to a scene bundle");
  fit->add_option("bundle", fit_bundle, "Bundle directory or scene.json")->required();
  fit->add_option("--out", fit_out, "Output directory")->required();
  add_fit_options(fit, fit_opts);

  RenderOptions render_opts;
  std::string render_comp, render_bundle, render_out;
  auto* render = app.add_subcommand("render", "Render a composition from the cameras of a bundle");
  render->add_option("composition", render_comp, "Composition JSON")->required();
  render->add_option("bundle", render_bundle, "Bundle directory or scene.json supplying the cameras")->required();
  render->add_option("--out", render_out, "Output directory")->required();
  render->add_option("--gamma", render_opts.cfg.gamma, "Density slope")->capture_default_str();
  render->add_option("--samples", render_opts.cfg.samples_per_ray, "Stratified samples per ray")->capture_default_str();
  render->add_option("--extinction", render_opts.cfg.extinction, "Optical depth per unit length")
      ->capture_default_str();
  render->add_option("--seed", render_opts.cfg.seed, "Jitter seed")->capture_default_str();
  render->add_flag("--mesh", render_opts.mesh, "Also write mesh.obj");
  render->add_option("--mesh-density", render_opts.mesh_density, "Longitude segments of the mesh")
      ->capture_default_str();

  EvalOptions eval_opts;
  std::string eval_pred, eval_ref;
  auto* eval = app.add_subcommand("eval", "Compare a composition against a reference composition");
  eval->add_option("composition", eval_pred, "Fitted composition JSON")->required();
  eval->add_option("reference", eval_ref, "Ground-truth composition JSON")->required();
  auto add_eval_options = [&](CLI::App* a) {
    a->add_option("--m", eval_opts.m, "Occupancy grid resolution")->capture_default_str();
    a->add_option("--points", eval_opts.points, "Surface points per shape for the Chamfer distance")
        ->capture_default_str();
    a->add_option("--eval-seed", eval_opts.seed, "Surface sampling seed")->capture_default_str();
  };
  add_eval_options(eval);
  auto* eval_bundle = eval->add_option("--bundle", eval_opts.bundle, "Take the evaluation bounds from this bundle");
  auto* eval_center = eval->add_option("--center", eval_opts.center, "Center of the evaluation cube")->expected(3);
  auto* eval_radius =
      eval->add_option("--radius", eval_opts.radius, "Half extent of the evaluation cube")->capture_default_str();
  eval_bundle->excludes(eval_center)->excludes(eval_radius);
  eval->add_option("--out", eval_opts.out, "Also write the report to this file");

  GenOptions gen_opts;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic scene bundle with ground truth");
  auto& gs = gen_opts.spec;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--views", gs.views, "Number of cameras")->capture_default_str();
  gen->add_option("--count", gen_opts.count, "Number of primitives (minimum when --count-max is set)")
      ->capture_default_str();
  gen->add_option("--count-max", gen_opts.count_max, "Maximum number of primitives (0 = --count)")
      ->capture_default_str();
  gen->add_option("--seed", gs.seed, "Random seed")->capture_default_str();
  gen->add_option("--cap-deg", gen_opts.cap_deg, "Restrict cameras to a polar cap of this angle (0 = full sphere)")
      ->capture_default_str();
  gen->add_option("--noise", gs.noise, "Per-pixel mask flip probability")->capture_default_str();
  gen->add_option("--image-size", gs.image_size, "Image width and height")->capture_default_str();
  gen->add_option("--alpha-min", gs.alpha_min, "Smallest scale, relative to the scene radius")->capture_default_str();
  gen->add_option("--alpha-max", gs.alpha_max, "Largest scale, relative to the scene radius")->capture_default_str();
  gen->add_option("--eps-min", gs.eps_min, "Smallest shape exponent")->capture_default_str();
  gen->add_option("--eps-max", gs.eps_max, "Largest shape exponent")->capture_default_str();
  gen->add_option("--spread", gs.center_spread, "Primitive centers lie within this fraction of the radius")
      ->capture_default_str();
  gen->add_option("--separation", gen_opts.separation, "Minimum gap between primitives (negative = may overlap)")
      ->capture_default_str();
  gen->add_option("--fov-deg", gs.fov_deg, "Vertical field of view")->capture_default_str();
  gen->add_option("--distance", gs.camera_distance, "Camera distance in scene radii")->capture_default_str();

  FitOptions sweep_opts;
  std::string sweep_bundle, sweep_param, sweep_gt, sweep_out;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Fit once per value of one parameter and tabulate the metrics");
  sweep->add_option("bundle", sweep_bundle, "Bundle directory or scene.json")->required();
  sweep->add_option("--param", sweep_param, "Parameter to sweep")
      ->required()
      ->check(CLI::IsMember({"lambda", "views", "k"}));
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--gt", sweep_gt, "Ground-truth composition (default: gt_composition.json next to the bundle)");
  sweep->add_option("--out", sweep_out, "CSV output path (default: stdout)");
  add_fit_options(sweep, sweep_opts);
  add_eval_options(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    apply_threads(threads);
    if (*fit) return cmd_fit(fit_bundle, fit_out, fit_opts);
    if (*render) return cmd_render(render_comp, render_bundle, render_out, render_opts);
    if (*eval) return cmd_eval(eval_pred, eval_ref, eval_opts);
    if (*gen) return cmd_gen(gen_out, gen_opts);
    if (*sweep) return cmd_sweep(sweep_bundle, sweep_param, sweep_values, sweep_gt, sweep_out, sweep_opts, eval_opts);
  } catch (const isco::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const isco::InputError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const isco::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
