#include "isco/synthgen.hpp"

#include <cmath>
#include <numbers>

#include "isco/errors.hpp"
#include "isco/render.hpp"

namespace isco {

namespace {
constexpr int kMaxRejections = 10000;
constexpr int kRestartAfter = 200;
constexpr double kDeg = std::numbers::pi / 180.0;
}  // namespace

void validate(const GenSpec& s) {
  if (s.count_min < 1 || s.count_max < s.count_min) throw InvalidConfig("primitive count range is invalid");
  if (!(s.alpha_min > 0.0) || s.alpha_max < s.alpha_min) throw InvalidConfig("alpha range is invalid");
  if (!(s.eps_min >= 0.1) || !(s.eps_max <= 1.9) || s.eps_max < s.eps_min)
    throw InvalidConfig("epsilon range must lie in [0.1, 1.9]");
  if (s.views < 1) throw InvalidConfig("view count must be at least 1");
  if (!(s.cap_deg > 0.0 && s.cap_deg <= 90.0)) throw InvalidConfig("cap angle must be in (0, 90] degrees");
  if (!(s.fov_deg > 0.0 && s.fov_deg < 180.0)) throw InvalidConfig("field of view must be in (0, 180) degrees");
  if (!(s.camera_distance > 1.0)) throw InvalidConfig("cameras must lie outside the scene bounds");
  if (s.image_size < 1) throw InvalidConfig("image size must be positive");
  if (!(s.noise >= 0.0 && s.noise <= 1.0)) throw InvalidConfig("noise must be a probability");
  if (!(s.bounds.radius > 0.0)) throw InvalidConfig("scene radius must be positive");
}

std::vector<Vec3> probe_points(const Superquadric& p) {
  std::vector<Vec3> out;
  const double hp = 0.5 * std::numbers::pi;
  out.push_back(canonical_to_world(surface_point_canonical(p.alpha(), p.epsilon(), -hp, 0.0), p));
  out.push_back(canonical_to_world(surface_point_canonical(p.alpha(), p.epsilon(), hp, 0.0), p));
  for (double eta : {-0.25 * std::numbers::pi, 0.0, 0.25 * std::numbers::pi})
    for (int c = 0; c < 8; ++c)
      out.push_back(canonical_to_world(
          surface_point_canonical(p.alpha(), p.epsilon(), eta, -std::numbers::pi + c * 0.25 * std::numbers::pi), p));
  return out;
}

namespace {

bool contained_in(const Superquadric& inner, const Superquadric& outer) {
  for (const Vec3& x : probe_points(inner))
    if (!(implicit_value_world(x, outer) < 1.0)) return false;
  return true;
}

bool inside_bounds(const Superquadric& p, const SceneBounds& b) {
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1 ? 1 : -1) * p.alpha()[0], (c & 2 ? 1 : -1) * p.alpha()[1], (c & 4 ? 1 : -1) * p.alpha()[2]);
    if ((canonical_to_world(corner, p) - b.center).norm() > b.radius) return false;
  }
  return true;
}

Vec3 random_in_ball(Rng& rng, double radius) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.squaredNorm() <= 1.0) return radius * v;
  }
}

}  // namespace

Composition gen_scene(const GenSpec& spec, Rng& rng) {
  validate(spec);
  const double R = spec.bounds.radius;
  const ParamBounds pb = ParamBounds::for_scene_radius(R);
  const int count = spec.count_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.count_max - spec.count_min + 1)));
  Composition s;
  int rejections = 0;
  int streak = 0;
  while (static_cast<int>(s.size()) < count) {
    const Vec3 alpha(rng.uniform(spec.alpha_min, spec.alpha_max) * R, rng.uniform(spec.alpha_min, spec.alpha_max) * R,
                     rng.uniform(spec.alpha_min, spec.alpha_max) * R);
    Vec2 eps(rng.uniform(spec.eps_min, spec.eps_max), rng.uniform(spec.eps_min, spec.eps_max));
    // Collapsed ranges sit on the bound; keep them representable.
    for (int j = 0; j < 2; ++j) eps[j] = std::clamp(eps[j], pb.eps_min + 1e-9, pb.eps_max - 1e-9);
    const Vec3 euler(rng.uniform(-spec.max_angle, spec.max_angle), rng.uniform(-spec.max_angle, spec.max_angle),
                     rng.uniform(-spec.max_angle, spec.max_angle));
    const Vec3 t = spec.bounds.center + random_in_ball(rng, spec.center_spread * R);
    const Superquadric p = Superquadric::from_shape(alpha, eps, euler, t, pb);

    bool ok = inside_bounds(p, spec.bounds);
    for (const auto& q : s.items) {
      if (!ok) break;
      if (spec.min_gap >= 0.0 &&
          (p.translation() - q.translation()).norm() < p.alpha().norm() + q.alpha().norm() + spec.min_gap * R)
        ok = false;
      if (ok && (contained_in(p, q) || contained_in(q, p))) ok = false;
    }
    if (ok) {
      s.items.push_back(p);
      streak = 0;
      continue;
    }
    if (++rejections >= kMaxRejections)
      throw GenerationExhausted("no valid scene after " + std::to_string(kMaxRejections) + " rejections");
    // Early primitives can leave no room for the rest; start over.
    if (++streak >= kRestartAfter) {
      s.items.clear();
      streak = 0;
    }
  }
  return s;
}

std::vector<CameraView> gen_views(const GenSpec& spec, Rng& rng) {
  validate(spec);
  const double cos_cap = spec.policy == ViewPolicy::Cap ? std::cos(spec.cap_deg * kDeg) : -1.0;
  const double f = 0.5 * spec.image_size / std::tan(0.5 * spec.fov_deg * kDeg);
  std::vector<CameraView> views;
  for (int i = 0; i < spec.views; ++i) {
    // Uniform in cos(theta) is uniform in area on the sphere (or cap).
    const double z = rng.uniform(cos_cap, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
    const Vec3 eye = spec.bounds.center + spec.camera_distance * spec.bounds.radius * dir;
    const bool near_pole = std::abs(z) > std::cos(1.0 * kDeg);
    CameraView v;
    v.width = spec.image_size;
    v.height = spec.image_size;
    v.intrinsics = {f, f, 0.5 * spec.image_size, 0.5 * spec.image_size};
    v.cam_to_world = look_at(eye, spec.bounds.center, near_pole ? Vec3::UnitX() : Vec3::UnitZ());
    views.push_back(std::move(v));
  }
  return views;
}

GeneratedScene gen_bundle(const GenSpec& spec) {
  validate(spec);
  Rng scene_rng(hash_key({spec.seed, 0x5ce7e}));
  Rng view_rng(hash_key({spec.seed, 0x71e35}));
  GeneratedScene out;
  out.ground_truth = gen_scene(spec, scene_rng);
  out.bundle.views = gen_views(spec, view_rng);
  out.bundle.bounds = spec.bounds;
  out.bundle.seed = spec.seed;
  out.bundle.name = "synthetic-" + std::to_string(spec.seed);

  RenderConfig rc;
  rc.gamma = spec.gamma_eval;
  rc.samples_per_ray = spec.render_samples;
  rc.extinction = spec.extinction;
  rc.seed = hash_key({spec.seed, 0x4e4d});
  for (std::size_t i = 0; i < out.bundle.views.size(); ++i) {
    CameraView& v = out.bundle.views[i];
    const std::vector<double> d = render_image(v, out.ground_truth, rc, spec.bounds, static_cast<int>(i));
    v.silhouette.resize(d.size());
    Rng noise(hash_key({spec.seed, 0x0015e, i}));
    for (std::size_t p = 0; p < d.size(); ++p) {
      float m = d[p] > 0.5 ? 1.0f : 0.0f;
      if (spec.noise > 0.0 && noise.uniform() < spec.noise) m = 1.0f - m;
      v.silhouette[p] = m;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%03zu.png", i);
    out.bundle.mask_files.push_back(buf);
  }
  return out;
}

}  // namespace isco
