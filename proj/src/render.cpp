#include "isco/render.hpp"

#include <cmath>

#include "isco/detail/march.hpp"
#include "isco/errors.hpp"
#include "isco/rng.hpp"

namespace isco {

void validate(const RenderConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw InvalidConfig("gamma must be positive");
  if (cfg.samples_per_ray < 2) throw InvalidConfig("samples_per_ray must be at least 2");
  if (!(cfg.extinction > 0.0)) throw InvalidConfig("extinction must be positive");
}

std::uint64_t ray_key(std::uint64_t seed, std::uint64_t view, std::uint64_t pixel, std::uint64_t pass) {
  return hash_key({seed, view, pixel, pass});
}

void stratify(const Ray& r, int n, std::uint64_t key, RaySamples& out) {
  out.t.resize(static_cast<std::size_t>(n));
  out.delta.resize(static_cast<std::size_t>(n));
  out.bin = (r.t_far - r.t_near) / n;
  Rng rng(key);
  const double u = rng.uniform();
  for (int i = 0; i < n; ++i) out.t[i] = r.t_near + (i + u) * out.bin;
  for (int i = 0; i + 1 < n; ++i) out.delta[i] = out.t[i + 1] - out.t[i];
  out.delta[n - 1] = r.t_far - out.t[n - 1];
}

RaySamples stratify(const Ray& r, int n, std::uint64_t key) {
  RaySamples s;
  stratify(r, n, key, s);
  return s;
}

double render_primitive(const Ray& r, const Superquadric& p, const RenderConfig& cfg, std::uint64_t key) {
  if (r.empty()) return 0.0;
  const RaySamples s = stratify(r, cfg.samples_per_ray, key);
  const auto prim = detail::PrimitiveT<double>::from(p, cfg.gamma);
  return -std::expm1(-detail::optical_depth(prim, r, s, cfg.gamma, cfg.extinction));
}

double render_composition(const Ray& r, const Composition& comp, const RenderConfig& cfg, std::uint64_t key) {
  if (r.empty() || comp.empty()) return 0.0;
  const RaySamples s = stratify(r, cfg.samples_per_ray, key);
  double sum = 0.0;
  for (const auto& p : comp.items) {
    const auto prim = detail::PrimitiveT<double>::from(p, cfg.gamma);
    sum += -std::expm1(-detail::optical_depth(prim, r, s, cfg.gamma, cfg.extinction));
  }
  return std::min(sum, 1.0);
}

std::vector<double> render_image(const CameraView& view, const Composition& comp, const RenderConfig& cfg,
                                 const SceneBounds& bounds, int view_id) {
  validate(cfg);
  const int n = view.pixel_count();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (comp.empty()) return out;
  std::vector<detail::PrimitiveT<double>> prims;
  for (const auto& p : comp.items) prims.push_back(detail::PrimitiveT<double>::from(p, cfg.gamma));

#pragma omp parallel
  {
    RaySamples s;
#pragma omp for schedule(dynamic, 64)
    for (int px = 0; px < n; ++px) {
      const Ray r = pixel_ray(view, px, bounds);
      if (r.empty()) continue;
      stratify(r, cfg.samples_per_ray, ray_key(cfg.seed, static_cast<std::uint64_t>(view_id), px), s);
      double sum = 0.0;
      for (const auto& prim : prims) sum += -std::expm1(-detail::optical_depth(prim, r, s, cfg.gamma, cfg.extinction));
      out[static_cast<std::size_t>(px)] = std::min(sum, 1.0);
    }
  }
  return out;
}

namespace detail {

DepthGrad optical_depth_grad(const Superquadric& sq, const PrimitiveT<double>& p, const Ray& r, const RaySamples& s,
                             double gamma, double extinction) {
  DepthGrad out;
  double oc[3], dc[3];
  int i0 = 0, i1 = -1;
  if (r.empty() || !p.setup_ray(r, s, oc, dc, i0, i1)) return out;

  double tau = 0.0;
  double acc_x[3] = {0, 0, 0};
  double acc_outer[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};  // sum w * df/dx_c (x) x_c
  double acc_alpha[3] = {0, 0, 0};
  double acc_eps[2] = {0, 0};
  for (int i = i0; i <= i1; ++i) {
    const double t = s.t[i];
    const double x[3] = {oc[0] + t * dc[0], oc[1] + t * dc[1], oc[2] + t * dc[2]};
    const ImplicitGrad g = implicit_value_grad(x, p.alpha, p.eps1, p.eps2);
    const double z = gamma * (1.0 - g.f);
    if (!(z >= -kDensityCutoff)) continue;
    const double sigma = logistic(z);
    tau += sigma * s.delta[i];
    // d(sigma * delta)/df
    const double w = -gamma * sigma * (1.0 - sigma) * s.delta[i];
    for (int a = 0; a < 3; ++a) {
      const double wa = w * g.dx[a];
      acc_x[a] += wa;
      for (int b = 0; b < 3; ++b) acc_outer[3 * a + b] += wa * x[b];
      acc_alpha[a] += w * g.dalpha[a];
    }
    acc_eps[0] += w * g.deps[0];
    acc_eps[1] += w * g.deps[1];
  }
  out.tau = extinction * tau;

  const Vec3 ja = sq.alpha_jacobian();
  const Vec2 je = sq.epsilon_jacobian();
  for (int a = 0; a < 3; ++a) out.dtau[kRawAlpha + a] = extinction * acc_alpha[a] * ja[a];
  for (int j = 0; j < 2; ++j) out.dtau[kRawEpsilon + j] = extinction * acc_eps[j] * je[j];

  // x_c = R^T (x - t): df/dt = -R df/dx_c.
  const Mat3& rot = sq.rotation();
  for (int k = 0; k < 3; ++k)
    out.dtau[kRawTranslation + k] =
        -extinction * (rot(k, 0) * acc_x[0] + rot(k, 1) * acc_x[1] + rot(k, 2) * acc_x[2]);

  // df/de_j = df/dx_c . (dR_j^T R x_c).
  const auto drs = rotation_derivatives(sq.euler());
  for (int j = 0; j < 3; ++j) {
    const Mat3 m = drs[j].transpose() * rot;
    double v = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) v += m(a, b) * acc_outer[3 * a + b];
    out.dtau[kRawEuler + j] = extinction * v;
  }
  return out;
}

}  // namespace detail

}  // namespace isco
