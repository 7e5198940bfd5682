#include "isco/grad.hpp"

#include <cmath>

#include "isco/detail/march.hpp"
#include "isco/errors.hpp"

namespace isco {

double ParamGradient::max_abs() const {
  double m = 0.0;
  for (const auto& g : per_primitive)
    for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

double ParamGradient::norm() const {
  double s = 0.0;
  for (const auto& g : per_primitive)
    for (double v : g) s += v * v;
  return std::sqrt(s);
}

LossGrad loss_and_grad(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidConfig("lambda must lie in [0, 1]");
  const int n_rays = static_cast<int>(batch.size());
  const int k = static_cast<int>(s.size());
  std::vector<detail::PrimitiveT<double>> prims;
  for (const auto& p : s.items) prims.push_back(detail::PrimitiveT<double>::from(p, cfg.gamma));

  LossGrad out;
  out.per_ray_loss.assign(batch.size(), 0.0);
  out.grad.per_primitive.assign(static_cast<std::size_t>(k), RawParams{});
  // Per-ray contributions, reduced below in ray order so the result does not
  // depend on scheduling.
  std::vector<double> contrib(static_cast<std::size_t>(n_rays) * k * kNumParams, 0.0);
  std::vector<char> has_grad(static_cast<std::size_t>(n_rays), 0);

#pragma omp parallel
  {
    RaySamples samples;
    std::vector<detail::DepthGrad> dg(static_cast<std::size_t>(k));
#pragma omp for schedule(dynamic, 16)
    for (int i = 0; i < n_rays; ++i) {
      const RayRecord& rec = batch.rays[i];
      double sum = 0.0;
      if (!rec.ray.empty() && k > 0) {
        stratify(rec.ray, cfg.samples_per_ray, rec.key, samples);
        for (int j = 0; j < k; ++j) {
          dg[j] = detail::optical_depth_grad(s.items[j], prims[j], rec.ray, samples, cfg.gamma, cfg.extinction);
          sum += -std::expm1(-dg[j].tau);
        }
      }
      const bool clamped = sum > 1.0;
      const double d = clamped ? 1.0 : sum;
      const double w = ray_weight(rec.target, lambda);
      const double e = d - rec.target;
      out.per_ray_loss[i] = w * e * e;
      if (clamped || k == 0 || rec.ray.empty()) continue;
      const double dl_dd = 2.0 * w * e;
      if (dl_dd == 0.0) continue;
      has_grad[i] = 1;
      double* dst = &contrib[static_cast<std::size_t>(i) * k * kNumParams];
      for (int j = 0; j < k; ++j) {
        // dD_j/dtau_j = exp(-tau_j)
        const double scale = dl_dd * std::exp(-dg[j].tau);
        for (int q = 0; q < kNumParams; ++q) dst[j * kNumParams + q] = scale * dg[j].dtau[q];
      }
    }
  }

  for (int i = 0; i < n_rays; ++i) {
    out.loss += out.per_ray_loss[i];
    if (!has_grad[i]) continue;
    const double* src = &contrib[static_cast<std::size_t>(i) * k * kNumParams];
    for (int j = 0; j < k; ++j)
      for (int q = 0; q < kNumParams; ++q) out.grad.per_primitive[j][q] += src[j * kNumParams + q];
  }
  for (const auto& g : out.grad.per_primitive)
    for (double v : g)
      if (!std::isfinite(v)) throw NonFiniteGradient("non-finite entry in parameter gradient");
  if (!std::isfinite(out.loss)) throw NonFiniteGradient("non-finite loss");
  return out;
}

long double weighted_loss_extended(const RayBatch& batch, const std::vector<RawParams>& raws, const ParamBounds& bounds,
                                   const RenderConfig& cfg, double lambda) {
  using LD = long double;
  std::vector<detail::PrimitiveT<LD>> prims;
  for (const auto& raw : raws) prims.push_back(detail::PrimitiveT<LD>::from_raw(raw, bounds, cfg.gamma));
  LD loss = 0;
  RaySamples samples;
  for (const auto& rec : batch.rays) {
    LD sum = 0;
    if (!rec.ray.empty() && !prims.empty()) {
      stratify(rec.ray, cfg.samples_per_ray, rec.key, samples);
      for (const auto& p : prims) sum += -std::expm1(-detail::optical_depth<LD>(p, rec.ray, samples, cfg.gamma, cfg.extinction));
    }
    const LD d = sum > LD(1) ? LD(1) : sum;
    const LD e = d - LD(rec.target);
    loss += LD(ray_weight(rec.target, lambda)) * e * e;
  }
  return loss;
}

ParamGradient fd_gradient(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda,
                          double h) {
  std::vector<RawParams> raws;
  for (const auto& p : s.items) raws.push_back(p.raw());
  const ParamBounds bounds = s.empty() ? ParamBounds{} : s.items.front().bounds();
  ParamGradient g;
  g.per_primitive.assign(raws.size(), RawParams{});
  auto eval = [&](std::size_t j, int q, double offset) {
    auto r = raws;
    r[j][q] += offset;
    return weighted_loss_extended(batch, r, bounds, cfg, lambda);
  };
  for (std::size_t j = 0; j < raws.size(); ++j) {
    for (int q = 0; q < kNumParams; ++q) {
      // Fourth-order central stencil on +-h, +-2h.
      const long double d1 = eval(j, q, h) - eval(j, q, -h);
      const long double d2 = eval(j, q, 2 * h) - eval(j, q, -2 * h);
      g.per_primitive[j][q] = static_cast<double>((8 * d1 - d2) / (12 * static_cast<long double>(h)));
    }
  }
  return g;
}

double fd_check(const Composition& s, const RayBatch& batch, const RenderConfig& cfg, double lambda, double h) {
  if (batch.empty() || s.empty()) return 0.0;
  if (!(h > 0.0)) throw InvalidConfig("finite-difference step must be positive");
  const LossGrad analytic = loss_and_grad(batch, s, cfg, lambda);
  const ParamGradient fd = fd_gradient(batch, s, cfg, lambda, h);
  double worst = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (int q = 0; q < kNumParams; ++q) {
      const double a = analytic.grad.per_primitive[j][q];
      const double f = fd.per_primitive[j][q];
      if (std::abs(a) + std::abs(f) <= 1e-8) continue;
      worst = std::max(worst, std::abs(a - f) / std::max(std::abs(a), std::abs(f)));
    }
  }
  return worst;
}

}  // namespace isco
