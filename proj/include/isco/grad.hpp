#pragma once

#include <vector>

#include "isco/objective.hpp"
#include "isco/render.hpp"
#include "isco/sqcore.hpp"

namespace isco {

/// dL/d(raw) per primitive, in composition order.
struct ParamGradient {
  std::vector<RawParams> per_primitive;

  double max_abs() const;
  double norm() const;
};

struct LossGrad {
  double loss = 0.0;
  ParamGradient grad;
  /// Weighted squared error of every ray, batch order.
  std::vector<double> per_ray_loss;
};

/// Weighted loss and its exact derivative w.r.t. every raw parameter. The
/// min(., 1) clamp contributes zero gradient when the unclamped sum exceeds 1.
/// Throws NonFiniteGradient.
LossGrad loss_and_grad(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda);

/// Weighted loss evaluated in extended precision through an independent
/// forward path (raw -> shape mapping included).
long double weighted_loss_extended(const RayBatch& batch, const std::vector<RawParams>& raws, const ParamBounds& bounds,
                                   const RenderConfig& cfg, double lambda);

/// Fourth-order central differences (+-h, +-2h) of weighted_loss_extended
/// on every raw entry.
ParamGradient fd_gradient(const RayBatch& batch, const Composition& s, const RenderConfig& cfg, double lambda,
                          double h);

/// Max entrywise relative error |a - fd| / max(|a|, |fd|) over entries with
/// |a| + |fd| > 1e-8. Zero for an empty batch or composition.
double fd_check(const Composition& s, const RayBatch& batch, const RenderConfig& cfg, double lambda, double h);

}  // namespace isco
