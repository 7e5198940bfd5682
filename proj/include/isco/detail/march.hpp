#pragma once

// Ray-marching kernels shared by the renderer, the gradient code and the
// finite-difference oracle. The forward path is templated on the scalar type
// so the oracle can run it in extended precision.

#include <algorithm>
#include <cmath>
#include <limits>

#include "isco/camera.hpp"
#include "isco/render.hpp"
#include "isco/sqcore.hpp"

namespace isco::detail {

template <class Real>
struct PrimitiveT {
  Real rot[9];  // row-major R
  Real trans[3];
  Real alpha[3];
  Real eps1;
  Real eps2;
  Real half[3];  // canonical culling box

  static PrimitiveT from_raw(const RawParams& raw, const ParamBounds& b, double gamma) {
    using std::cos;
    using std::sin;
    PrimitiveT p;
    const Real k = Real(b.alpha_sharpness);
    for (int i = 0; i < 3; ++i) p.alpha[i] = Real(b.alpha_min) + softplus<Real>(k * Real(raw[kRawAlpha + i])) / k;
    const Real span = Real(b.eps_max) - Real(b.eps_min);
    p.eps1 = Real(b.eps_min) + span * logistic<Real>(Real(b.eps_sharpness) * Real(raw[kRawEpsilon]));
    p.eps2 = Real(b.eps_min) + span * logistic<Real>(Real(b.eps_sharpness) * Real(raw[kRawEpsilon + 1]));
    const Real ex = Real(raw[kRawEuler]), ey = Real(raw[kRawEuler + 1]), ez = Real(raw[kRawEuler + 2]);
    const Real cx = cos(ex), sx = sin(ex), cy = cos(ey), sy = sin(ey), cz = cos(ez), sz = sin(ez);
    // Rz * Ry * Rx
    p.rot[0] = cz * cy;
    p.rot[1] = cz * sy * sx - sz * cx;
    p.rot[2] = cz * sy * cx + sz * sx;
    p.rot[3] = sz * cy;
    p.rot[4] = sz * sy * sx + cz * cx;
    p.rot[5] = sz * sy * cx - cz * sx;
    p.rot[6] = -sy;
    p.rot[7] = cy * sx;
    p.rot[8] = cy * cx;
    for (int i = 0; i < 3; ++i) p.trans[i] = Real(raw[kRawTranslation + i]);
    p.set_box(gamma);
    return p;
  }

  static PrimitiveT from(const Superquadric& s, double gamma) {
    PrimitiveT p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) p.rot[3 * r + c] = Real(s.rotation()(r, c));
    for (int i = 0; i < 3; ++i) {
      p.trans[i] = Real(s.translation()[i]);
      p.alpha[i] = Real(s.alpha()[i]);
    }
    p.eps1 = Real(s.epsilon()[0]);
    p.eps2 = Real(s.epsilon()[1]);
    p.set_box(gamma);
    return p;
  }

  void set_box(double gamma) {
    using std::pow;
    const Real level = Real(1) + Real(kDensityCutoff) / Real(gamma);
    const Real s = pow(level, eps1 / Real(2));
    for (int i = 0; i < 3; ++i) half[i] = alpha[i] * s;
  }

  // R^T v
  void to_canonical(const Real v[3], Real out[3]) const {
    for (int c = 0; c < 3; ++c) out[c] = rot[c] * v[0] + rot[3 + c] * v[1] + rot[6 + c] * v[2];
  }

  /// Canonical ray and the index range of samples inside the culling box.
  /// Returns false if no sample can contribute.
  bool setup_ray(const Ray& r, const RaySamples& s, Real oc[3], Real dc[3], int& i0, int& i1) const {
    const Real rel[3] = {Real(r.origin.x()) - trans[0], Real(r.origin.y()) - trans[1], Real(r.origin.z()) - trans[2]};
    const Real dir[3] = {Real(r.direction.x()), Real(r.direction.y()), Real(r.direction.z())};
    to_canonical(rel, oc);
    to_canonical(dir, dc);
    if (s.t.empty()) return false;
    double ta = r.t_near, tb = r.t_far;
    for (int i = 0; i < 3; ++i) {
      const double o = static_cast<double>(oc[i]), d = static_cast<double>(dc[i]), h = static_cast<double>(half[i]);
      if (std::abs(d) < 1e-300) {
        if (std::abs(o) > h) return false;
        continue;
      }
      double a = (-h - o) / d, b = (h - o) / d;
      if (a > b) std::swap(a, b);
      ta = std::max(ta, a);
      tb = std::min(tb, b);
      if (ta > tb) return false;
    }
    const int n = static_cast<int>(s.t.size());
    // One bin of slack on each side; samples outside the box fail the
    // density cutoff anyway.
    i0 = std::clamp(static_cast<int>(std::floor((ta - r.t_near) / s.bin)) - 1, 0, n - 1);
    i1 = std::clamp(static_cast<int>(std::floor((tb - r.t_near) / s.bin)) + 1, 0, n - 1);
    return true;
  }
};

/// extinction * sum_i sigma_i delta_i for one primitive.
template <class Real>
Real optical_depth(const PrimitiveT<Real>& p, const Ray& r, const RaySamples& s, double gamma, double extinction) {
  Real oc[3], dc[3];
  int i0 = 0, i1 = -1;
  if (r.empty() || !p.setup_ray(r, s, oc, dc, i0, i1)) return Real(0);
  const Real g = Real(gamma);
  Real tau = 0;
  for (int i = i0; i <= i1; ++i) {
    const Real t = Real(s.t[i]);
    const Real x[3] = {oc[0] + t * dc[0], oc[1] + t * dc[1], oc[2] + t * dc[2]};
    const Real f = implicit_value<Real>(x, p.alpha, p.eps1, p.eps2);
    const Real z = g * (Real(1) - f);
    if (!(z >= -Real(kDensityCutoff))) continue;
    tau += logistic<Real>(z) * Real(s.delta[i]);
  }
  return Real(extinction) * tau;
}

/// Optical depth and its derivative w.r.t. the primitive's raw parameters.
struct DepthGrad {
  double tau = 0.0;
  RawParams dtau{};
};

DepthGrad optical_depth_grad(const Superquadric& sq, const PrimitiveT<double>& p, const Ray& r, const RaySamples& s,
                             double gamma, double extinction);

}  // namespace isco::detail
