#include "isco/sqcore.hpp"

#include <cmath>
#include <sstream>

#include "isco/errors.hpp"

namespace isco {

double inverse_softplus(double y) {
  // log(exp(y) - 1), stable for both small and large y.
  return y + std::log(-std::expm1(-y));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

ParamBounds ParamBounds::for_scene_radius(double radius) {
  ParamBounds b;
  b.alpha_min = 1e-3 * radius;
  b.alpha_sharpness = 20.0 / radius;
  return b;
}

Mat3 rotation_from_euler(const Vec3& euler) {
  const double cx = std::cos(euler.x()), sx = std::sin(euler.x());
  const double cy = std::cos(euler.y()), sy = std::sin(euler.y());
  const double cz = std::cos(euler.z()), sz = std::sin(euler.z());
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  return rz * ry * rx;
}

std::array<Mat3, 3> rotation_derivatives(const Vec3& euler) {
  const double cx = std::cos(euler.x()), sx = std::sin(euler.x());
  const double cy = std::cos(euler.y()), sy = std::sin(euler.y());
  const double cz = std::cos(euler.z()), sz = std::sin(euler.z());
  Mat3 rx, ry, rz, drx, dry, drz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  drx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
  dry << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  drz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
  return {rz * ry * drx, rz * dry * rx, drz * ry * rx};
}

Superquadric::Superquadric(const RawParams& raw, const ParamBounds& bounds) : raw_(raw), bounds_(bounds) {
  const double k = bounds.alpha_sharpness;
  for (int i = 0; i < 3; ++i) alpha_[i] = bounds.alpha_min + softplus(k * raw[kRawAlpha + i]) / k;
  for (int j = 0; j < 2; ++j)
    epsilon_[j] = bounds.eps_min + (bounds.eps_max - bounds.eps_min) * logistic(bounds.eps_sharpness * raw[kRawEpsilon + j]);
  euler_ = Vec3(raw[kRawEuler], raw[kRawEuler + 1], raw[kRawEuler + 2]);
  translation_ = Vec3(raw[kRawTranslation], raw[kRawTranslation + 1], raw[kRawTranslation + 2]);
  rotation_ = rotation_from_euler(euler_);
}

Superquadric Superquadric::from_raw(const RawParams& raw, const ParamBounds& bounds) {
  return Superquadric(raw, bounds);
}

Superquadric Superquadric::from_shape(const Vec3& alpha, const Vec2& epsilon, const Vec3& euler,
                                      const Vec3& translation, const ParamBounds& bounds) {
  RawParams raw{};
  const double k = bounds.alpha_sharpness;
  for (int i = 0; i < 3; ++i) {
    if (!(alpha[i] > bounds.alpha_min) || !std::isfinite(alpha[i])) {
      std::ostringstream msg;
      msg << "alpha[" << i << "] = " << alpha[i] << " must exceed alpha_min = " << bounds.alpha_min;
      throw ParameterOutOfBounds(msg.str());
    }
    raw[kRawAlpha + i] = inverse_softplus(k * (alpha[i] - bounds.alpha_min)) / k;
  }
  for (int j = 0; j < 2; ++j) {
    const double p = (epsilon[j] - bounds.eps_min) / (bounds.eps_max - bounds.eps_min);
    if (!(p > 0.0 && p < 1.0)) {
      std::ostringstream msg;
      msg << "epsilon[" << j << "] = " << epsilon[j] << " outside (" << bounds.eps_min << ", " << bounds.eps_max
          << ")";
      throw ParameterOutOfBounds(msg.str());
    }
    raw[kRawEpsilon + j] = logit(p) / bounds.eps_sharpness;
  }
  for (int i = 0; i < 3; ++i) {
    raw[kRawEuler + i] = euler[i];
    raw[kRawTranslation + i] = translation[i];
  }
  return from_raw(raw, bounds);
}

Vec3 Superquadric::alpha_jacobian() const {
  const double k = bounds_.alpha_sharpness;
  return Vec3(logistic(k * raw_[kRawAlpha]), logistic(k * raw_[kRawAlpha + 1]), logistic(k * raw_[kRawAlpha + 2]));
}

Vec2 Superquadric::epsilon_jacobian() const {
  const double span = bounds_.eps_max - bounds_.eps_min;
  Vec2 j;
  for (int i = 0; i < 2; ++i) {
    const double s = logistic(bounds_.eps_sharpness * raw_[kRawEpsilon + i]);
    j[i] = bounds_.eps_sharpness * span * s * (1.0 - s);
  }
  return j;
}

double implicit_value(const Vec3& x_canonical, const Vec3& alpha, const Vec2& epsilon) {
  return implicit_value<double>(x_canonical.data(), alpha.data(), epsilon[0], epsilon[1]);
}

double implicit_value(const Vec3& x_canonical, const Superquadric& p) {
  return implicit_value(x_canonical, p.alpha(), p.epsilon());
}

Vec3 world_to_canonical(const Vec3& x_world, const Superquadric& p) {
  return p.rotation().transpose() * (x_world - p.translation());
}

Vec3 canonical_to_world(const Vec3& x_canonical, const Superquadric& p) {
  return p.rotation() * x_canonical + p.translation();
}

double implicit_value_world(const Vec3& x_world, const Superquadric& p) {
  return implicit_value(world_to_canonical(x_world, p), p);
}

double density(const Vec3& x_world, const Superquadric& p, double gamma) {
  return logistic(gamma * (1.0 - implicit_value_world(x_world, p)));
}

ImplicitGrad implicit_value_grad(const double x[3], const double alpha[3], double eps1, double eps2) {
  ImplicitGrad g;
  double q[3], lq[3], dq_dx[3];
  for (int i = 0; i < 3; ++i) {
    const double r = std::abs(x[i]) / alpha[i];
    if (r > kAxisClamp) {
      q[i] = r;
      dq_dx[i] = (x[i] < 0 ? -1.0 : 1.0) / alpha[i];
    } else {
      q[i] = kAxisClamp;
      dq_dx[i] = 0.0;
    }
    lq[i] = std::log(q[i]);
  }
  const double p2 = 2.0 / eps2;
  const double p1 = 2.0 / eps1;
  const double u0 = std::exp(p2 * lq[0]);
  const double u1 = std::exp(p2 * lq[1]);
  const double b = std::exp(p1 * lq[2]);
  const double a = u0 + u1;
  const double la = std::log(a);
  const double ratio = eps2 / eps1;
  const double pa = std::exp(ratio * la);
  g.f = pa + b;

  const double dp_da = ratio * pa / a;
  // du/dq = p2 * u / q; dq/dalpha = -q/alpha when unclamped.
  const double du0_dq = p2 * u0 / q[0];
  const double du1_dq = p2 * u1 / q[1];
  const double db_dq = p1 * b / q[2];
  g.dx[0] = dp_da * du0_dq * dq_dx[0];
  g.dx[1] = dp_da * du1_dq * dq_dx[1];
  g.dx[2] = db_dq * dq_dx[2];
  g.dalpha[0] = dq_dx[0] != 0.0 ? -dp_da * du0_dq * q[0] / alpha[0] : 0.0;
  g.dalpha[1] = dq_dx[1] != 0.0 ? -dp_da * du1_dq * q[1] / alpha[1] : 0.0;
  g.dalpha[2] = dq_dx[2] != 0.0 ? -db_dq * q[2] / alpha[2] : 0.0;

  const double da_deps2 = -(p2 / eps2) * (lq[0] * u0 + lq[1] * u1);
  g.deps[0] = -(ratio / eps1) * la * pa - (p1 / eps1) * lq[2] * b;
  g.deps[1] = (la / eps1) * pa + dp_da * da_deps2;
  return g;
}

namespace {
// cos(pi/2) and sin(pi) round to ~1e-16, which small exponents would inflate
// to ~0.2; treat such residues as exact zeros.
constexpr double kTrigZero = 1e-15;

double signed_pow(double v, double e) {
  if (std::abs(v) < kTrigZero) return 0.0;
  const double m = std::pow(std::abs(v), e);
  return v < 0 ? -m : m;
}
}  // namespace

Vec3 surface_point_canonical(const Vec3& alpha, const Vec2& epsilon, double eta, double omega) {
  const double ce = signed_pow(std::cos(eta), epsilon[0]);
  const double se = signed_pow(std::sin(eta), epsilon[0]);
  const double co = signed_pow(std::cos(omega), epsilon[1]);
  const double so = signed_pow(std::sin(omega), epsilon[1]);
  return Vec3(alpha[0] * ce * co, alpha[1] * ce * so, alpha[2] * se);
}

Vec3 level_set_half_extents(const Vec3& alpha, const Vec2& epsilon, double level) {
  return alpha * std::pow(std::max(level, 1.0), 0.5 * epsilon[0]);
}

}  // namespace isco
