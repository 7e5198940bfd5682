#pragma once

#include <cmath>

#include "isco/camera.hpp"
#include "isco/sqcore.hpp"

namespace isco::test {

/// Density of a superquadric written out directly with std::pow and a
/// hand-composed rotation.
inline double oracle_density(const Vec3& xw, const Vec3& alpha, const Vec2& eps, const Vec3& euler, const Vec3& t,
                             double gamma) {
  const double cx = std::cos(euler[0]), sx = std::sin(euler[0]), cy = std::cos(euler[1]), sy = std::sin(euler[1]),
               cz = std::cos(euler[2]), sz = std::sin(euler[2]);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  const Vec3 x = (rz * ry * rx).transpose() * (xw - t);
  const double f = std::pow(std::pow(std::abs(x[0] / alpha[0]), 2 / eps[1]) +
                                std::pow(std::abs(x[1] / alpha[1]), 2 / eps[1]),
                            eps[1] / eps[0]) +
                   std::pow(std::abs(x[2] / alpha[2]), 2 / eps[0]);
  return 1.0 / (1.0 + std::exp(-gamma * (1.0 - f)));
}

/// 1 - exp(-c * integral of sigma) by composite Simpson over [t_near, t_far].
inline double oracle_opacity(const Ray& r, const Superquadric& p, double gamma, double extinction, int n = 100000) {
  if (!(r.t_far > r.t_near)) return 0.0;
  if (n % 2) ++n;
  const double h = (r.t_far - r.t_near) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const Vec3 x = r.origin + (r.t_near + i * h) * r.direction;
    acc += w * oracle_density(x, p.alpha(), p.epsilon(), p.euler(), p.translation(), gamma);
  }
  return 1.0 - std::exp(-extinction * acc * h / 3.0);
}

inline Ray axis_ray(double offset_x, double t_near = 1.0, double t_far = 5.0) {
  Ray r;
  r.origin = Vec3(offset_x, 0, -3);
  r.direction = Vec3::UnitZ();
  r.t_near = t_near;
  r.t_far = t_far;
  return r;
}

}  // namespace isco::test
