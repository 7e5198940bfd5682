#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace isco {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumParams = 11;
using RawParams = std::array<double, kNumParams>;

// Layout of the unconstrained parameter vector.
inline constexpr int kRawAlpha = 0;        // 3 entries
inline constexpr int kRawEpsilon = 3;      // 2 entries
inline constexpr int kRawEuler = 5;        // 3 entries (about x, y, z)
inline constexpr int kRawTranslation = 8;  // 3 entries

// |x_i / alpha_i| is clamped to at least this before fractional powers.
inline constexpr double kAxisClamp = 1e-9;

template <class Real>
Real logistic(Real z) {
  using std::exp;
  if (z >= Real(0)) return Real(1) / (Real(1) + exp(-z));
  const Real e = exp(z);
  return e / (Real(1) + e);
}

template <class Real>
Real softplus(Real z) {
  using std::exp;
  using std::log1p;
  return z > Real(0) ? z + log1p(exp(-z)) : log1p(exp(z));
}

double inverse_softplus(double y);
double logit(double p);

/// Maps between the unconstrained optimisation vector and the shape
/// parameters:
///   alpha_i   = alpha_min + softplus(sharpness * raw_i) / sharpness
///   epsilon_j = eps_min + (eps_max - eps_min) * logistic(eps_sharpness * raw_j)
/// Euler angles and translation are used as-is.
struct ParamBounds {
  double alpha_min = 1e-3;
  double alpha_sharpness = 20.0;
  double eps_min = 0.1;
  double eps_max = 1.9;
  double eps_sharpness = 1.0;

  /// Bounds scaled for a scene of the given bounding radius.
  static ParamBounds for_scene_radius(double radius);

  bool operator==(const ParamBounds&) const = default;
};

/// Rotation R = Rz(e.z) * Ry(e.y) * Rx(e.x), i.e. intrinsic Z-Y-X.
Mat3 rotation_from_euler(const Vec3& euler);

/// dR/de_x, dR/de_y, dR/de_z.
std::array<Mat3, 3> rotation_derivatives(const Vec3& euler);

/// One superquadric primitive. The raw vector is the source of truth; the
/// constrained fields are derived from it and cached.
class Superquadric {
 public:
  /// All-zero raw vector under default bounds (a small sphere at the origin).
  Superquadric() : Superquadric(RawParams{}, ParamBounds{}) {}

  static Superquadric from_raw(const RawParams& raw, const ParamBounds& bounds);

  /// Inverse of the raw mapping. Throws ParameterOutOfBounds if alpha or
  /// epsilon cannot be represented under `bounds`.
  static Superquadric from_shape(const Vec3& alpha, const Vec2& epsilon, const Vec3& euler, const Vec3& translation,
                                 const ParamBounds& bounds);

  static Superquadric sphere(const Vec3& center, double radius, const ParamBounds& bounds) {
    return from_shape(Vec3::Constant(radius), Vec2::Ones(), Vec3::Zero(), center, bounds);
  }

  const RawParams& raw() const { return raw_; }
  const ParamBounds& bounds() const { return bounds_; }
  const Vec3& alpha() const { return alpha_; }
  const Vec2& epsilon() const { return epsilon_; }
  const Vec3& euler() const { return euler_; }
  const Vec3& translation() const { return translation_; }
  const Mat3& rotation() const { return rotation_; }

  /// d alpha_i / d raw_i and d epsilon_j / d raw_j.
  Vec3 alpha_jacobian() const;
  Vec2 epsilon_jacobian() const;

 private:
  Superquadric(const RawParams& raw, const ParamBounds& bounds);

  RawParams raw_{};
  ParamBounds bounds_{};
  Vec3 alpha_;
  Vec2 epsilon_;
  Vec3 euler_;
  Vec3 translation_;
  Mat3 rotation_;
};

/// Ordered primitives; index i was inserted at fitting iteration i + 1.
struct Composition {
  std::vector<Superquadric> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

/// Canonical-frame implicit function. < 1 inside, 1 on the surface, > 1 outside.
template <class Real>
Real implicit_value(const Real x[3], const Real alpha[3], Real eps1, Real eps2) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::max;
  const Real clamp = Real(kAxisClamp);
  const Real q0 = max(abs(x[0] / alpha[0]), clamp);
  const Real q1 = max(abs(x[1] / alpha[1]), clamp);
  const Real q2 = max(abs(x[2] / alpha[2]), clamp);
  const Real u0 = exp(Real(2) / eps2 * log(q0));
  const Real u1 = exp(Real(2) / eps2 * log(q1));
  const Real b = exp(Real(2) / eps1 * log(q2));
  return exp(eps2 / eps1 * log(u0 + u1)) + b;
}

double implicit_value(const Vec3& x_canonical, const Vec3& alpha, const Vec2& epsilon);
double implicit_value(const Vec3& x_canonical, const Superquadric& p);

/// R^T (x_world - t).
Vec3 world_to_canonical(const Vec3& x_world, const Superquadric& p);
/// R x + t.
Vec3 canonical_to_world(const Vec3& x_canonical, const Superquadric& p);

/// Implicit value after the rigid transform.
double implicit_value_world(const Vec3& x_world, const Superquadric& p);

/// logistic(gamma * (1 - f)).
double density(const Vec3& x_world, const Superquadric& p, double gamma);

/// Partial derivatives of the canonical implicit function.
struct ImplicitGrad {
  double f = 0.0;
  double dx[3] = {0, 0, 0};
  double dalpha[3] = {0, 0, 0};
  double deps[2] = {0, 0};
};

ImplicitGrad implicit_value_grad(const double x[3], const double alpha[3], double eps1, double eps2);

/// Point on the parametric surface, eta in [-pi/2, pi/2], omega in [-pi, pi].
Vec3 surface_point_canonical(const Vec3& alpha, const Vec2& epsilon, double eta, double omega);

/// Half extents of the canonical box containing {x : f(x) <= level}, level >= 1.
Vec3 level_set_half_extents(const Vec3& alpha, const Vec2& epsilon, double level);

}  // namespace isco
