#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "isco/rng.hpp"
#include "isco/sqcore.hpp"

namespace isco::test {

inline Superquadric random_primitive(Rng& rng, const ParamBounds& b = ParamBounds{}, double alpha_lo = 0.1,
                                     double alpha_hi = 0.5, double spread = 0.4) {
  const Vec3 alpha(rng.uniform(alpha_lo, alpha_hi), rng.uniform(alpha_lo, alpha_hi), rng.uniform(alpha_lo, alpha_hi));
  const Vec2 eps(rng.uniform(b.eps_min + 0.05, b.eps_max - 0.05), rng.uniform(b.eps_min + 0.05, b.eps_max - 0.05));
  const Vec3 euler(rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI));
  const Vec3 t(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-spread, spread));
  return Superquadric::from_shape(alpha, eps, euler, t, b);
}

inline Vec3 random_point(Rng& rng, double r) {
  return {rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("isco_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace isco::test
