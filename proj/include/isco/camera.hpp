#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "isco/sqcore.hpp"

namespace isco {

using Mat4 = Eigen::Matrix4d;

/// Bounding sphere of everything that can be reconstructed.
struct SceneBounds {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Pinhole camera. Camera frame: +z forward, +x right, +y down. Pixel (u, v)
/// covers [u, u+1) x [v, v+1) in continuous image coordinates.
struct CameraView {
  Intrinsics intrinsics;
  Mat4 cam_to_world = Mat4::Identity();
  int width = 0;
  int height = 0;
  /// Row-major width*height raster in [0,1]. May be empty for pose-only views.
  std::vector<float> silhouette;

  Vec3 position() const { return cam_to_world.block<3, 1>(0, 3); }
  Mat3 rotation() const { return cam_to_world.block<3, 3>(0, 0); }
  Vec3 optical_axis() const { return rotation().col(2); }
  int pixel_count() const { return width * height; }
  double target(int pixel) const { return silhouette[static_cast<std::size_t>(pixel)]; }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 0.0;

  bool empty() const { return !(t_far > t_near); }
};

/// Continuous coordinates of the center of pixel `index`.
Eigen::Vector2d pixel_center(const CameraView& view, int index);

/// Ray from the camera center through image point (px, py). The depth
/// interval is the intersection with the bounding sphere, widened by 5% at
/// each end; rays missing the sphere get t_near == t_far.
Ray pixel_ray(const CameraView& view, double px, double py, const SceneBounds& bounds);
Ray pixel_ray(const CameraView& view, int index, const SceneBounds& bounds);

inline Vec3 ray_point(const Ray& r, double t) { return r.origin + t * r.direction; }

/// Image coordinates of a world point (assumes it lies in front of the camera).
Eigen::Vector2d project(const CameraView& view, const Vec3& x_world);

/// Look-at pose: camera at `eye` looking at `target`; the image "up" is as
/// close to `up` as possible.
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

/// Throws NonFiniteIntrinsics / NonRigidPose / DimensionMismatch.
void validate_view(const CameraView& view, double rotation_tol = 1e-9);

}  // namespace isco
