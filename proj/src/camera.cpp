#include "isco/camera.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "isco/errors.hpp"

namespace isco {

Eigen::Vector2d pixel_center(const CameraView& view, int index) {
  return {index % view.width + 0.5, index / view.width + 0.5};
}

Ray pixel_ray(const CameraView& view, double px, double py, const SceneBounds& bounds) {
  const Intrinsics& k = view.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0) || !std::isfinite(k.fx) || !std::isfinite(k.fy))
    throw NonFiniteIntrinsics("focal lengths must be finite and positive");
  const Vec3 d_cam((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
  Ray r;
  r.origin = view.position();
  r.direction = (view.rotation() * d_cam).normalized();

  const Vec3 oc = bounds.center - r.origin;
  const double t_mid = oc.dot(r.direction);
  const double dist2 = oc.squaredNorm() - t_mid * t_mid;
  const double disc = bounds.radius * bounds.radius - dist2;
  if (disc <= 0.0) {
    r.t_near = r.t_far = std::max(t_mid, 0.0);
    return r;
  }
  const double half = std::sqrt(disc);
  r.t_near = std::max(0.0, 0.95 * (t_mid - half));
  r.t_far = 1.05 * (t_mid + half);
  return r;
}

Ray pixel_ray(const CameraView& view, int index, const SceneBounds& bounds) {
  const auto c = pixel_center(view, index);
  return pixel_ray(view, c.x(), c.y(), bounds);
}

Eigen::Vector2d project(const CameraView& view, const Vec3& x_world) {
  const Vec3 x_cam = view.rotation().transpose() * (x_world - view.position());
  const Intrinsics& k = view.intrinsics;
  return {k.fx * x_cam.x() / x_cam.z() + k.cx, k.fy * x_cam.y() / x_cam.z() + k.cy};
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  // Image y points down, so the camera's -y should align with `up`.
  Vec3 x = z.cross(up);
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 0) = x;
  m.block<3, 1>(0, 1) = y;
  m.block<3, 1>(0, 2) = z;
  m.block<3, 1>(0, 3) = eye;
  return m;
}

void validate_view(const CameraView& view, double rotation_tol) {
  const Intrinsics& k = view.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0) || !std::isfinite(k.fx) || !std::isfinite(k.fy) || !std::isfinite(k.cx) ||
      !std::isfinite(k.cy))
    throw NonFiniteIntrinsics("focal lengths must be finite and positive");
  if (!view.cam_to_world.allFinite()) throw NonRigidPose("cam_to_world has non-finite entries");
  const Mat3 r = view.rotation();
  const double ortho_err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = r.determinant();
  if (ortho_err > rotation_tol || std::abs(det - 1.0) > rotation_tol) {
    std::ostringstream msg;
    msg << "rotation block is not a proper rotation (orthonormality error " << ortho_err << ", det " << det << ")";
    throw NonRigidPose(msg.str());
  }
  const Eigen::RowVector4d last = view.cam_to_world.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > rotation_tol)
    throw NonRigidPose("last row of cam_to_world must be 0 0 0 1");
  if (view.width <= 0 || view.height <= 0) throw DimensionMismatch("image dimensions must be positive");
  if (!view.silhouette.empty() && view.silhouette.size() != static_cast<std::size_t>(view.pixel_count()))
    throw DimensionMismatch("silhouette size does not match width*height");
}

}  // namespace isco
