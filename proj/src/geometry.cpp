#include "semap/geometry.hpp"

#include <cmath>

namespace semap {

RigidTransform RigidTransform::from_quaternion(const Quat& q, const Vec3& t) {
  RigidTransform g;
  g.rotation = q.normalized().toRotationMatrix();
  g.translation = t;
  return g;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform c;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation * b.translation + a.translation;
  return c;
}

GravityDirection::GravityDirection(const Vec3& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw InvalidInput("gravity direction must be unit length");
  }
  dir_ = v / n;
}

GravityDirection GravityDirection::from_vector(const Vec3& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n < 1e-12) throw InvalidInput("gravity vector must be non-zero");
  return GravityDirection(v / n);
}

double PoseParams::depth() const { return std::exp(log_depth); }

Vec3 PoseParams::centroid_in_camera() const { return depth() * Vec3(x, y, 1.0); }

Mat3 hat(const Vec3& v) {
  Mat3 m;
  // clang-format off
  m <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat3 rodrigues(const Vec3& gamma, double theta) {
  const double n = gamma.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw InvalidInput("rodrigues: rotation axis must be unit length");
  }
  const Mat3 k = hat(gamma / n);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

NearSingularityError::NearSingularityError(const Vec3& best_effort)
    : NumericalError("so3_log: rotation angle within 1e-6 of pi, axis sign ambiguous"),
      best_effort_(best_effort) {}

double rotation_angle(const Mat3& r) {
  const double s = 0.5 * vee(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 skew = 0.5 * vee(r - r.transpose());  // sin(angle) * axis
  const double angle = rotation_angle(r);

  if (angle < 1e-10) return skew;
  if (angle < kPi - 1e-3) return (angle / std::sin(angle)) * skew;

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part, aa^T = (sym(R) - cos I) / (1 - cos).
  const double c = std::cos(angle);
  const Mat3 outer = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index col = 0;
  outer.diagonal().maxCoeff(&col);
  Vec3 axis = outer.col(col) / std::sqrt(std::max(outer(col, col), 1e-300));
  axis.normalize();
  if (axis.dot(skew) < 0.0) axis = -axis;
  const Vec3 result = angle * axis;
  if (kPi - angle < 1e-6) throw NearSingularityError(result);
  return result;
}

double wrap_angle(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;  // fmod rounding can land exactly on 2pi
  return w;
}

double angular_distance(double a, double b) {
  const double d = std::abs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

RigidTransform object_to_inertial(const PoseParams& p, const RigidTransform& ref_cam,
                                  const GravityDirection& gamma) {
  RigidTransform g;
  g.rotation = rodrigues(gamma, p.azimuth);
  g.translation = ref_cam.apply(p.centroid_in_camera());
  return g;
}

PoseParams inertial_to_params(const RigidTransform& g_io, const RigidTransform& ref_cam,
                              const GravityDirection& gamma) {
  const Vec3 in_cam = ref_cam.inverse().apply(g_io.translation);
  if (!(in_cam.z() > 0.0)) throw InvalidInput("inertial_to_params: object behind reference camera");
  const Mat3& r = g_io.rotation;
  const double s = gamma.vector().dot(0.5 * vee(r - r.transpose()));
  const double c = 0.5 * (r.trace() - 1.0);
  PoseParams p;
  p.x = in_cam.x() / in_cam.z();
  p.y = in_cam.y() / in_cam.z();
  p.log_depth = std::log(in_cam.z());
  p.azimuth = wrap_angle(std::atan2(s, c));
  return p;
}

RigidTransform relative_object_in_camera(const RigidTransform& g_io, const RigidTransform& cam_t) {
  return cam_t.inverse() * g_io;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const GravityDirection& gamma) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 up = -gamma.vector();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) throw InvalidInput("look_at: viewing direction parallel to gravity");
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidTransform g;
  g.rotation.col(0) = right;
  g.rotation.col(1) = down;
  g.rotation.col(2) = forward;
  g.translation = eye;
  return g;
}

}  // namespace semap
