#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semap/error.hpp"

namespace semap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.14159265358979323846264338327950;

/// Element of SE(3) acting on points as p -> R p + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_quaternion(const Quat& q, const Vec3& t);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  Quat quaternion() const { return Quat(rotation).normalized(); }

  /// True when the rotation block is orthonormal with det +1 (tolerance tol).
  bool is_valid(double tol = 1e-9) const;
};

/// Composition (a * b)(p) = a(b(p)).
RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

/// Unit direction of gravity in the inertial frame.
class GravityDirection {
 public:
  /// Validates that v is already unit length (deviation <= 1e-6) and
  /// renormalizes it to machine precision.
  explicit GravityDirection(const Vec3& v);
  /// Normalizes an arbitrary non-zero vector.
  static GravityDirection from_vector(const Vec3& v);

  const Vec3& vector() const { return dir_; }

 private:
  Vec3 dir_;
};

/// Object pose chart anchored at a reference camera: bearing (x, y) in
/// normalized camera coordinates, log depth, and azimuth about gravity.
struct PoseParams {
  double x = 0.0;
  double y = 0.0;
  double log_depth = 0.0;
  double azimuth = 0.0;

  double depth() const;
  /// Object centroid in the reference camera frame.
  Vec3 centroid_in_camera() const;
};

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Rotation by theta about the unit axis gamma.
/// Throws InvalidInput when |gamma| deviates from 1 by more than 1e-6.
Mat3 rodrigues(const Vec3& gamma, double theta);
inline Mat3 rodrigues(const GravityDirection& gamma, double theta) {
  return rodrigues(gamma.vector(), theta);
}

/// Raised by so3_log when the rotation angle is within 1e-6 of pi. The axis
/// sign is ambiguous there; best_effort() holds the symmetric-part estimate.
class NearSingularityError : public NumericalError {
 public:
  NearSingularityError(const Vec3& best_effort);
  const Vec3& best_effort() const { return best_effort_; }

 private:
  Vec3 best_effort_;
};

/// Logarithm map SO(3) -> so(3) in vector form (axis * angle).
Vec3 so3_log(const Mat3& r);

/// Rotation angle in [0, pi]; stable over the whole range.
double rotation_angle(const Mat3& r);

/// Wraps an angle into [0, 2pi).
double wrap_angle(double theta);
/// Shortest angular distance, in [0, pi].
double angular_distance(double a, double b);

/// g_io: object pose in the inertial frame from the anchored chart.
RigidTransform object_to_inertial(const PoseParams& p, const RigidTransform& ref_cam,
                                  const GravityDirection& gamma);

/// Inverse chart of object_to_inertial: re-expresses an inertial pose whose
/// rotation is about gamma against a (possibly different) reference camera.
PoseParams inertial_to_params(const RigidTransform& g_io, const RigidTransform& ref_cam,
                              const GravityDirection& gamma);

/// cam_t^{-1} * g_io: the object in the current camera frame.
RigidTransform relative_object_in_camera(const RigidTransform& g_io, const RigidTransform& cam_t);

/// Camera-to-inertial pose of a camera at `eye` looking at `target`, with image
/// "down" aligned with gravity (optical axis z, x right, y down).
RigidTransform look_at(const Vec3& eye, const Vec3& target, const GravityDirection& gamma);

}  // namespace semap
