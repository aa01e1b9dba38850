#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semap/geometry.hpp"

namespace semap {

using Json = nlohmann::json;

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed JSON followed by a newline.
void write_json(const std::filesystem::path& path, const Json& j);

/// Throws ConfigError naming the offending key if `j` has keys outside `allowed`.
void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where);

Vec3 vec3_from_json(const Json& j, const std::string& what);
Json vec3_to_json(const Vec3& v);
Json transform_to_json(const RigidTransform& g);
RigidTransform transform_from_json(const Json& j);

/// Camera-to-inertial pose stamped in seconds. The quaternion is the stored
/// form so that a file round trip reproduces the rotation matrix bit-exactly.
struct TimedPose {
  double timestamp = 0.0;
  Quat orientation = Quat::Identity();
  Vec3 position = Vec3::Zero();

  RigidTransform pose() const { return RigidTransform::from_quaternion(orientation, position); }
};

/// Trajectory text: `timestamp tx ty tz qx qy qz qw` per line.
std::vector<TimedPose> load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const std::vector<TimedPose>& poses);

}  // namespace semap
