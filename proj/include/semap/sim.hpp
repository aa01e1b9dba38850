#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semap/eval.hpp"
#include "semap/io.hpp"
#include "semap/mesh.hpp"
#include "semap/perception.hpp"

namespace semap {

/// Four shapes built from boxes, each centered on its bounding box with z up:
/// 1 chair_a, 2 chair_b (category 1 chair), 3 table (2), 4 cabinet (3).
ShapeDatabase default_shape_database();

struct ObjectSpec {
  int id = 0;
  int shape = 0;
  Vec3 position = Vec3::Zero();  // centroid in the inertial frame
  double azimuth = 0.0;          // rotation about gravity

  RigidTransform pose(const GravityDirection& gamma) const { return {rodrigues(gamma, azimuth), position}; }
};

struct TrajectorySpec {
  std::vector<RigidTransform> keyframes;  // camera-to-inertial, spread evenly over the frames
  int frames = 1;
  double start_time = 0.0;
  double frame_interval = 1.0 / 30.0;

  void validate() const;
};

/// Camera pose at `frame`: linear translation and slerp between the two
/// enclosing keyframes.
RigidTransform interpolate_camera(const TrajectorySpec& t, int frame);

/// One keyframe per frame on a circle about `center` (in the plane normal to
/// gravity, raised by `height` against gravity), each looking at `center`.
std::vector<RigidTransform> orbit_keyframes(const Vec3& center, double radius, double height, double start_angle,
                                            double sweep, int count, const GravityDirection& gamma);

struct SceneSpec {
  GravityDirection gravity = GravityDirection(Vec3(0.0, 0.0, -1.0));
  CameraIntrinsics intrinsics{277.0, 277.0, 160.0, 120.0, 320, 240};
  std::vector<ObjectSpec> objects;
  TrajectorySpec trajectory;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  int clutter_categories = 3;
  /// Proposals of an object are dropped on frames where its occlusion
  /// fraction reaches this value.
  std::optional<double> occlusion_dropout;
  std::string database;  // manifest path; empty selects the built-in database

  /// Throws ConfigError on bad parameters or ids, InvalidInput on shapes
  /// missing from `db`.
  void validate(const ShapeDatabase& db) const;
};

/// Parses the scene-spec document (`version` required, unknown keys rejected).
SceneSpec scene_spec_from_json(const Json& j);

struct GroundTruthBox {
  int id = 0;
  int category = 0;
  PixelBox box;
  bool detected = false;  // a true proposal was emitted this frame
};

struct GeneratedFrame {
  TimedPose pose;
  std::vector<DetectionProposal> proposals;
  EdgeMap edges;
  std::vector<GroundTruthBox> boxes;             // visible ground-truth boxes
  std::map<int, std::optional<double>> occlusion;  // hidden / unoccluded pixels; empty when out of view
};

struct Sequence {
  SceneSpec spec;
  std::vector<PosedShape> objects;
  std::vector<GeneratedFrame> frames;

  double mean_occlusion(int id) const;
};

Sequence generate(const SceneSpec& spec, const ShapeDatabase& db);

/// Writes trajectory.txt, proposals.jsonl, edges/%06d.pgm and manifest.json.
void write_sequence(const Sequence& seq, const ShapeDatabase& db, const std::filesystem::path& dir);

/// Ground truth read back from manifest.json.
struct SequenceManifest {
  GravityDirection gravity = GravityDirection(Vec3(0.0, 0.0, -1.0));
  CameraIntrinsics intrinsics;
  std::string database;
  std::vector<PosedShape> objects;
  std::map<int, std::vector<GroundTruthBox>> boxes;  // frame -> boxes
  int frames = 0;
};

SequenceManifest read_manifest(const std::filesystem::path& path);

/// Reference boxes for the oracle detector: visible ground-truth boxes on
/// each frame, whether or not a proposal was emitted for them.
std::map<int, std::vector<ReferenceBox>> oracle_references(const SequenceManifest& m);

/// Two objects where A (id 1) passes between the camera and B (id 2) during
/// the middle of the trajectory. B keeps a visible sliver throughout.
SceneSpec occlusion_fixture(std::uint64_t seed = 1, int frames = 120);

/// One object seen by a camera orbiting it at `range` meters.
SceneSpec single_object_fixture(int shape, std::uint64_t seed, int frames = 100, double range = 1.5);

}  // namespace semap

namespace semap {

Json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);
Json noise_to_json(const NoiseConfig& n);
NoiseConfig noise_from_json(const Json& j);

}  // namespace semap
