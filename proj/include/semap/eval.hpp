#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semap/geometry.hpp"
#include "semap/io.hpp"
#include "semap/mesh.hpp"
#include "semap/state_dump.hpp"

namespace semap {

struct PosedShape {
  int object_id = 0;
  int shape = 0;
  RigidTransform pose;  // object to inertial
};

/// Database meshes placed at their poses. `mesh` is the union of the
/// components in order.
struct SceneMesh {
  std::vector<PosedShape> components;
  TriMesh mesh;

  bool empty() const { return components.empty(); }
};

/// Throws InvalidInput for a shape id missing from the database.
SceneMesh assemble_scene(std::span<const PosedShape> parts, const ShapeDatabase& db);
/// Non-lost objects at their mean states.
SceneMesh assemble_scene(const FrameEstimate& frame, const ShapeDatabase& db);

enum class IcpMode { full, gravity_constrained };

struct IcpOptions {
  IcpMode mode = IcpMode::full;
  GravityDirection gravity = GravityDirection(Vec3(0.0, 0.0, -1.0));
  RigidTransform init;
  int max_iterations = 50;
  double tolerance = 1e-12;  // stop when the objective improves by less
};

struct IcpResult {
  RigidTransform transform;        // maps source points onto the target
  std::vector<double> objective;   // mean squared correspondence distance, one entry per evaluation
  int iterations = 0;              // updates applied
};

/// Point-to-point ICP. Throws InvalidInput on fewer than 3 points or a
/// collinear source, and NumericalError if the objective ever increases.
/// In constrained mode `init` must fix the gravity direction.
IcpResult icp_align(const PointCloud& source, const TriMesh& target, const IcpOptions& opts);
/// Point targets use exhaustive nearest neighbours.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpOptions& opts);

struct SurfaceErrorStats {
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
};

SurfaceErrorStats summarize(std::vector<double> distances);

struct SurfaceErrorOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool align = true;
  IcpOptions icp;
  int threads = 1;
};

struct SurfaceErrorResult {
  SurfaceErrorStats stats;
  std::optional<IcpResult> alignment;
};

SurfaceErrorResult surface_error(const SceneMesh& estimated, const TriMesh& ground_truth,
                                 const SurfaceErrorOptions& opts);

struct PoseError {
  double translational = 0.0;  // meters
  double rotational = 0.0;     // radians, in [0, pi]
};

PoseError pose_error(const RigidTransform& est, const RigidTransform& gt);

inline double to_degrees(double rad) { return rad * 180.0 / kPi; }

struct ObjectReport {
  int gt_id = 0;
  int gt_shape = 0;
  std::optional<int> estimate_id;
  int estimate_shape = 0;
  bool shape_correct = false;
  PoseError final_error;
  std::optional<PoseError> mean_error;  // over frames where the estimate exists
  int frames_tracked = 0;
};

struct EvalReport {
  std::optional<SurfaceErrorStats> surface;
  std::vector<ObjectReport> objects;
  int estimated_objects = 0;
};

/// Matches final-frame estimates to ground-truth objects greedily by
/// translation distance, then scores the pairs and the assembled scene.
EvalReport evaluate(std::span<const FrameEstimate> frames, std::span<const PosedShape> ground_truth,
                    const ShapeDatabase& db, const SurfaceErrorOptions& opts);

Json eval_report_to_json(const EvalReport& r);
std::string eval_report_to_csv(const EvalReport& r);

}  // namespace semap
