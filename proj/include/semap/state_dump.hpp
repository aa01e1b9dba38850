#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "semap/filter.hpp"
#include "semap/io.hpp"

namespace semap {

// One JSON line per frame in states.jsonl.

struct ObjectEstimate {
  int id = 0;
  TrackStatus status = TrackStatus::initializing;
  int shape = 0;
  int category = 0;
  std::vector<std::pair<int, double>> shape_posterior;
  PoseParams pose;
  Anchor anchor;
  RigidTransform inertial;
  std::optional<double> ess;
};

struct FrameEstimate {
  int frame = 0;
  double timestamp = 0.0;
  bool accepted = true;
  std::vector<ObjectEstimate> objects;
};

FrameEstimate snapshot_world(const WorldState& world, const FrameObservation& obs, const StepReport& report,
                             const ShapeDatabase& db);

Json frame_estimate_to_json(const FrameEstimate& f);
FrameEstimate frame_estimate_from_json(const Json& j);

void write_state_line(std::ostream& out, const FrameEstimate& f);
/// Throws ParseError with the 1-based line number on malformed records.
std::vector<FrameEstimate> read_state_dump(const std::filesystem::path& path);

TrackStatus status_from_string(const std::string& s);

}  // namespace semap
