#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semap/filter.hpp"
#include "semap/io.hpp"
#include "semap/sim.hpp"
#include "semap/state_dump.hpp"

namespace semap {

/// Parses the "filter" section; every key is optional and unknown keys are
/// rejected. Throws ConfigError.
FilterConfig filter_config_from_json(const Json& j);
Json filter_config_to_json(const FilterConfig& c);

/// "builtin" (or empty) selects default_shape_database().
ShapeDatabase load_database(const std::string& ref);

/// Observations of an in-memory sequence, exactly as they would be read back
/// from its files.
std::vector<FrameObservation> observations_from(const Sequence& seq);

/// Reads trajectory.txt, proposals.jsonl and edges/ of a sequence directory.
/// Throws DataError when a file is missing or inconsistent with the manifest.
std::vector<FrameObservation> load_observations(const std::filesystem::path& dir, const SequenceManifest& m);

std::map<int, std::vector<ReferenceBox>> oracle_references(const Sequence& seq);

struct FilterRun {
  WorldState world;
  std::vector<FrameEstimate> states;  // one per input frame
};

/// Steps the filter over every frame, optionally streaming each state record.
FilterRun run_filter(const SemanticFilter& filter, std::span<const FrameObservation> frames, const ShapeDatabase& db,
                     std::ostream* dump = nullptr);

/// Final-world summary: per object status, shape posterior and mean pose.
Json world_summary(const FilterRun& run);

}  // namespace semap
