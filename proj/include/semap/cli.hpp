#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "semap/image.hpp"
#include "semap/perception.hpp"
#include "semap/state_dump.hpp"

namespace semap {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

/// Entry point of the `semap` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv);

/// Overlay for one frame: edge map as background, mean-state masks shaded by
/// centroid depth (nearer is darker), their contours, and proposal boxes.
Rgb8 render_overlay(const FrameEstimate& state, const FrameObservation& obs, const ShapeDatabase& db,
                    const CameraIntrinsics& k);

}  // namespace semap
