#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "semap/geometry.hpp"
#include "semap/image.hpp"
#include "semap/mesh.hpp"
#include "semap/raster.hpp"

namespace semap {

struct DetectionProposal {
  int frame = 0;
  PixelBox box;
  int category = 0;
  double score = 0.0;

  bool operator==(const DetectionProposal&) const = default;
};

/// Per-pixel edge probability in [0, 1].
using EdgeMap = Image<float>;

struct FrameObservation {
  int index = 0;
  double timestamp = 0.0;
  RigidTransform camera;  // g_ic(t), camera-to-inertial
  GravityDirection gravity = GravityDirection(Vec3(0.0, 0.0, -1.0));
  std::vector<DetectionProposal> proposals;
  EdgeMap edges;
};

struct LikelihoodWeights {
  double alpha = 1.0;  // detector term
  double beta = 1.0;   // edge term

  void validate() const;
};

/// L = alpha * phi_cnn + beta * phi_edge.
inline double combined_log_likelihood(double phi_cnn, double phi_edge, const LikelihoodWeights& w) {
  return w.alpha * phi_cnn + w.beta * phi_edge;
}

// ---------------------------------------------------------------------------
// Detector-score term

class ProviderError : public Error {
 public:
  using Error::Error;
};

struct BoxQuery {
  PixelBox box;
  int category = 0;
};

/// Scores hypothesis boxes against one frame, in the log domain. All queries
/// of a frame go through one batched call. Implementations must tolerate
/// concurrent calls.
class DetectorProvider {
 public:
  virtual ~DetectorProvider() = default;

  /// One log-score per query. Throws ProviderError when the frame cannot be scored.
  virtual std::vector<double> score_batch(int frame, std::span<const BoxQuery> queries) const = 0;
  /// Lowest log-score the provider can return.
  virtual double floor_log_score() const = 0;

  double score(int frame, const PixelBox& box, int category) const;
};

struct ReferenceBox {
  PixelBox box;
  int category = 0;
};

/// Synthetic stand-in for a detection network: the score rises linearly with
/// the best IoU against the frame's reference boxes of the queried category,
/// from `floor` (no overlap) to `ceiling` (exact match).
class OracleDetector final : public DetectorProvider {
 public:
  explicit OracleDetector(std::map<int, std::vector<ReferenceBox>> frames, double floor = 0.02,
                          double ceiling = 0.98);

  std::vector<double> score_batch(int frame, std::span<const BoxQuery> queries) const override;
  double floor_log_score() const override { return std::log(floor_); }

 private:
  std::map<int, std::vector<ReferenceBox>> frames_;
  double floor_;
  double ceiling_;
};

// ---------------------------------------------------------------------------
// Edge term

struct EdgeSearchParams {
  int radius = 10;           // pixels searched on each side along the normal
  double sigma = 3.0;        // pixels
  double threshold = 0.5;    // minimum edge probability counted as a response
  int max_samples = 200;     // contour points scored per hypothesis
  double floor = 1e-6;       // applied before taking the log

  void validate() const;
};

/// Indices of at most `max_samples` evenly spaced entries out of `count`.
std::vector<size_t> subsample_indices(size_t count, int max_samples);

/// One-dimensional normal search. For every sampled contour point (points
/// with a zero normal are skipped) march 0, +-1, ..., +-radius pixels along
/// the normal and take the nearest offset whose response exceeds the
/// threshold; the point scores exp(-d^2 / 2 sigma^2), or 0 with no response.
/// Returns log(max(mean score, floor)). `lookup(x, y)` is only called for
/// in-image pixels on the searched segments.
template <typename Lookup>
double edge_likelihood_with(std::span<const ContourPoint> contour, int width, int height, Lookup&& lookup,
                            const EdgeSearchParams& params) {
  std::vector<const ContourPoint*> usable;
  usable.reserve(contour.size());
  for (const auto& c : contour) {
    if (c.nx != 0.0 || c.ny != 0.0) usable.push_back(&c);
  }
  if (usable.empty()) return std::log(params.floor);

  const double inv_two_sigma_sq = 1.0 / (2.0 * params.sigma * params.sigma);
  double total = 0.0;
  const auto picks = subsample_indices(usable.size(), params.max_samples);
  for (size_t idx : picks) {
    const ContourPoint& c = *usable[idx];
    const double cx = c.x + 0.5, cy = c.y + 0.5;
    for (int t = 0; t <= params.radius; ++t) {
      bool hit = false;
      for (int sign : {1, -1}) {
        if (t == 0 && sign < 0) break;
        const int px = static_cast<int>(std::floor(cx + sign * t * c.nx));
        const int py = static_cast<int>(std::floor(cy + sign * t * c.ny));
        if (px < 0 || py < 0 || px >= width || py >= height) continue;
        if (lookup(px, py) > params.threshold) {
          hit = true;
          break;
        }
      }
      if (hit) {
        total += std::exp(-static_cast<double>(t * t) * inv_two_sigma_sq);
        break;
      }
    }
  }
  const double mean = total / static_cast<double>(picks.size());
  return std::log(std::max(mean, params.floor));
}

double edge_likelihood(std::span<const ContourPoint> contour, const EdgeMap& edges, const EdgeSearchParams& params);

// ---------------------------------------------------------------------------
// Synthetic observations

struct SceneObject {
  int id = 0;
  int shape = 0;
  int category = 0;
  const TriMesh* mesh = nullptr;
  RigidTransform pose;  // object-to-inertial
};

struct SyntheticScene {
  std::vector<SceneObject> objects;
  CameraIntrinsics intrinsics;
  GravityDirection gravity = GravityDirection(Vec3(0.0, 0.0, -1.0));
  int clutter_categories = 1;  // clutter proposals draw categories from 1..this
};

struct NoiseConfig {
  double box_sigma = 0.0;          // pixels, per box coordinate
  double dropout = 0.0;            // probability a true proposal is missed
  double clutter_rate = 0.0;       // mean false-positive proposals per frame
  double edge_blur = 0.0;          // Gaussian sigma in pixels
  double edge_clutter_rate = 0.0;  // mean spurious edge segments per frame
  int edge_clutter_length = 20;    // pixels
  double true_score = 0.95;        // confidence attached to true proposals

  void validate() const;
};

struct SyntheticFrame {
  FrameObservation observation;
  RenderBuffers truth;  // noise-free render of the whole scene
  std::set<int> detected;  // objects that produced a true proposal
};

/// Renders the ground-truth scene from `camera` and corrupts it into an
/// observation. Objects listed in `suppressed` produce no proposal this frame.
/// Edge probabilities are quantized to k/255 so they survive a graymap round trip.
SyntheticFrame synth_frame(const SyntheticScene& scene, int frame, double timestamp, const RigidTransform& camera,
                           const NoiseConfig& noise, std::uint64_t seed, const std::set<int>& suppressed = {});

/// Renders the scene's objects as seen from `camera`.
RenderBuffers render_truth(const SyntheticScene& scene, const RigidTransform& camera);

// ---------------------------------------------------------------------------
// On-disk forms

/// Newline-delimited JSON: {"frame", "box": [x0, y0, x1, y1], "category", "score"}.
void write_proposals(const std::filesystem::path& path, const std::vector<DetectionProposal>& proposals);
std::vector<DetectionProposal> read_proposals(const std::filesystem::path& path);

/// P5 graymap, probability = value / 255.
void write_edge_map(const std::filesystem::path& path, const EdgeMap& edges);
EdgeMap read_edge_map(const std::filesystem::path& path);

}  // namespace semap
