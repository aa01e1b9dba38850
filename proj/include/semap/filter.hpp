#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "semap/geometry.hpp"
#include "semap/mesh.hpp"
#include "semap/perception.hpp"
#include "semap/raster.hpp"

namespace semap {

// Camera frame an object's pose chart is attached to.
struct Anchor {
  int frame = 0;
  RigidTransform camera;  // g_ic(t_r)
};

struct ObjectHypothesis {
  int shape = 0;
  PoseParams pose;
  Anchor anchor;

  RigidTransform inertial(const GravityDirection& gamma) const {
    return object_to_inertial(pose, anchor.camera, gamma);
  }
};

struct Particle {
  int shape = 0;
  PoseParams pose;
  double weight = 0.0;
};

enum class TrackStatus { initializing, tracking, lost };
const char* to_string(TrackStatus s);

/// Weighted hypotheses for one object instance. All particles share the anchor.
struct ParticleSet {
  int id = 0;
  Anchor anchor;
  std::vector<Particle> particles;
  TrackStatus status = TrackStatus::initializing;
  int age = 0;           // filter updates since spawning
  int floor_streak = 0;  // consecutive frames with every particle at the likelihood floor

  size_t size() const { return particles.size(); }
};

struct DiffusionConfig {
  double sigma_x = 0.01;
  double sigma_y = 0.01;
  double sigma_log_depth = 0.02;
  double sigma_azimuth = 0.05;  // radians
  double p_stay = 0.9;
  double anneal = 0.99;         // per-update factor on every sigma
  double anneal_floor = 0.1;    // lower bound on the cumulative factor

  void validate() const;
  /// Sigmas scaled by max(anneal^age, anneal_floor).
  DiffusionConfig annealed(int age) const;
};

struct InitConfig {
  double nominal_depth = 1.5;                 // meters
  std::map<int, double> category_depth;       // per-category override
  double sigma_log_depth = 0.5;
  double sigma_bearing = 0.02;

  void validate() const;
  double depth_for(int category) const;
};

struct FilterConfig {
  int particles = 400;
  DiffusionConfig diffusion;
  InitConfig init;
  LikelihoodWeights weights;
  EdgeSearchParams edge;
  int persistence = 3;             // consecutive frames before an unexplained proposal spawns
  double persistence_iou = 0.5;
  double explain_iou = 0.5;
  bool ess_resampling = false;     // resample only when ESS < N/2
  int lost_after = 10;             // floor-likelihood frames before a set is frozen
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct MeanState {
  ObjectHypothesis hypothesis;
  std::map<int, double> shape_posterior;  // shape id -> summed weight
};

/// Modal shape by summed weight (ties to the lower id); weighted mean of
/// bearing and log depth over the modal-shape particles; circular mean azimuth.
MeanState mean_state(const ParticleSet& set);

double effective_sample_size(const ParticleSet& set);

/// Spawns N particles for an unexplained proposal. Returns nullopt (with a
/// warning) when the database has no shape of the proposal's category.
std::optional<ParticleSet> initialize_object(const DetectionProposal& proposal, int id, const Anchor& anchor,
                                             const CameraIntrinsics& k, const ShapeDatabase& db,
                                             const FilterConfig& cfg, std::uint64_t seed);

/// Gaussian pose diffusion (azimuth wrapped) and discrete shape jumps: keep
/// the label with p_stay, else move uniformly to one of the other K-1 labels.
ParticleSet predict(ParticleSet set, const DiffusionConfig& cfg, int num_shapes, std::uint64_t seed);

/// Systematic resampling offspring indices (N draws, one uniform offset).
/// Throws InvalidInput when the weights do not sum to a positive value.
std::vector<size_t> systematic_resample(std::span<const double> weights, std::uint64_t seed);
ParticleSet resample(ParticleSet set, std::uint64_t seed);

struct ScoringContext {
  const ShapeDatabase* db = nullptr;
  CameraIntrinsics intrinsics;
  const DetectorProvider* detector = nullptr;  // optional
  LikelihoodWeights weights;
  EdgeSearchParams edge;
  int threads = 1;
};

struct ScoreReport {
  std::vector<double> log_likelihood;  // per particle
  std::vector<std::optional<PixelBox>> boxes;
  double floor = 0.0;                  // likelihood assigned to empty renders
  bool detector_used = false;
  double max_log_likelihood() const;
};

/// Renders every particle against the occluder Z-buffer (other objects at
/// their mean states, may be null) and reweights the set in place:
/// w_i <- w_i * exp(L_i), normalized.
ScoreReport score(ParticleSet& set, const FrameObservation& obs, const ScoringContext& ctx,
                  const RenderBuffers* occluders);

struct TrackedObject {
  ParticleSet set;
  MeanState mean;

  int category(const ShapeDatabase& db) const { return db.category_of(mean.hypothesis.shape); }
};

struct PendingProposal {
  PixelBox box;
  int category = 0;
  double score = 0.0;
  int streak = 0;
};

struct WorldState {
  std::vector<TrackedObject> objects;
  std::vector<PendingProposal> pending;
  int frames = 0;  // accepted frames
  std::optional<double> last_timestamp;
  int next_id = 1;
};

/// Z-buffer of the given objects at their mean states seen from `camera`.
/// `skip_id` leaves one object out.
RenderBuffers render_mean_states(const std::vector<TrackedObject>& objects, const ShapeDatabase& db,
                                 const RigidTransform& camera, const GravityDirection& gamma,
                                 const CameraIntrinsics& k, int skip_id = 0);

/// Proposals not explained by a tracked object: explained means IoU between
/// the proposal and the object's rendered projection-mask box is at least
/// `iou_threshold` with matching category.
std::vector<DetectionProposal> explain_away(const std::vector<TrackedObject>& objects,
                                            const std::vector<DetectionProposal>& proposals,
                                            const ShapeDatabase& db, const RigidTransform& camera,
                                            const GravityDirection& gamma, const CameraIntrinsics& k,
                                            double iou_threshold);

struct StepReport {
  bool accepted = false;
  std::vector<int> spawned;
  std::vector<DetectionProposal> unexplained;
  std::map<int, double> ess;  // per updated object, before resampling
};

/// The semantic filter: predict, score, resample and refresh the mean state
/// of every active set, explain away proposals, then spawn new sets for
/// proposals that stayed unexplained for `persistence` frames.
class SemanticFilter {
 public:
  SemanticFilter(const ShapeDatabase& db, const CameraIntrinsics& k, FilterConfig cfg,
                 const DetectorProvider* detector);

  /// Frames must arrive with strictly increasing timestamps; others are
  /// rejected and leave the world untouched.
  StepReport step(WorldState& world, const FrameObservation& obs) const;

  const FilterConfig& config() const { return cfg_; }
  ScoringContext scoring_context() const;

 private:
  const ShapeDatabase* db_;
  CameraIntrinsics k_;
  FilterConfig cfg_;
  const DetectorProvider* detector_;
};

}  // namespace semap
