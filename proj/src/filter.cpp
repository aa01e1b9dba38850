#include "semap/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "semap/parallel.hpp"
#include "semap/random.hpp"

namespace semap {

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::initializing: return "initializing";
    case TrackStatus::tracking: return "tracking";
    case TrackStatus::lost: return "lost";
  }
  return "unknown";
}

void DiffusionConfig::validate() const {
  if (!(sigma_x > 0.0 && sigma_y > 0.0 && sigma_log_depth > 0.0 && sigma_azimuth > 0.0)) {
    throw InvalidInput("diffusion sigmas must be positive");
  }
  if (!(p_stay > 0.0 && p_stay <= 1.0)) throw InvalidInput("p_stay must be in (0, 1]");
  if (!(anneal > 0.0 && anneal <= 1.0)) throw InvalidInput("anneal factor must be in (0, 1]");
  if (!(anneal_floor > 0.0 && anneal_floor <= 1.0)) throw InvalidInput("anneal floor must be in (0, 1]");
}

DiffusionConfig DiffusionConfig::annealed(int age) const {
  const double f = std::max(std::pow(anneal, std::max(age, 0)), anneal_floor);
  DiffusionConfig out = *this;
  out.sigma_x *= f;
  out.sigma_y *= f;
  out.sigma_log_depth *= f;
  out.sigma_azimuth *= f;
  return out;
}

void InitConfig::validate() const {
  if (!(nominal_depth > 0.0)) throw InvalidInput("nominal depth must be positive");
  for (const auto& [c, d] : category_depth) {
    if (!(d > 0.0)) throw InvalidInput("category nominal depth must be positive");
  }
  if (!(sigma_log_depth >= 0.0) || !(sigma_bearing >= 0.0)) throw InvalidInput("init sigmas must be non-negative");
}

double InitConfig::depth_for(int category) const {
  const auto it = category_depth.find(category);
  return it == category_depth.end() ? nominal_depth : it->second;
}

void FilterConfig::validate() const {
  if (particles < 1) throw InvalidInput("need at least one particle");
  diffusion.validate();
  init.validate();
  weights.validate();
  edge.validate();
  if (persistence < 1) throw InvalidInput("persistence must be >= 1");
  if (!(persistence_iou >= 0.0 && persistence_iou <= 1.0)) throw InvalidInput("persistence_iou must be in [0, 1]");
  if (!(explain_iou >= 0.0 && explain_iou <= 1.0)) throw InvalidInput("explain_iou must be in [0, 1]");
  if (lost_after < 1) throw InvalidInput("lost_after must be >= 1");
  if (threads < 1) throw InvalidInput("threads must be >= 1");
}

MeanState mean_state(const ParticleSet& set) {
  if (set.particles.empty()) throw InvalidInput("mean_state: empty particle set");
  MeanState m;
  for (const auto& p : set.particles) m.shape_posterior[p.shape] += p.weight;
  int modal = 0;
  double best = -1.0;
  for (const auto& [k, w] : m.shape_posterior) {
    if (w > best) {
      best = w;
      modal = k;
    }
  }

  double wsum = 0.0, x = 0.0, y = 0.0, rho = 0.0, s = 0.0, c = 0.0;
  for (const auto& p : set.particles) {
    if (p.shape != modal) continue;
    wsum += p.weight;
    x += p.weight * p.pose.x;
    y += p.weight * p.pose.y;
    rho += p.weight * p.pose.log_depth;
    s += p.weight * std::sin(p.pose.azimuth);
    c += p.weight * std::cos(p.pose.azimuth);
  }
  if (!(wsum > 0.0)) {
    // All modal-shape weight is zero (unnormalized input); fall back to equal weights.
    wsum = 0.0;
    for (const auto& p : set.particles) {
      if (p.shape != modal) continue;
      wsum += 1.0;
      x += p.pose.x;
      y += p.pose.y;
      rho += p.pose.log_depth;
      s += std::sin(p.pose.azimuth);
      c += std::cos(p.pose.azimuth);
    }
  }
  m.hypothesis.shape = modal;
  m.hypothesis.anchor = set.anchor;
  m.hypothesis.pose = {x / wsum, y / wsum, rho / wsum, wrap_angle(std::atan2(s, c))};
  return m;
}

double effective_sample_size(const ParticleSet& set) {
  double sq = 0.0, sum = 0.0;
  for (const auto& p : set.particles) {
    sum += p.weight;
    sq += p.weight * p.weight;
  }
  return sq > 0.0 ? (sum * sum) / sq : 0.0;
}

std::optional<ParticleSet> initialize_object(const DetectionProposal& proposal, int id, const Anchor& anchor,
                                             const CameraIntrinsics& k, const ShapeDatabase& db,
                                             const FilterConfig& cfg, std::uint64_t seed) {
  const auto shapes = db.shapes_in_category(proposal.category);
  if (shapes.empty()) {
    spdlog::warn("no database shape for category {}; proposal ignored", proposal.category);
    return std::nullopt;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, shapes.size() - 1);

  const Vec2 bearing = k.normalize(proposal.box.center());
  const double rho0 = std::log(cfg.init.depth_for(proposal.category));

  ParticleSet set;
  set.id = id;
  set.anchor = anchor;
  set.status = TrackStatus::initializing;
  set.particles.resize(static_cast<size_t>(cfg.particles));
  const double w = 1.0 / cfg.particles;
  for (auto& p : set.particles) {
    p.pose.x = bearing.x() + cfg.init.sigma_bearing * gauss(rng);
    p.pose.y = bearing.y() + cfg.init.sigma_bearing * gauss(rng);
    p.pose.log_depth = rho0 + cfg.init.sigma_log_depth * gauss(rng);
    p.pose.azimuth = wrap_angle(kTwoPi * unit(rng));
    p.shape = shapes[pick(rng)];
    p.weight = w;
  }
  return set;
}

ParticleSet predict(ParticleSet set, const DiffusionConfig& cfg, int num_shapes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : set.particles) {
    p.pose.x += cfg.sigma_x * gauss(rng);
    p.pose.y += cfg.sigma_y * gauss(rng);
    p.pose.log_depth += cfg.sigma_log_depth * gauss(rng);
    p.pose.azimuth = wrap_angle(p.pose.azimuth + cfg.sigma_azimuth * gauss(rng));
    const bool stay = unit(rng) < cfg.p_stay;
    if (!stay && num_shapes > 1) {
      // Uniform over the K-1 other labels (1-based ids).
      std::uniform_int_distribution<int> other(1, num_shapes - 1);
      const int draw = other(rng);
      p.shape = draw >= p.shape ? draw + 1 : draw;
    }
  }
  return set;
}

std::vector<size_t> systematic_resample(std::span<const double> weights, std::uint64_t seed) {
  const size_t n = weights.size();
  if (n == 0) return {};
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("resample: weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidInput("resample: all weights are zero");

  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double scale = static_cast<double>(n);
  std::vector<size_t> out(n);
  double running = 0.0;
  size_t j = 0;
  double bound = weights[0] / total * scale;
  for (size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) + u;
    while (pos >= bound && j + 1 < n) {
      running += weights[j];
      ++j;
      bound = j + 1 == n ? scale : (running + weights[j]) / total * scale;
    }
    out[i] = j;
  }
  return out;
}

ParticleSet resample(ParticleSet set, std::uint64_t seed) {
  std::vector<double> w(set.particles.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = set.particles[i].weight;
  const auto idx = systematic_resample(w, seed);
  std::vector<Particle> next;
  next.reserve(idx.size());
  const double uniform = 1.0 / static_cast<double>(idx.size());
  for (size_t i : idx) {
    next.push_back(set.particles[i]);
    next.back().weight = uniform;
  }
  set.particles = std::move(next);
  return set;
}

double ScoreReport::max_log_likelihood() const {
  return log_likelihood.empty() ? floor : *std::max_element(log_likelihood.begin(), log_likelihood.end());
}

ScoreReport score(ParticleSet& set, const FrameObservation& obs, const ScoringContext& ctx,
                  const RenderBuffers* occluders) {
  if (set.particles.empty()) throw InvalidInput("score: empty particle set");
  if (ctx.db == nullptr) throw InvalidInput("score: no shape database");
  const CameraIntrinsics& k = ctx.intrinsics;
  if (obs.edges.width() != k.width || obs.edges.height() != k.height) {
    throw InvalidInput("score: edge map size does not match the intrinsics");
  }
  const size_t n = set.particles.size();

  ScoreReport report;
  report.boxes.assign(n, std::nullopt);
  std::vector<double> phi_edge(n, std::log(ctx.edge.floor));

  const int workers = std::max(1, std::min<int>(ctx.threads, static_cast<int>(n)));
  std::vector<ObjectRaster> rasters(static_cast<size_t>(workers));
  std::vector<std::vector<ContourPoint>> scratch(static_cast<size_t>(workers));
  parallel_for(n, workers, [&](size_t i, size_t w) {
    const Particle& p = set.particles[i];
    const RigidTransform g_io = object_to_inertial(p.pose, set.anchor.camera, obs.gravity);
    rasters[w].rasterize(ctx.db->shape(p.shape).mesh, relative_object_in_camera(g_io, obs.camera), k);
    const ObjectView view = compose_view(rasters[w], set.id, occluders, k);
    if (!view.box) return;
    report.boxes[i] = view.box;
    auto& pts = scratch[w];
    pts.clear();
    for (const auto& c : view.contour) {
      if (c.silhouette && !c.border) pts.push_back(c);
    }
    phi_edge[i] = edge_likelihood(pts, obs.edges, ctx.edge);
  });

  // One batched detector call for every particle that rendered.
  std::vector<BoxQuery> queries;
  std::vector<size_t> query_owner;
  for (size_t i = 0; i < n; ++i) {
    if (!report.boxes[i]) continue;
    queries.push_back({*report.boxes[i], ctx.db->category_of(set.particles[i].shape)});
    query_owner.push_back(i);
  }
  std::vector<double> phi_cnn(n, 0.0);
  double cnn_floor = 0.0;
  if (ctx.detector != nullptr && ctx.weights.alpha > 0.0) {
    try {
      const auto scores = ctx.detector->score_batch(obs.index, queries);
      for (size_t q = 0; q < scores.size(); ++q) phi_cnn[query_owner[q]] = scores[q];
      cnn_floor = ctx.detector->floor_log_score();
      report.detector_used = true;
    } catch (const ProviderError& e) {
      spdlog::warn("frame {}: detector unavailable ({}); scoring with edges only", obs.index, e.what());
    }
  }
  const double alpha = report.detector_used ? ctx.weights.alpha : 0.0;
  report.floor = alpha * cnn_floor + ctx.weights.beta * std::log(ctx.edge.floor);

  report.log_likelihood.resize(n);
  for (size_t i = 0; i < n; ++i) {
    report.log_likelihood[i] =
        report.boxes[i] ? alpha * phi_cnn[i] + ctx.weights.beta * phi_edge[i] : report.floor;
  }

  const double peak = report.max_log_likelihood();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    set.particles[i].weight *= std::exp(report.log_likelihood[i] - peak);
    total += set.particles[i].weight;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("score: particle weights collapsed to zero");
  for (auto& p : set.particles) p.weight /= total;
  return report;
}

RenderBuffers render_mean_states(const std::vector<TrackedObject>& objects, const ShapeDatabase& db,
                                 const RigidTransform& camera, const GravityDirection& gamma,
                                 const CameraIntrinsics& k, int skip_id) {
  std::vector<RenderObject> scene;
  for (const auto& o : objects) {
    if (o.set.id == skip_id) continue;
    const auto& h = o.mean.hypothesis;
    scene.push_back({o.set.id, &db.shape(h.shape).mesh, relative_object_in_camera(h.inertial(gamma), camera)});
  }
  return render_scene(scene, k);
}

std::vector<DetectionProposal> explain_away(const std::vector<TrackedObject>& objects,
                                            const std::vector<DetectionProposal>& proposals,
                                            const ShapeDatabase& db, const RigidTransform& camera,
                                            const GravityDirection& gamma, const CameraIntrinsics& k,
                                            double iou_threshold) {
  if (objects.empty()) return proposals;
  const RenderBuffers zbuf = render_mean_states(objects, db, camera, gamma, k);
  std::vector<DetectionProposal> unexplained;
  for (const auto& p : proposals) {
    bool explained = false;
    for (const auto& o : objects) {
      const auto it = zbuf.boxes.find(o.set.id);
      if (it == zbuf.boxes.end() || o.category(db) != p.category) continue;
      if (box_iou(p.box, it->second) >= iou_threshold) {
        explained = true;
        break;
      }
    }
    if (!explained) unexplained.push_back(p);
  }
  return unexplained;
}

SemanticFilter::SemanticFilter(const ShapeDatabase& db, const CameraIntrinsics& k, FilterConfig cfg,
                               const DetectorProvider* detector)
    : db_(&db), k_(k), cfg_(std::move(cfg)), detector_(detector) {
  k_.validate();
  cfg_.validate();
  if (db.size() == 0) throw InvalidInput("semantic filter needs a non-empty shape database");
}

ScoringContext SemanticFilter::scoring_context() const {
  return {db_, k_, detector_, cfg_.weights, cfg_.edge, cfg_.threads};
}

StepReport SemanticFilter::step(WorldState& world, const FrameObservation& obs) const {
  StepReport report;
  if (world.last_timestamp && !(obs.timestamp > *world.last_timestamp)) {
    spdlog::warn("frame {} rejected: timestamp {} not after {}", obs.index, obs.timestamp, *world.last_timestamp);
    return report;
  }
  report.accepted = true;
  const ScoringContext ctx = scoring_context();
  const int num_shapes = static_cast<int>(db_->size());
  const auto frame_key = static_cast<std::uint64_t>(world.frames);

  // Occluders come from the mean states at the start of the frame so the
  // update order of objects does not matter.
  const std::vector<TrackedObject> snapshot = world.objects;
  for (auto& obj : world.objects) {
    ParticleSet& set = obj.set;
    if (set.status == TrackStatus::lost) continue;
    const RenderBuffers occ = render_mean_states(snapshot, *db_, obs.camera, obs.gravity, k_, set.id);
    const auto set_key = static_cast<std::uint64_t>(set.id);

    set = predict(std::move(set), cfg_.diffusion.annealed(set.age), num_shapes,
                  derive_seed(cfg_.seed, {kStreamPredict, set_key, frame_key}));
    const ScoreReport sr = score(set, obs, ctx, &occ);
    report.ess[set.id] = effective_sample_size(set);

    set.floor_streak = sr.max_log_likelihood() <= sr.floor + 1e-9 ? set.floor_streak + 1 : 0;
    if (!cfg_.ess_resampling || report.ess[set.id] < 0.5 * static_cast<double>(set.size())) {
      set = resample(std::move(set), derive_seed(cfg_.seed, {kStreamResample, set_key, frame_key}));
    }
    ++set.age;
    set.status = set.floor_streak >= cfg_.lost_after ? TrackStatus::lost : TrackStatus::tracking;
    if (set.status == TrackStatus::lost) spdlog::info("object {} lost at frame {}", set.id, obs.index);
    obj.mean = mean_state(set);
  }

  report.unexplained =
      explain_away(world.objects, obs.proposals, *db_, obs.camera, obs.gravity, k_, cfg_.explain_iou);

  // Persistence: an unexplained proposal must recur on consecutive frames
  // (same category, IoU >= persistence_iou with its previous box).
  std::vector<DetectionProposal> ordered = report.unexplained;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  std::vector<PendingProposal> next_pending;
  std::vector<bool> used(world.pending.size(), false);
  for (const auto& p : ordered) {
    int match = -1;
    double best = -1.0;
    for (size_t i = 0; i < world.pending.size(); ++i) {
      if (used[i] || world.pending[i].category != p.category) continue;
      const double iou = box_iou(world.pending[i].box, p.box);
      if (iou >= cfg_.persistence_iou && iou > best) {
        best = iou;
        match = static_cast<int>(i);
      }
    }
    int streak = 1;
    if (match >= 0) {
      used[static_cast<size_t>(match)] = true;
      streak = world.pending[static_cast<size_t>(match)].streak + 1;
    }
    next_pending.push_back({p.box, p.category, p.score, streak});
  }

  std::vector<PendingProposal> kept;
  std::vector<PixelBox> spawned_boxes;
  std::vector<int> spawned_categories;
  for (const auto& cand : next_pending) {
    if (cand.streak < cfg_.persistence) {
      kept.push_back(cand);
      continue;
    }
    bool duplicate = false;
    for (size_t s = 0; s < spawned_boxes.size(); ++s) {
      if (spawned_categories[s] == cand.category && box_iou(spawned_boxes[s], cand.box) >= cfg_.explain_iou) {
        duplicate = true;
      }
    }
    if (duplicate) continue;

    const int id = world.next_id;
    const DetectionProposal proposal{obs.index, cand.box, cand.category, cand.score};
    auto set = initialize_object(proposal, id, Anchor{obs.index, obs.camera}, k_, *db_, cfg_,
                                 derive_seed(cfg_.seed, {kStreamInit, static_cast<std::uint64_t>(id), frame_key}));
    if (!set) continue;
    ++world.next_id;
    spawned_boxes.push_back(cand.box);
    spawned_categories.push_back(cand.category);

    // First importance-sampling step at the anchor frame itself.
    const RenderBuffers occ = render_mean_states(world.objects, *db_, obs.camera, obs.gravity, k_);
    score(*set, obs, ctx, &occ);
    *set = resample(std::move(*set), derive_seed(cfg_.seed, {kStreamResample, static_cast<std::uint64_t>(id), frame_key}));
    TrackedObject tracked{std::move(*set), {}};
    tracked.mean = mean_state(tracked.set);
    world.objects.push_back(std::move(tracked));
    report.spawned.push_back(id);
  }
  world.pending = std::move(kept);
  world.last_timestamp = obs.timestamp;
  ++world.frames;
  return report;
}

}  // namespace semap
