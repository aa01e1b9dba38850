#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "semap/filter.hpp"
#include "semap/pipeline.hpp"
#include "semap/sim.hpp"

using namespace semap;

namespace {

const GravityDirection kDown(Vec3(0, 0, -1));

Particle particle(int shape, double x, double y, double rho, double theta, double w) {
  return {shape, {x, y, rho, theta}, w};
}

double weight_sum(const ParticleSet& s) {
  double t = 0.0;
  for (const auto& p : s.particles) t += p.weight;
  return t;
}

struct Fixture {
  ShapeDatabase db = default_shape_database();
  SceneSpec spec;
  Sequence seq;
  std::vector<FrameObservation> obs;

  explicit Fixture(int frames = 12) {
    spec = single_object_fixture(1, 7, frames);
    seq = generate(spec, db);
    obs = observations_from(seq);
  }

  // Particle set whose single hypothesis sits exactly on the ground truth.
  ParticleSet truth_set(int copies) const {
    ParticleSet s;
    s.id = 1;
    s.anchor = {0, obs[0].camera};
    const PoseParams gt = inertial_to_params(seq.objects[0].pose, obs[0].camera, kDown);
    for (int i = 0; i < copies; ++i) s.particles.push_back({seq.objects[0].shape, gt, 1.0 / copies});
    return s;
  }
};

}  // namespace

TEST_CASE("config validation") {
  FilterConfig c;
  CHECK_NOTHROW(c.validate());
  c.particles = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.diffusion.sigma_x = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.diffusion.p_stay = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.init.category_depth[2] = -1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.init.category_depth[2] = 2.5;
  CHECK(c.init.depth_for(2) == 2.5);
  CHECK(c.init.depth_for(1) == 1.5);

  DiffusionConfig d;
  CHECK(d.annealed(0).sigma_x == doctest::Approx(0.01));
  CHECK(d.annealed(10).sigma_azimuth == doctest::Approx(0.05 * std::pow(0.99, 10)));
  CHECK(d.annealed(10000).sigma_log_depth == doctest::Approx(0.002));
}

TEST_CASE("mean_state") {
  ParticleSet s;
  s.particles = {particle(2, 0.1, -0.2, 0.3, 1.0, 0.25), particle(2, 0.1, -0.2, 0.3, 1.0, 0.75)};
  MeanState m = mean_state(s);
  CHECK(m.hypothesis.shape == 2);
  CHECK(m.shape_posterior.at(2) == doctest::Approx(1.0));
  CHECK(m.hypothesis.pose.x == doctest::Approx(0.1));
  CHECK(m.hypothesis.pose.azimuth == doctest::Approx(1.0));

  s.particles = {particle(1, 0, 0, 0, 0.1, 0.5), particle(1, 0, 0, 0, kTwoPi - 0.1, 0.5)};
  CHECK(std::abs(mean_state(s).hypothesis.pose.azimuth) < 1e-12);

  // Hand-summed posterior; the modal shape (3) alone drives the pose.
  s.particles = {particle(1, 0.5, 0.5, 0.5, 0.0, 0.1), particle(3, 0.1, 0.0, 1.0, 0.2, 0.3),
                 particle(2, 0.9, 0.9, 0.9, 3.0, 0.15), particle(3, 0.3, 0.2, 2.0, 0.4, 0.1),
                 particle(1, 0.2, 0.2, 0.2, 1.0, 0.35)};
  m = mean_state(s);
  CHECK(m.shape_posterior.at(1) == doctest::Approx(0.45));
  CHECK(m.shape_posterior.at(2) == doctest::Approx(0.15));
  CHECK(m.shape_posterior.at(3) == doctest::Approx(0.40));
  CHECK(m.hypothesis.shape == 1);
  CHECK(m.hypothesis.pose.x == doctest::Approx((0.5 * 0.1 + 0.2 * 0.35) / 0.45));
  CHECK(m.hypothesis.pose.log_depth == doctest::Approx((0.5 * 0.1 + 0.2 * 0.35) / 0.45));

  // Equal mass resolves to the lower id.
  s.particles = {particle(4, 0, 0, 0, 0, 0.5), particle(2, 0, 0, 0, 0, 0.5)};
  CHECK(mean_state(s).hypothesis.shape == 2);
}

TEST_CASE("effective sample size") {
  ParticleSet s;
  for (int i = 0; i < 8; ++i) s.particles.push_back(particle(1, 0, 0, 0, 0, 1.0 / 8));
  CHECK(effective_sample_size(s) == doctest::Approx(8));
  for (auto& p : s.particles) p.weight = 0;
  s.particles[3].weight = 1;
  CHECK(effective_sample_size(s) == doctest::Approx(1));
}

TEST_CASE("initialize_object") {
  const ShapeDatabase db = default_shape_database();
  const CameraIntrinsics k{277, 277, 160, 120, 320, 240};
  FilterConfig cfg;
  cfg.particles = 10000;
  const DetectionProposal centered{0, {140, 100, 180, 140}, 3, 0.9};
  const auto set = initialize_object(centered, 5, {0, RigidTransform::identity()}, k, db, cfg, 1);
  REQUIRE(set.has_value());
  CHECK(set->id == 5);
  CHECK(set->size() == 10000);
  CHECK(weight_sum(*set) == doctest::Approx(1.0));
  double mx = 0, my = 0, mr = 0;
  std::vector<int> bins(8, 0);
  for (const auto& p : set->particles) {
    CHECK(p.shape == 4);  // the only category-3 shape
    mx += p.pose.x;
    my += p.pose.y;
    mr += p.pose.log_depth;
    CHECK(p.pose.azimuth >= 0.0);
    CHECK(p.pose.azimuth < kTwoPi);
    ++bins[static_cast<size_t>(p.pose.azimuth / kTwoPi * 8)];
  }
  const double n = 10000;
  CHECK(std::abs(mx / n) < 4 * 0.02 / std::sqrt(n));
  CHECK(std::abs(my / n) < 4 * 0.02 / std::sqrt(n));
  CHECK(std::abs(mr / n - std::log(1.5)) < 4 * 0.5 / std::sqrt(n));
  const double expect = n / 8, sd = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
  for (int b : bins) CHECK(std::abs(b - expect) < 3 * sd);

  // Category 1 has two chairs; both are drawn.
  cfg.particles = 200;
  const auto chairs = initialize_object({0, {10, 10, 50, 50}, 1, 0.9}, 1, {}, k, db, cfg, 2);
  REQUIRE(chairs.has_value());
  std::set<int> seen;
  for (const auto& p : chairs->particles) seen.insert(p.shape);
  CHECK(seen == std::set<int>{1, 2});

  CHECK_FALSE(initialize_object({0, {10, 10, 50, 50}, 9, 0.9}, 1, {}, k, db, cfg, 3).has_value());
}

TEST_CASE("predict") {
  ParticleSet s;
  for (int i = 0; i < 50; ++i) s.particles.push_back(particle(1 + i % 4, 0.01 * i, 0, 0.4, 0.1 * i, 0.02));
  DiffusionConfig still;
  still.sigma_x = still.sigma_y = still.sigma_log_depth = still.sigma_azimuth = 1e-300;
  still.p_stay = 1.0;
  const ParticleSet same = predict(s, still, 4, 9);
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(same.particles[i].shape == s.particles[i].shape);
    CHECK(same.particles[i].pose.x == doctest::Approx(s.particles[i].pose.x));
    CHECK(same.particles[i].pose.azimuth == doctest::Approx(s.particles[i].pose.azimuth));
    CHECK(same.particles[i].weight == s.particles[i].weight);
  }

  DiffusionConfig d;
  d.sigma_azimuth = 10;
  d.p_stay = 1.0;
  const ParticleSet moved = predict(s, d, 4, 9);
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(moved.particles[i].shape == s.particles[i].shape);
    CHECK(moved.particles[i].pose.azimuth >= 0.0);
    CHECK(moved.particles[i].pose.azimuth < kTwoPi);
  }

  // Transition matrix over 1e5 draws from shape 2 with K = 4.
  ParticleSet many;
  many.particles.assign(100000, particle(2, 0, 0, 0, 0, 1e-5));
  DiffusionConfig jump;
  jump.p_stay = 0.7;
  const ParticleSet after = predict(many, jump, 4, 17);
  std::vector<int> counts(5, 0);
  for (const auto& p : after.particles) ++counts[static_cast<size_t>(p.shape)];
  const double n = 100000;
  const std::vector<double> expect{0, 0.1, 0.7, 0.1, 0.1};
  CHECK(counts[0] == 0);
  for (int k = 1; k <= 4; ++k) {
    const double sd = std::sqrt(n * expect[k] * (1 - expect[k]));
    CHECK(std::abs(counts[k] - n * expect[k]) < 3 * sd);
  }
}

TEST_CASE("systematic resampling") {
  const std::vector<double> uniform(10, 0.1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto idx = systematic_resample(uniform, seed);
    for (size_t i = 0; i < 10; ++i) CHECK(idx[i] == i);
  }
  std::vector<double> one(7, 0.0);
  one[4] = 1.0;
  for (size_t i : systematic_resample(one, 3)) CHECK(i == 4);

  std::vector<double> w(10, 0.0);
  w[0] = 0.5;
  w[1] = 0.3;
  w[2] = 0.2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<int> c(10, 0);
    for (size_t i : systematic_resample(w, seed)) ++c[i];
    CHECK(c[0] == 5);
    CHECK(c[1] == 3);
    CHECK(c[2] == 2);
  }

  CHECK_THROWS_AS(systematic_resample(std::vector<double>(4, 0.0), 1), InvalidInput);
  CHECK_THROWS_AS(systematic_resample(std::vector<double>{0.5, -0.1, 0.6}, 1), InvalidInput);

  // Offspring counts stay within floor/ceil of N w_i.
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ws(33);
    double total = 0;
    for (auto& x : ws) total += x = g(rng);
    for (auto& x : ws) x /= total;
    std::vector<int> c(33, 0);
    for (size_t i : systematic_resample(ws, static_cast<std::uint64_t>(trial))) ++c[i];
    for (size_t i = 0; i < 33; ++i) {
      CHECK(c[i] >= std::floor(33 * ws[i] - 1e-9));
      CHECK(c[i] <= std::ceil(33 * ws[i] + 1e-9));
    }
  }

  ParticleSet s;
  s.particles = {particle(1, 0, 0, 0, 0, 0.7), particle(2, 0, 0, 0, 0, 0.3)};
  const ParticleSet r = resample(s, 8);
  CHECK(r.size() == 2);
  for (const auto& p : r.particles) CHECK(p.weight == 0.5);
}

TEST_CASE("score") {
  Fixture f;
  const ScoringContext ctx{&f.db, f.spec.intrinsics, nullptr, {}, {}, 2};
  const FrameObservation& obs = f.obs[0];

  ParticleSet twin = f.truth_set(2);
  const ScoreReport r = score(twin, obs, ctx, nullptr);
  CHECK(twin.particles[0].weight == doctest::Approx(0.5));
  CHECK(twin.particles[1].weight == doctest::Approx(0.5));
  CHECK(r.log_likelihood[0] > r.floor);

  // The ground truth beats a hypothesis shifted by 30 px in bearing.
  ParticleSet pair = f.truth_set(2);
  pair.particles[1].pose.x += 30.0 / f.spec.intrinsics.fx;
  score(pair, obs, ctx, nullptr);
  CHECK(pair.particles[0].weight > pair.particles[1].weight);
  CHECK(weight_sum(pair) == doctest::Approx(1.0).epsilon(1e-12));

  // Behind the camera: every particle sits at the floor and weights stay uniform.
  ParticleSet hidden = f.truth_set(4);
  for (auto& p : hidden.particles) p.pose.log_depth = std::log(1e-4);
  hidden.particles[2].pose.azimuth = 1.0;
  const ScoreReport hr = score(hidden, obs, ctx, nullptr);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(hr.log_likelihood[i] == hr.floor);
    CHECK(hidden.particles[i].weight == doctest::Approx(0.25));
  }

  // A full-frame occluder in front of everything hides the object.
  ParticleSet occluded = f.truth_set(3);
  occluded.particles[1].pose.x += 0.05;
  RenderBuffers wall = RenderBuffers::empty(320, 240);
  for (auto& z : wall.depth.data()) z = 0.05;
  for (auto& id : wall.instance.data()) id = 99;
  const ScoreReport orr = score(occluded, obs, ctx, &wall);
  for (const auto& p : occluded.particles) CHECK(p.weight == doctest::Approx(1.0 / 3));
  CHECK(orr.max_log_likelihood() == orr.floor);
}

namespace {

class FailingDetector final : public DetectorProvider {
 public:
  std::vector<double> score_batch(int, std::span<const BoxQuery>) const override { throw ProviderError("offline"); }
  double floor_log_score() const override { return std::log(0.02); }
};

}  // namespace

TEST_CASE("score with detector and provider failure") {
  Fixture f;
  const OracleDetector oracle(oracle_references(f.seq));
  const FailingDetector broken;
  ScoringContext ctx{&f.db, f.spec.intrinsics, &oracle, {}, {}, 1};
  ParticleSet a = f.truth_set(2);
  a.particles[1].pose.x += 0.05;
  const ScoreReport ra = score(a, f.obs[0], ctx, nullptr);
  CHECK(ra.detector_used);
  CHECK(ra.floor == doctest::Approx(std::log(0.02) + std::log(1e-6)));

  ctx.detector = &broken;
  ParticleSet b = f.truth_set(2);
  b.particles[1].pose.x += 0.05;
  const ScoreReport rb = score(b, f.obs[0], ctx, nullptr);
  CHECK_FALSE(rb.detector_used);
  ctx.detector = nullptr;
  ParticleSet c = f.truth_set(2);
  c.particles[1].pose.x += 0.05;
  const ScoreReport rc = score(c, f.obs[0], ctx, nullptr);
  CHECK(rb.log_likelihood == rc.log_likelihood);
  CHECK(b.particles[0].weight == c.particles[0].weight);

  // Ranking under a positive rescaling of both weights.
  ctx.detector = &oracle;
  ParticleSet base = f.truth_set(6);
  for (size_t i = 0; i < 6; ++i) base.particles[i].pose.x += 0.01 * static_cast<double>(i);
  ParticleSet s1 = base, s2 = base;
  score(s1, f.obs[0], ctx, nullptr);
  ctx.weights = {3.0, 3.0};
  score(s2, f.obs[0], ctx, nullptr);
  for (size_t i = 0; i < 6; ++i)
    for (size_t j = 0; j < 6; ++j)
      CHECK((s1.particles[i].weight < s1.particles[j].weight) == (s2.particles[i].weight < s2.particles[j].weight));
}

TEST_CASE("explain_away") {
  Fixture f;
  const FrameObservation& obs = f.obs[0];
  const CameraIntrinsics& k = f.spec.intrinsics;
  REQUIRE(obs.proposals.size() == 1);
  CHECK(explain_away({}, obs.proposals, f.db, obs.camera, kDown, k, 0.5) == obs.proposals);

  TrackedObject t{f.truth_set(1), {}};
  t.mean = mean_state(t.set);
  const std::vector<TrackedObject> world{t};
  CHECK(explain_away(world, obs.proposals, f.db, obs.camera, kDown, k, 0.5).empty());

  DetectionProposal wrong_cat = obs.proposals[0];
  wrong_cat.category = 2;
  CHECK(explain_away(world, {wrong_cat}, f.db, obs.camera, kDown, k, 0.5).size() == 1);

  // IoU of 0.3 against the rendered box stays unexplained at threshold 0.5.
  const PixelBox b = render_mean_states(world, f.db, obs.camera, kDown, k).boxes.at(1);
  DetectionProposal shifted = obs.proposals[0];
  const double shift = b.width() * (1 - 0.3) / (1 + 0.3);
  shifted.box = {b.x0 + shift, b.y0, b.x1 + shift, b.y1};
  CHECK(box_iou(shifted.box, b) == doctest::Approx(0.3));
  CHECK(explain_away(world, {shifted}, f.db, obs.camera, kDown, k, 0.5).size() == 1);
  CHECK(explain_away(world, {shifted}, f.db, obs.camera, kDown, k, 0.25).empty());
}

TEST_CASE("step") {
  Fixture f(15);
  FilterConfig cfg;
  cfg.particles = 60;
  cfg.seed = 3;
  const OracleDetector oracle(oracle_references(f.seq));
  const SemanticFilter filter(f.db, f.spec.intrinsics, cfg, &oracle);

  SUBCASE("no proposals keeps the world empty") {
    WorldState w;
    for (auto o : f.obs) {
      o.proposals.clear();
      const StepReport r = filter.step(w, o);
      CHECK(r.accepted);
      CHECK(r.spawned.empty());
    }
    CHECK(w.objects.empty());
    CHECK(w.frames == 15);
  }

  SUBCASE("out-of-order frames are rejected") {
    WorldState w;
    for (int i = 0; i < 5; ++i) filter.step(w, f.obs[static_cast<size_t>(i)]);
    REQUIRE(w.objects.size() == 1);
    const auto before = w.objects[0].set.particles;
    const int frames = w.frames;
    CHECK_FALSE(filter.step(w, f.obs[2]).accepted);
    CHECK_FALSE(filter.step(w, f.obs[4]).accepted);
    CHECK(w.frames == frames);
    CHECK(w.objects[0].set.particles.size() == before.size());
    for (size_t i = 0; i < before.size(); ++i) {
      CHECK(w.objects[0].set.particles[i].pose.x == before[i].pose.x);
      CHECK(w.objects[0].set.particles[i].weight == before[i].weight);
    }
    CHECK(filter.step(w, f.obs[5]).accepted);
  }

  SUBCASE("spawning waits for persistence and tracks one object") {
    WorldState w;
    std::vector<int> spawn_frames;
    for (const auto& o : f.obs) {
      const StepReport r = filter.step(w, o);
      if (!r.spawned.empty()) spawn_frames.push_back(o.index);
      for (const auto& obj : w.objects) {
        CHECK(obj.set.size() == 60);
        CHECK(weight_sum(obj.set) == doctest::Approx(1.0).epsilon(1e-9));
      }
      if (w.objects.size() == 1 && r.spawned.empty()) {
        CHECK(r.ess.count(1) == 1);
        CHECK(w.objects[0].set.status == TrackStatus::tracking);
      }
    }
    CHECK(spawn_frames == std::vector<int>{2});
    CHECK(w.objects.size() == 1);
  }

  SUBCASE("deterministic across runs and thread counts") {
    FilterConfig threaded = cfg;
    threaded.threads = 3;
    const SemanticFilter other(f.db, f.spec.intrinsics, threaded, &oracle);
    WorldState a, b;
    for (const auto& o : f.obs) {
      filter.step(a, o);
      other.step(b, o);
    }
    REQUIRE(a.objects.size() == b.objects.size());
    for (size_t i = 0; i < a.objects.size(); ++i) {
      const auto& pa = a.objects[i].set.particles;
      const auto& pb = b.objects[i].set.particles;
      REQUIRE(pa.size() == pb.size());
      for (size_t j = 0; j < pa.size(); ++j) {
        CHECK(pa[j].shape == pb[j].shape);
        CHECK(pa[j].pose.x == pb[j].pose.x);
        CHECK(pa[j].pose.log_depth == pb[j].pose.log_depth);
        CHECK(pa[j].pose.azimuth == pb[j].pose.azimuth);
      }
    }
  }

  SUBCASE("persistence 1 spawns on the first frame") {
    FilterConfig eager = cfg;
    eager.persistence = 1;
    const SemanticFilter now(f.db, f.spec.intrinsics, eager, &oracle);
    WorldState w;
    CHECK(now.step(w, f.obs[0]).spawned == std::vector<int>{1});
  }
}

TEST_CASE("lost objects are frozen") {
  Fixture f(14);
  FilterConfig cfg;
  cfg.particles = 30;
  cfg.persistence = 1;
  cfg.lost_after = 3;
  const SemanticFilter filter(f.db, f.spec.intrinsics, cfg, nullptr);
  WorldState w;
  filter.step(w, f.obs[0]);
  REQUIRE(w.objects.size() == 1);
  // Blank frames from here on: nothing renders onto an edge.
  for (size_t i = 1; i < f.obs.size(); ++i) {
    FrameObservation o = f.obs[i];
    o.proposals.clear();
    o.edges = EdgeMap(o.edges.width(), o.edges.height(), 0.0f);
    filter.step(w, o);
    if (i >= 3) CHECK(w.objects[0].set.status == TrackStatus::lost);
  }
  CHECK(w.objects[0].set.age == 3);
}
