#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "semap/perception.hpp"
#include "semap/sim.hpp"

using namespace semap;

namespace {

const CameraIntrinsics kSmall{100, 100, 50, 50, 100, 100};

// Axis-aligned square of half-width `half` pixels centered in a 100x100 image.
Mask square_mask(int half) {
  Mask m(100, 100, 0);
  for (int y = 50 - half; y < 50 + half; ++y)
    for (int x = 50 - half; x < 50 + half; ++x) m(x, y) = 1;
  return m;
}

Mask outline(const Mask& m) {
  Mask c(m.width(), m.height(), 0);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      for (auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        if (!m.contains(x + dx, y + dy) || !m(x + dx, y + dy)) c(x, y) = 1;
      }
    }
  }
  return c;
}

EdgeMap to_edges(const Mask& m) {
  EdgeMap e(m.width(), m.height(), 0.0f);
  for (size_t i = 0; i < m.data().size(); ++i) e.data()[i] = m.data()[i] ? 1.0f : 0.0f;
  return e;
}

// Independent search: scan every offset in [-r, r] and keep the smallest |t| with a response.
double brute_force_edge(const std::vector<ContourPoint>& pts, const EdgeMap& e, int r, double sigma) {
  double total = 0.0;
  int n = 0;
  for (const auto& p : pts) {
    if (p.nx == 0.0 && p.ny == 0.0) continue;
    ++n;
    int best = -1;
    for (int t = -r; t <= r; ++t) {
      const int x = static_cast<int>(std::floor(p.x + 0.5 + t * p.nx));
      const int y = static_cast<int>(std::floor(p.y + 0.5 + t * p.ny));
      if (!e.contains(x, y) || e(x, y) <= 0.5) continue;
      if (best < 0 || std::abs(t) < best) best = std::abs(t);
    }
    if (best >= 0) total += std::exp(-best * best / (2 * sigma * sigma));
  }
  return std::log(std::max(total / n, 1e-6));
}

}  // namespace

TEST_CASE("combined likelihood") {
  LikelihoodWeights w;
  CHECK(combined_log_likelihood(0, 0, w) == 0.0);
  w.alpha = 1;
  w.beta = 0.5;
  CHECK(combined_log_likelihood(-1, -2, w) == -2.0);
  LikelihoodWeights bad{0, 0};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  LikelihoodWeights neg{-1, 1};
  CHECK_THROWS_AS(neg.validate(), InvalidInput);

  // Ranking is invariant under positive scaling of both weights.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(-3, 1);
  std::vector<std::pair<double, double>> phis(50);
  for (auto& p : phis) p = {g(rng), g(rng)};
  for (double lambda : {0.1, 2.0, 17.0}) {
    const LikelihoodWeights scaled{w.alpha * lambda, w.beta * lambda};
    for (size_t i = 0; i < phis.size(); ++i) {
      for (size_t j = 0; j < phis.size(); ++j) {
        const bool a = combined_log_likelihood(phis[i].first, phis[i].second, w) <
                       combined_log_likelihood(phis[j].first, phis[j].second, w);
        const bool b = combined_log_likelihood(phis[i].first, phis[i].second, scaled) <
                       combined_log_likelihood(phis[j].first, phis[j].second, scaled);
        CHECK(a == b);
      }
    }
  }
}

TEST_CASE("oracle detector") {
  const PixelBox gt{10, 20, 40, 60};
  OracleDetector det({{0, {{gt, 2}}}});
  CHECK(det.score(0, gt, 2) == doctest::Approx(std::log(0.98)));
  CHECK(det.score(0, {50, 70, 60, 80}, 2) == doctest::Approx(std::log(0.02)));
  CHECK(det.score(0, gt, 1) == doctest::Approx(std::log(0.02)));
  CHECK(det.floor_log_score() == doctest::Approx(std::log(0.02)));
  CHECK_THROWS_AS(det.score(7, gt, 2), ProviderError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 80);
  std::vector<BoxQuery> q;
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    q.push_back({{x, y, x + 5 + u(rng) / 4, y + 5 + u(rng) / 4}, 1 + i % 3});
  }
  const auto batch = det.score_batch(0, q);
  REQUIRE(batch.size() == q.size());
  for (size_t i = 0; i < q.size(); ++i) CHECK(batch[i] == det.score(0, q[i].box, q[i].category));
}

TEST_CASE("oracle score is maximized at the reference box") {
  const PixelBox gt{4, 6, 13, 15};
  OracleDetector det({{0, {{gt, 1}, {{0, 0, 3, 3}, 2}}}});
  double best = -1e300;
  PixelBox arg;
  for (int x0 = 0; x0 < 20; ++x0)
    for (int y0 = 0; y0 < 20; ++y0)
      for (int x1 = x0 + 1; x1 <= 20; ++x1)
        for (int y1 = y0 + 1; y1 <= 20; ++y1) {
          const PixelBox b{double(x0), double(y0), double(x1), double(y1)};
          const double s = det.score(0, b, 1);
          if (s > best) {
            best = s;
            arg = b;
          }
        }
  CHECK(arg == gt);
}

TEST_CASE("edge likelihood examples") {
  const Mask obj = square_mask(20);
  const auto pts = contour_points(outline(obj), obj);
  EdgeSearchParams p;
  CHECK(edge_likelihood(pts, to_edges(outline(obj)), p) == doctest::Approx(0.0));
  CHECK(edge_likelihood(pts, EdgeMap(100, 100, 0.0f), p) == doctest::Approx(std::log(1e-6)));
  CHECK(edge_likelihood({}, to_edges(outline(obj)), p) == doctest::Approx(std::log(1e-6)));

  // Edge map three pixels outside the contour along every side normal.
  const EdgeMap shifted = to_edges(outline(square_mask(23)));
  const double s = edge_likelihood(pts, shifted, p);
  CHECK(std::abs(std::exp(s) - std::exp(-0.5)) < 0.05);
  CHECK(s == doctest::Approx(brute_force_edge(pts, shifted, p.radius, p.sigma)));
}

TEST_CASE("edge likelihood is bounded and non-increasing in offset") {
  const Mask obj = square_mask(20);
  const auto pts = contour_points(outline(obj), obj);
  EdgeSearchParams p;
  double prev = 1.0;
  for (int d = 0; d <= p.radius + 2; ++d) {
    const double s = edge_likelihood(pts, to_edges(outline(square_mask(20 + d))), p);
    CHECK(s <= 1e-12);
    CHECK(s >= std::log(1e-6) - 1e-12);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
}

TEST_CASE("edge likelihood only reads the normal segments") {
  const Mask obj = square_mask(15);
  const auto pts = contour_points(outline(obj), obj);
  EdgeSearchParams p;
  p.radius = 4;
  const EdgeMap noise = [] {
    EdgeMap e(100, 100, 0.0f);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(0, 1);
    for (auto& v : e.data()) v = u(rng) < 0.05f ? 1.0f : 0.0f;
    return e;
  }();
  bool local = true;
  const double s = edge_likelihood_with(
      pts, 100, 100,
      [&](int x, int y) {
        bool near = false;
        for (const auto& c : pts) {
          if (c.nx == 0.0 && c.ny == 0.0) continue;
          // Distance from the pixel center to the segment through the contour point.
          const double dx = x + 0.5 - (c.x + 0.5), dy = y + 0.5 - (c.y + 0.5);
          const double along = dx * c.nx + dy * c.ny;
          const double across = std::abs(-dx * c.ny + dy * c.nx);
          if (std::abs(along) <= p.radius + 1.0 && across <= 1.0) near = true;
        }
        local = local && near;
        return noise(x, y);
      },
      p);
  CHECK(local);
  CHECK(s == doctest::Approx(edge_likelihood(pts, noise, p)));
}

TEST_CASE("subsampling") {
  CHECK(subsample_indices(10, 200).size() == 10);
  const auto idx = subsample_indices(1000, 200);
  CHECK(idx.size() == 200);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(idx.back() < 1000);
  EdgeSearchParams bad;
  bad.radius = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

namespace {

SyntheticScene one_box_scene(const ShapeDatabase& db) {
  SyntheticScene s;
  s.intrinsics = {277, 277, 160, 120, 320, 240};
  RigidTransform pose;
  pose.translation = Vec3(0, 2, 0.5);
  s.objects.push_back({1, 4, 3, &db.shape(4).mesh, pose});
  s.clutter_categories = 3;
  return s;
}

RigidTransform camera() { return look_at(Vec3(0, 0, 1), Vec3(0, 2, 0.5), GravityDirection(Vec3(0, 0, -1))); }

}  // namespace

TEST_CASE("synth_frame without noise reproduces the render") {
  const ShapeDatabase db = default_shape_database();
  const SyntheticScene scene = one_box_scene(db);
  const SyntheticFrame f = synth_frame(scene, 3, 0.1, camera(), NoiseConfig{}, 42);
  REQUIRE(f.observation.proposals.size() == 1);
  CHECK(f.observation.proposals[0].box == f.truth.boxes.at(1));
  CHECK(f.observation.proposals[0].category == 3);
  CHECK(f.observation.proposals[0].frame == 3);
  for (size_t i = 0; i < f.truth.contour.data().size(); ++i)
    CHECK(f.observation.edges.data()[i] == (f.truth.contour.data()[i] ? 1.0f : 0.0f));
  CHECK(f.detected == std::set<int>{1});

  NoiseConfig drop;
  drop.dropout = 1.0;
  for (int i = 0; i < 20; ++i) CHECK(synth_frame(scene, i, i, camera(), drop, i).observation.proposals.empty());
  CHECK(synth_frame(scene, 0, 0, camera(), NoiseConfig{}, 1, {1}).observation.proposals.empty());
}

TEST_CASE("synth_frame is reproducible and edge values stay in range") {
  const ShapeDatabase db = default_shape_database();
  const SyntheticScene scene = one_box_scene(db);
  NoiseConfig n;
  n.box_sigma = 2;
  n.clutter_rate = 1.5;
  n.edge_blur = 1.0;
  n.edge_clutter_rate = 3;
  const SyntheticFrame a = synth_frame(scene, 0, 0, camera(), n, 9);
  const SyntheticFrame b = synth_frame(scene, 0, 0, camera(), n, 9);
  CHECK(a.observation.proposals == b.observation.proposals);
  CHECK(a.observation.edges == b.observation.edges);
  for (float v : a.observation.edges.data()) CHECK((v >= 0.0f && v <= 1.0f));
  for (const auto& p : a.observation.proposals) {
    CHECK(p.box.x0 < p.box.x1);
    CHECK(p.box.y0 < p.box.y1);
    CHECK((p.box.x0 >= 0 && p.box.y0 >= 0 && p.box.x1 <= 320 && p.box.y1 <= 240));
    CHECK((p.score >= 0 && p.score <= 1));
  }
}

TEST_CASE("clutter count is Poisson") {
  SyntheticScene empty;
  empty.intrinsics = {20, 20, 16, 12, 32, 24};
  NoiseConfig n;
  n.clutter_rate = 2.0;
  const int frames = 10000;
  long total = 0;
  for (int i = 0; i < frames; ++i)
    total += static_cast<long>(synth_frame(empty, i, i, RigidTransform::identity(), n, 1000 + i).observation.proposals.size());
  const double mean = static_cast<double>(total) / frames;
  CHECK(std::abs(mean - 2.0) < 3.0 * std::sqrt(2.0 / frames));
}

TEST_CASE("proposal and edge map files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "semap_test_perception";
  std::filesystem::create_directories(dir);
  const std::vector<DetectionProposal> props{{0, {1.5, 2, 30, 40.25}, 2, 0.9}, {3, {0, 0, 10, 10}, 1, 0.8}};
  write_proposals(dir / "p.jsonl", props);
  CHECK(read_proposals(dir / "p.jsonl") == props);

  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"frame":0,"box":[0,0,1,1],"category":1,"score":0.5})" << "\n" << R"({"frame":1,"box":[5,0,1,1],"category":1,"score":0.5})" << "\n";
  }
  try {
    read_proposals(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  EdgeMap e(7, 5, 0.0f);
  for (size_t i = 0; i < e.data().size(); ++i) e.data()[i] = static_cast<float>(i * 7 % 256) / 255.0f;
  write_edge_map(dir / "e.pgm", e);
  CHECK(read_edge_map(dir / "e.pgm") == e);
  std::filesystem::remove_all(dir);
}
