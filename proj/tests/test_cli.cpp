#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semap/cli.hpp"
#include "semap/io.hpp"
#include "semap/sim.hpp"

using namespace semap;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "semap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("semap_test_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  fs::path write(const std::string& name, const Json& j) const {
    write_json(root / name, j);
    return root / name;
  }
};

Json small_scene() {
  return Json::parse(R"({
    "version": 1, "seed": 3,
    "objects": [{"id": 1, "shape": 3, "position": [0, 1.6, 0.37], "azimuth": 0.4}],
    "trajectory": {"frames": 6, "keyframes": [{"position": [-0.2, 0, 0.9], "look_at": [0, 1.6, 0.37]},
                                              {"position": [0.2, 0, 0.9], "look_at": [0, 1.6, 0.37]}]},
    "noise": {"box_sigma": 1.0, "edge_blur": 1.0}
  })");
}

Json filter_config(const std::string& seq, const std::string& out) {
  Json c = {{"version", 1}, {"sequence", seq}, {"output", out}, {"seed", 5}};
  c["filter"] = {{"particles", 40}, {"persistence", 2}};
  return c;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}) == kExitConfig);
  CHECK(run({"--help"}) == kExitOk);
  CHECK(run({"simulate", "--help"}) == kExitOk);
  CHECK(run({"bogus"}) == kExitConfig);
  CHECK(run({"simulate", "--scene", "x.json"}) == kExitConfig);
  CHECK(run({"simulate", "--scene", "x.json", "--out", "y", "--frobnicate"}) == kExitConfig);
  CHECK(run({"render", "--states", "a", "--sequence", "b", "--frame", "zero", "--out", "c"}) == kExitConfig);
}

TEST_CASE("simulate") {
  Workspace w("simulate");
  const fs::path scene = w.write("scene.json", small_scene());
  REQUIRE(run({"-q", "simulate", "--scene", scene.string(), "--out", (w.root / "seq").string()}) == kExitOk);
  for (const char* f : {"trajectory.txt", "proposals.jsonl", "manifest.json", "edges/000005.pgm"})
    CHECK(fs::is_regular_file(w.root / "seq" / f));
  REQUIRE(run({"-q", "simulate", "--scene", scene.string(), "--out", (w.root / "again").string()}) == kExitOk);
  for (const char* f : {"trajectory.txt", "proposals.jsonl", "manifest.json", "edges/000003.pgm"})
    CHECK(slurp(w.root / "seq" / f) == slurp(w.root / "again" / f));

  Json bad = small_scene();
  bad["objects"][0]["shape"] = 42;
  const fs::path bad_scene = w.write("bad.json", bad);
  CHECK(run({"-q", "simulate", "--scene", bad_scene.string(), "--out", (w.root / "bad").string()}) == kExitConfig);
  CHECK_FALSE(fs::exists(w.root / "bad"));

  Json typo = small_scene();
  typo["nosie"] = Json::object();
  CHECK(run({"-q", "simulate", "--scene", w.write("typo.json", typo).string(), "--out", (w.root / "t").string()}) ==
        kExitConfig);
  CHECK_FALSE(fs::exists(w.root / "t"));
  CHECK(run({"-q", "simulate", "--scene", (w.root / "missing.json").string(), "--out", (w.root / "m").string()}) ==
        kExitConfig);
}

TEST_CASE("filter, eval and render") {
  Workspace w("pipeline");
  const fs::path scene = w.write("scene.json", small_scene());
  REQUIRE(run({"-q", "simulate", "--scene", scene.string(), "--out", (w.root / "seq").string()}) == kExitOk);

  const fs::path cfg = w.write("run.json", filter_config("seq", "out"));
  REQUIRE(run({"-q", "filter", "--config", cfg.string()}) == kExitOk);
  const std::string states = slurp(w.root / "out" / "states.jsonl");
  CHECK(std::count(states.begin(), states.end(), '\n') == 6);
  const Json summary = read_json(w.root / "out" / "summary.json");
  CHECK(summary.at("objects").size() == 1);

  // A different seed keeps the schema but changes the particles.
  REQUIRE(run({"-q", "filter", "--config", w.write("run2.json", filter_config("seq", "out2")).string(), "--seed", "6"}) ==
          kExitOk);
  const std::string states2 = slurp(w.root / "out2" / "states.jsonl");
  CHECK(states2 != states);
  CHECK(Json::parse(states2.substr(0, states2.find('\n'))).size() == Json::parse(states.substr(0, states.find('\n'))).size());

  const std::vector<std::string> eval_args{"-q", "eval", "--states", (w.root / "out" / "states.jsonl").string(),
                                           "--manifest", (w.root / "seq" / "manifest.json").string(),
                                           "--out", (w.root / "metrics").string(), "--samples", "2000"};
  REQUIRE(run(eval_args) == kExitOk);
  const Json metrics = read_json(w.root / "metrics" / "metrics.json");
  CHECK(metrics.contains("objects"));
  CHECK(fs::is_regular_file(w.root / "metrics" / "metrics.csv"));
  auto zero = eval_args;
  zero.back() = "0";
  CHECK(run(zero) == kExitConfig);

  const fs::path img = w.root / "overlay.ppm";
  REQUIRE(run({"-q", "render", "--states", (w.root / "out" / "states.jsonl").string(), "--sequence",
               (w.root / "seq").string(), "--frame", "5", "--out", img.string()}) == kExitOk);
  const Rgb8 overlay = read_ppm(img);
  CHECK(overlay.width() == 320);
  CHECK(run({"-q", "render", "--states", (w.root / "out" / "states.jsonl").string(), "--sequence",
             (w.root / "seq").string(), "--frame", "6", "--out", img.string()}) == kExitConfig);
}

TEST_CASE("filter validates before writing") {
  Workspace w("validate");
  REQUIRE(run({"-q", "simulate", "--scene", w.write("scene.json", small_scene()).string(), "--out",
               (w.root / "seq").string()}) == kExitOk);

  Json c = filter_config("seq", "out");
  c["filter"]["particles"] = 0;
  CHECK(run({"-q", "filter", "--config", w.write("a.json", c).string()}) == kExitConfig);
  c = filter_config("seq", "out");
  c["filter"]["partcles"] = 10;
  CHECK(run({"-q", "filter", "--config", w.write("b.json", c).string()}) == kExitConfig);
  c = filter_config("nowhere", "out");
  CHECK(run({"-q", "filter", "--config", w.write("c.json", c).string()}) == kExitConfig);
  c = filter_config("seq", "out");
  c.erase("version");
  CHECK(run({"-q", "filter", "--config", w.write("d.json", c).string()}) == kExitConfig);
  CHECK_FALSE(fs::exists(w.root / "out"));

  // Corrupt data is a data error, still before any output.
  {
    std::ofstream p(w.root / "seq" / "proposals.jsonl", std::ios::app);
    p << "{not json\n";
  }
  CHECK(run({"-q", "filter", "--config", w.write("e.json", filter_config("seq", "out")).string()}) == kExitData);
  CHECK_FALSE(fs::exists(w.root / "out"));
}

TEST_CASE("empty proposal stream gives an empty world") {
  Workspace w("empty");
  REQUIRE(run({"-q", "simulate", "--scene", w.write("scene.json", small_scene()).string(), "--out",
               (w.root / "seq").string()}) == kExitOk);
  { std::ofstream(w.root / "seq" / "proposals.jsonl", std::ios::trunc); }
  REQUIRE(run({"-q", "filter", "--config", w.write("run.json", filter_config("seq", "out")).string()}) == kExitOk);
  CHECK(read_json(w.root / "out" / "summary.json").at("objects").empty());
}

TEST_CASE("overlay shading") {
  const ShapeDatabase db = default_shape_database();
  const CameraIntrinsics k{277, 277, 160, 120, 320, 240};
  const GravityDirection down(Vec3(0, 0, -1));
  FrameObservation obs;
  obs.camera = look_at(Vec3(0, 0, 0.5), Vec3(0, 2, 0.5), down);
  obs.edges = EdgeMap(320, 240, 0.0f);
  obs.edges(3, 4) = 1.0f;
  obs.proposals.push_back({0, {10, 10, 20, 20}, 1, 0.9});

  FrameEstimate empty;
  const Rgb8 bare = render_overlay(empty, obs, db, k);
  CHECK(bare(3, 4) == std::array<std::uint8_t, 3>{255, 255, 255});
  CHECK(bare(10, 15) == std::array<std::uint8_t, 3>{255, 0, 0});
  CHECK(bare(100, 100) == std::array<std::uint8_t, 3>{0, 0, 0});

  FrameEstimate two;
  ObjectEstimate nearer, farther;
  nearer.id = 1;
  nearer.shape = 4;
  nearer.status = TrackStatus::tracking;
  nearer.inertial = {Mat3::Identity(), Vec3(-0.5, 2.0, 0.5)};
  farther = nearer;
  farther.id = 2;
  farther.inertial = {Mat3::Identity(), Vec3(0.6, 3.5, 0.5)};
  two.objects = {nearer, farther};
  const Rgb8 img = render_overlay(two, obs, db, k);
  // Interior pixels at each object's projected centroid.
  auto centre = [&](const Vec3& p) {
    const Vec3 c = obs.camera.inverse().apply(p);
    return std::pair{static_cast<int>(k.fx * c.x() / c.z() + k.cx), static_cast<int>(k.fy * c.y() / c.z() + k.cy)};
  };
  const auto [nx, ny] = centre(nearer.inertial.translation);
  const auto [fx, fy] = centre(farther.inertial.translation);
  const auto a = img(nx, ny), b = img(fx, fy);
  CHECK(a[0] == a[1]);
  CHECK(b[0] == b[1]);
  CHECK(a[0] > 0);
  CHECK(a[0] < b[0]);
}
