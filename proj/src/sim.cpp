#include "semap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "semap/random.hpp"

namespace semap {

namespace {

void add_box(TriMesh& m, const Vec3& lo, const Vec3& hi) {
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  // Outward-facing quads as corner indices (counter-clockwise seen from outside).
  static constexpr std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                                {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.push_back({base + q[0], base + q[1], base + q[2]});
    m.triangles.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

TriMesh centered(TriMesh m) {
  Eigen::AlignedBox3d box;
  for (const auto& v : m.vertices) box.extend(v);
  const Vec3 c = box.center();
  for (auto& v : m.vertices) v -= c;
  return m;
}

void add_legs(TriMesh& m, double half_x, double half_y, double side, double height) {
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      const double x = sx * (half_x - side / 2), y = sy * (half_y - side / 2);
      add_box(m, {x - side / 2, y - side / 2, 0.0}, {x + side / 2, y + side / 2, height});
    }
  }
}

TriMesh chair_a() {
  TriMesh m;
  add_legs(m, 0.225, 0.225, 0.04, 0.42);
  add_box(m, {-0.225, -0.225, 0.42}, {0.225, 0.225, 0.47});
  add_box(m, {-0.225, 0.185, 0.47}, {0.225, 0.225, 0.90});
  return centered(m);
}

TriMesh chair_b() {
  TriMesh m;
  add_legs(m, 0.26, 0.26, 0.05, 0.40);
  add_box(m, {-0.26, -0.26, 0.40}, {0.26, 0.26, 0.46});
  add_box(m, {-0.26, 0.21, 0.46}, {0.26, 0.26, 0.74});
  for (int s : {-1, 1}) {
    const double x0 = s < 0 ? -0.26 : 0.21, x1 = s < 0 ? -0.21 : 0.26;
    add_box(m, {x0, -0.26, 0.62}, {x1, 0.21, 0.66});
    add_box(m, {x0, -0.26, 0.46}, {x1, -0.21, 0.62});
  }
  return centered(m);
}

TriMesh table() {
  TriMesh m;
  add_legs(m, 0.46, 0.26, 0.05, 0.70);
  add_box(m, {-0.5, -0.3, 0.70}, {0.5, 0.3, 0.74});
  return centered(m);
}

TriMesh cabinet() {
  TriMesh m;
  add_box(m, {-0.25, -0.2, 0.0}, {0.25, 0.2, 1.0});
  add_box(m, {-0.27, -0.22, 1.0}, {0.27, 0.22, 1.03});
  return centered(m);
}

double number(const Json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

int integer(const Json& j, const char* key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return j.at(key).get<int>();
}

const Json& required(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key);
}

GravityDirection gravity_from(const Vec3& v) {
  if (!(v.norm() > 0.0)) throw ConfigError("gravity must be a non-zero vector");
  return GravityDirection::from_vector(v);
}

}  // namespace

ShapeDatabase default_shape_database() {
  std::vector<ShapeEntry> e;
  e.push_back({1, 1, "chair_a", chair_a()});
  e.push_back({2, 1, "chair_b", chair_b()});
  e.push_back({3, 2, "table", table()});
  e.push_back({4, 3, "cabinet", cabinet()});
  return ShapeDatabase(std::move(e));
}

void TrajectorySpec::validate() const {
  if (frames < 1) throw ConfigError("trajectory needs at least one frame");
  if (keyframes.empty()) throw ConfigError("trajectory needs at least one keyframe");
  if (static_cast<int>(keyframes.size()) > frames) throw ConfigError("more keyframes than frames");
  if (!(frame_interval > 0.0)) throw ConfigError("frame interval must be positive");
  if (!std::isfinite(start_time)) throw ConfigError("start time must be finite");
  for (const auto& k : keyframes) {
    if (!k.is_valid(1e-6)) throw ConfigError("keyframe is not a rigid transform");
  }
}

RigidTransform interpolate_camera(const TrajectorySpec& t, int frame) {
  if (frame < 0 || frame >= t.frames) throw InvalidInput("frame outside the trajectory");
  const int n = static_cast<int>(t.keyframes.size());
  if (n == 1) return t.keyframes.front();
  const double s = t.frames == 1 ? 0.0 : static_cast<double>(frame) * (n - 1) / (t.frames - 1);
  const int j = std::min(static_cast<int>(std::floor(s)), n - 2);
  const double u = s - j;
  const RigidTransform& a = t.keyframes[static_cast<size_t>(j)];
  const RigidTransform& b = t.keyframes[static_cast<size_t>(j) + 1];
  if (u == 0.0) return a;
  if (u == 1.0) return b;
  const Quat q = a.quaternion().slerp(u, b.quaternion());
  return RigidTransform::from_quaternion(q, (1.0 - u) * a.translation + u * b.translation);
}

std::vector<RigidTransform> orbit_keyframes(const Vec3& center, double radius, double height, double start_angle,
                                            double sweep, int count, const GravityDirection& gamma) {
  if (!(radius > 0.0)) throw ConfigError("orbit radius must be positive");
  if (count < 1) throw ConfigError("orbit needs at least one keyframe");
  const Vec3 up = -gamma.vector();
  Vec3 e1 = Vec3::UnitX() - up.dot(Vec3::UnitX()) * up;
  if (e1.norm() < 1e-6) e1 = Vec3::UnitY() - up.dot(Vec3::UnitY()) * up;
  e1.normalize();
  const Vec3 e2 = up.cross(e1);
  std::vector<RigidTransform> out;
  for (int i = 0; i < count; ++i) {
    const double a = start_angle + (count == 1 ? 0.0 : sweep * i / (count - 1));
    const Vec3 eye = center + radius * (std::cos(a) * e1 + std::sin(a) * e2) + height * up;
    out.push_back(look_at(eye, center, gamma));
  }
  return out;
}

void SceneSpec::validate(const ShapeDatabase& db) const {
  intrinsics.validate();
  trajectory.validate();
  noise.validate();
  if (clutter_categories < 1) throw ConfigError("clutter_categories must be >= 1");
  if (occlusion_dropout && !(*occlusion_dropout > 0.0 && *occlusion_dropout <= 1.0)) {
    throw ConfigError("occlusion_dropout must be in (0, 1]");
  }
  std::set<int> ids;
  for (const auto& o : objects) {
    if (o.id < 1) throw ConfigError("object ids must be positive");
    if (!ids.insert(o.id).second) throw ConfigError("duplicate object id " + std::to_string(o.id));
    if (!db.contains(o.shape)) throw InvalidInput("object " + std::to_string(o.id) + " uses unknown shape " +
                                                  std::to_string(o.shape));
    if (!o.position.allFinite() || !std::isfinite(o.azimuth)) throw ConfigError("object pose must be finite");
  }
}

Json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  const std::string where = "intrinsics";
  reject_unknown_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) required(j, key, where);
  CameraIntrinsics k;
  k.fx = number(j, "fx", 0.0, where);
  k.fy = number(j, "fy", 0.0, where);
  k.cx = number(j, "cx", 0.0, where);
  k.cy = number(j, "cy", 0.0, where);
  k.width = integer(j, "width", 0, where);
  k.height = integer(j, "height", 0, where);
  try {
    k.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return k;
}

Json noise_to_json(const NoiseConfig& n) {
  return {{"box_sigma", n.box_sigma},
          {"dropout", n.dropout},
          {"clutter_rate", n.clutter_rate},
          {"edge_blur", n.edge_blur},
          {"edge_clutter_rate", n.edge_clutter_rate},
          {"edge_clutter_length", n.edge_clutter_length},
          {"true_score", n.true_score}};
}

NoiseConfig noise_from_json(const Json& j) {
  const std::string where = "noise";
  reject_unknown_keys(j,
                      {"box_sigma", "dropout", "clutter_rate", "edge_blur", "edge_clutter_rate",
                       "edge_clutter_length", "true_score"},
                      where);
  NoiseConfig n;
  n.box_sigma = number(j, "box_sigma", n.box_sigma, where);
  n.dropout = number(j, "dropout", n.dropout, where);
  n.clutter_rate = number(j, "clutter_rate", n.clutter_rate, where);
  n.edge_blur = number(j, "edge_blur", n.edge_blur, where);
  n.edge_clutter_rate = number(j, "edge_clutter_rate", n.edge_clutter_rate, where);
  n.edge_clutter_length = integer(j, "edge_clutter_length", n.edge_clutter_length, where);
  n.true_score = number(j, "true_score", n.true_score, where);
  try {
    n.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return n;
}

SceneSpec scene_spec_from_json(const Json& j) {
  const std::string where = "scene";
  reject_unknown_keys(j,
                      {"version", "fixture", "database", "gravity", "intrinsics", "objects", "trajectory", "noise",
                       "seed", "clutter_categories", "occlusion_dropout", "frames"},
                      where);
  if (integer(j, "version", 0, where) != 1) throw ConfigError("scene: unsupported or missing version (expected 1)");

  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) throw ConfigError("scene.seed: expected an unsigned integer");
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});

  SceneSpec spec;
  if (j.contains("fixture")) {
    // Named fixtures accept only a seed and a frame count.
    reject_unknown_keys(j, {"version", "fixture", "seed", "frames", "database"}, where);
    const std::string name = j.at("fixture").is_string() ? j.at("fixture").get<std::string>() : "";
    const int frames = integer(j, "frames", 0, where);
    if (name == "occlusion") {
      spec = occlusion_fixture(seed, frames > 0 ? frames : 120);
    } else if (name == "single") {
      spec = single_object_fixture(1, seed, frames > 0 ? frames : 100);
    } else {
      throw ConfigError("scene.fixture: unknown fixture '" + name + "'");
    }
    if (j.contains("database")) spec.database = j.at("database").get<std::string>();
    return spec;
  }
  if (j.contains("frames")) throw ConfigError("scene.frames: only valid with a fixture; use trajectory.frames");

  spec.seed = seed;
  if (j.contains("database")) {
    if (!j.at("database").is_string()) throw ConfigError("scene.database: expected a path");
    spec.database = j.at("database").get<std::string>();
  }
  if (j.contains("gravity")) spec.gravity = gravity_from(vec3_from_json(j.at("gravity"), "scene.gravity"));
  if (j.contains("intrinsics")) spec.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  if (j.contains("noise")) spec.noise = noise_from_json(j.at("noise"));
  spec.clutter_categories = integer(j, "clutter_categories", spec.clutter_categories, where);
  if (j.contains("occlusion_dropout")) spec.occlusion_dropout = number(j, "occlusion_dropout", 1.0, where);

  const Json& objects = required(j, "objects", where);
  if (!objects.is_array()) throw ConfigError("scene.objects: expected an array");
  for (const auto& o : objects) {
    reject_unknown_keys(o, {"id", "shape", "position", "azimuth"}, "scene.objects[]");
    for (const char* key : {"id", "shape"}) required(o, key, "scene.objects[]");
    ObjectSpec s;
    s.id = integer(o, "id", 0, "scene.objects[]");
    s.shape = integer(o, "shape", 0, "scene.objects[]");
    s.position = vec3_from_json(required(o, "position", "scene.objects[]"), "scene.objects[].position");
    s.azimuth = number(o, "azimuth", 0.0, "scene.objects[]");
    spec.objects.push_back(s);
  }

  const Json& traj = required(j, "trajectory", where);
  reject_unknown_keys(traj, {"frames", "start_time", "frame_interval", "keyframes", "orbit"}, "scene.trajectory");
  required(traj, "frames", "scene.trajectory");
  spec.trajectory.frames = integer(traj, "frames", 0, "scene.trajectory");
  spec.trajectory.start_time = number(traj, "start_time", 0.0, "scene.trajectory");
  spec.trajectory.frame_interval = number(traj, "frame_interval", 1.0 / 30.0, "scene.trajectory");
  if (traj.contains("keyframes") == traj.contains("orbit")) {
    throw ConfigError("scene.trajectory: give exactly one of 'keyframes' or 'orbit'");
  }
  if (traj.contains("orbit")) {
    const Json& o = traj.at("orbit");
    const std::string w = "scene.trajectory.orbit";
    reject_unknown_keys(o, {"center", "radius", "height", "start_angle", "sweep"}, w);
    spec.trajectory.keyframes =
        orbit_keyframes(vec3_from_json(required(o, "center", w), w + ".center"), number(o, "radius", 0.0, w),
                        number(o, "height", 0.0, w), number(o, "start_angle", 0.0, w), number(o, "sweep", 0.0, w),
                        std::max(spec.trajectory.frames, 1), spec.gravity);
  } else {
    for (const auto& k : traj.at("keyframes")) {
      const std::string w = "scene.trajectory.keyframes[]";
      reject_unknown_keys(k, {"position", "look_at", "orientation"}, w);
      const Vec3 eye = vec3_from_json(required(k, "position", w), w + ".position");
      if (k.contains("look_at") == k.contains("orientation")) {
        throw ConfigError(w + ": give exactly one of 'look_at' or 'orientation'");
      }
      if (k.contains("look_at")) {
        try {
          spec.trajectory.keyframes.push_back(look_at(eye, vec3_from_json(k.at("look_at"), w + ".look_at"), spec.gravity));
        } catch (const InvalidInput& e) {
          throw ConfigError(e.what());
        }
      } else {
        const Json& q = k.at("orientation");
        if (!q.is_array() || q.size() != 4) throw ConfigError(w + ".orientation: expected [qx, qy, qz, qw]");
        Quat quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(), q[2].get<double>());
        if (std::abs(quat.norm() - 1.0) > 1e-6) throw ConfigError(w + ".orientation: quaternion is not unit");
        spec.trajectory.keyframes.push_back(RigidTransform::from_quaternion(quat.normalized(), eye));
      }
    }
  }
  return spec;
}

double Sequence::mean_occlusion(int id) const {
  double sum = 0.0;
  for (const auto& f : frames) {
    const auto it = f.occlusion.find(id);
    if (it != f.occlusion.end() && it->second) sum += *it->second;
  }
  return frames.empty() ? 0.0 : sum / static_cast<double>(frames.size());
}

Sequence generate(const SceneSpec& spec, const ShapeDatabase& db) {
  spec.validate(db);
  Sequence seq;
  seq.spec = spec;

  SyntheticScene scene;
  scene.intrinsics = spec.intrinsics;
  scene.gravity = spec.gravity;
  scene.clutter_categories = spec.clutter_categories;
  for (const auto& o : spec.objects) {
    const RigidTransform pose = o.pose(spec.gravity);
    scene.objects.push_back({o.id, o.shape, db.category_of(o.shape), &db.shape(o.shape).mesh, pose});
    seq.objects.push_back({o.id, o.shape, pose});
  }

  ObjectRaster solo;
  for (int f = 0; f < spec.trajectory.frames; ++f) {
    GeneratedFrame out;
    const RigidTransform cam = interpolate_camera(spec.trajectory, f);
    out.pose.timestamp = spec.trajectory.start_time + f * spec.trajectory.frame_interval;
    out.pose.orientation = cam.quaternion();
    out.pose.position = cam.translation;
    // The written trajectory is the source of truth, so render from its exact form.
    const RigidTransform cam_exact = out.pose.pose();

    const RenderBuffers truth = render_truth(scene, cam_exact);
    std::set<int> suppressed;
    for (const auto& o : scene.objects) {
      solo.rasterize(*o.mesh, relative_object_in_camera(o.pose, cam_exact), spec.intrinsics);
      if (solo.empty()) {
        out.occlusion[o.id] = std::nullopt;
        continue;
      }
      long visible = 0;
      for (int32_t v : truth.instance.data()) visible += v == o.id;
      const double frac = 1.0 - static_cast<double>(visible) / solo.covered();
      out.occlusion[o.id] = std::max(0.0, frac);
      if (spec.occlusion_dropout && frac >= *spec.occlusion_dropout) suppressed.insert(o.id);
    }

    const SyntheticFrame sf = synth_frame(scene, f, out.pose.timestamp, cam_exact, spec.noise,
                                          derive_seed(spec.seed, {kStreamSynth, static_cast<std::uint64_t>(f)}),
                                          suppressed);
    out.proposals = sf.observation.proposals;
    out.edges = sf.observation.edges;
    for (const auto& o : scene.objects) {
      const auto it = sf.truth.boxes.find(o.id);
      if (it == sf.truth.boxes.end()) continue;
      out.boxes.push_back({o.id, o.category, it->second, sf.detected.count(o.id) > 0});
    }
    seq.frames.push_back(std::move(out));
  }
  return seq;
}

namespace {

Json box_json(const PixelBox& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

PixelBox box_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must have 4 entries");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

void write_sequence(const Sequence& seq, const ShapeDatabase& db, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  seq.spec.validate(db);
  std::error_code ec;
  fs::create_directories(dir / "edges", ec);
  if (ec) throw DataError("cannot create " + (dir / "edges").string() + ": " + ec.message());

  std::vector<TimedPose> poses;
  std::vector<DetectionProposal> proposals;
  Json frames = Json::array();
  for (size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& fr = seq.frames[f];
    poses.push_back(fr.pose);
    proposals.insert(proposals.end(), fr.proposals.begin(), fr.proposals.end());
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", f);
    write_edge_map(dir / "edges" / name, fr.edges);

    Json boxes = Json::array();
    for (const auto& b : fr.boxes) {
      boxes.push_back({{"id", b.id}, {"category", b.category}, {"box", box_json(b.box)}, {"detected", b.detected}});
    }
    Json occ = Json::array();
    for (const auto& [id, frac] : fr.occlusion) occ.push_back({{"id", id}, {"fraction", frac ? Json(*frac) : Json(nullptr)}});
    frames.push_back({{"frame", f}, {"timestamp", fr.pose.timestamp}, {"boxes", boxes}, {"occlusion", occ}});
  }
  save_trajectory(dir / "trajectory.txt", poses);
  write_proposals(dir / "proposals.jsonl", proposals);

  Json objects = Json::array();
  for (const auto& o : seq.objects) {
    objects.push_back({{"id", o.object_id},
                       {"shape", o.shape},
                       {"category", db.category_of(o.shape)},
                       {"pose", transform_to_json(o.pose)},
                       {"mean_occlusion", seq.mean_occlusion(o.object_id)}});
  }
  const Json manifest = {{"version", 1},
                         {"database", seq.spec.database.empty() ? "builtin" : seq.spec.database},
                         {"seed", seq.spec.seed},
                         {"gravity", vec3_to_json(seq.spec.gravity.vector())},
                         {"intrinsics", intrinsics_to_json(seq.spec.intrinsics)},
                         {"noise", noise_to_json(seq.spec.noise)},
                         {"occlusion_dropout",
                          seq.spec.occlusion_dropout ? Json(*seq.spec.occlusion_dropout) : Json(nullptr)},
                         {"objects", objects},
                         {"frames", frames}};
  write_json(dir / "manifest.json", manifest);
}

SequenceManifest read_manifest(const std::filesystem::path& path) {
  const Json j = read_json(path);
  SequenceManifest m;
  try {
    if (j.at("version").get<int>() != 1) throw DataError("manifest: unsupported version");
    m.gravity = GravityDirection::from_vector(vec3_from_json(j.at("gravity"), "manifest.gravity"));
    m.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    m.database = j.at("database").get<std::string>();
    for (const auto& o : j.at("objects")) {
      m.objects.push_back({o.at("id").get<int>(), o.at("shape").get<int>(), transform_from_json(o.at("pose"))});
    }
    for (const auto& f : j.at("frames")) {
      auto& boxes = m.boxes[f.at("frame").get<int>()];
      for (const auto& b : f.at("boxes")) {
        boxes.push_back({b.at("id").get<int>(), b.at("category").get<int>(), box_from(b.at("box")),
                         b.at("detected").get<bool>()});
      }
      ++m.frames;
    }
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return m;
}

std::map<int, std::vector<ReferenceBox>> oracle_references(const SequenceManifest& m) {
  std::map<int, std::vector<ReferenceBox>> out;
  for (const auto& [frame, boxes] : m.boxes) {
    auto& refs = out[frame];
    for (const auto& b : boxes) {
      refs.push_back({b.box, b.category});
    }
  }
  return out;
}

SceneSpec occlusion_fixture(std::uint64_t seed, int frames) {
  SceneSpec spec;
  spec.seed = seed;
  spec.noise.box_sigma = 2.0;
  spec.noise.edge_blur = 1.0;
  spec.occlusion_dropout = 0.5;
  // A: cabinet between the camera and B, a chair. The camera slides right
  // until only a sliver of B shows past A, dwells there and slides back.
  spec.objects.push_back({1, 4, Vec3(0.0, 1.5, 0.515), 0.3});
  spec.objects.push_back({2, 1, Vec3(0.0, 2.6, 0.45), 0.4});
  spec.trajectory.frames = frames;
  for (double x : {-1.4, -0.62, -0.45, -0.42, -0.45, -0.62, -1.0, -1.4}) {
    spec.trajectory.keyframes.push_back(look_at(Vec3(x, 0.0, 1.1), Vec3(0.0, 2.0, 0.45), spec.gravity));
  }
  return spec;
}

SceneSpec single_object_fixture(int shape, std::uint64_t seed, int frames, double range) {
  SceneSpec spec;
  spec.seed = seed;
  spec.noise.box_sigma = 2.0;
  spec.noise.edge_blur = 1.0;
  // Azimuth on a 16-cell grid offset by half a cell, so never 0.
  std::mt19937_64 rng(derive_seed(seed, {kStreamSynth, 0xA21ULL}));
  const int cell = std::uniform_int_distribution<int>(0, 15)(rng);
  const double azimuth = (cell + 0.5) * kTwoPi / 16.0;
  const ShapeDatabase db = default_shape_database();
  Eigen::AlignedBox3d box;
  for (const auto& v : db.shape(shape).mesh.vertices) box.extend(v);
  const Vec3 centroid(0.0, 0.0, 0.5 * box.sizes().z());
  spec.objects.push_back({1, shape, centroid, azimuth});
  const double height = 0.5;
  spec.trajectory.frames = frames;
  spec.trajectory.keyframes = orbit_keyframes(centroid, std::sqrt(range * range - height * height), height,
                                              -0.5 * kPi, kPi / 2.0, frames, spec.gravity);
  return spec;
}

}  // namespace semap
