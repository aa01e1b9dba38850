#include "semap/perception.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "semap/io.hpp"

namespace semap {

void LikelihoodWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InvalidInput("likelihood weights must be non-negative");
  if (alpha == 0.0 && beta == 0.0) throw InvalidInput("likelihood weights cannot both be zero");
}

double DetectorProvider::score(int frame, const PixelBox& box, int category) const {
  const BoxQuery q{box, category};
  return score_batch(frame, std::span<const BoxQuery>(&q, 1)).front();
}

OracleDetector::OracleDetector(std::map<int, std::vector<ReferenceBox>> frames, double floor, double ceiling)
    : frames_(std::move(frames)), floor_(floor), ceiling_(ceiling) {
  if (!(floor > 0.0) || !(ceiling <= 1.0) || !(floor < ceiling)) {
    throw InvalidInput("oracle detector needs 0 < floor < ceiling <= 1");
  }
}

std::vector<double> OracleDetector::score_batch(int frame, std::span<const BoxQuery> queries) const {
  const auto it = frames_.find(frame);
  if (it == frames_.end()) throw ProviderError("oracle detector has no reference for frame " + std::to_string(frame));
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    double best = 0.0;
    for (const auto& ref : it->second) {
      if (ref.category == q.category) best = std::max(best, box_iou(q.box, ref.box));
    }
    out.push_back(std::log(floor_ + (ceiling_ - floor_) * best));
  }
  return out;
}

void EdgeSearchParams::validate() const {
  if (radius < 1) throw InvalidInput("edge search radius must be >= 1");
  if (!(sigma > 0.0)) throw InvalidInput("edge search sigma must be positive");
  if (max_samples < 1) throw InvalidInput("edge search needs at least one sample");
  if (!(floor > 0.0 && floor <= 1.0)) throw InvalidInput("edge likelihood floor must be in (0, 1]");
}

std::vector<size_t> subsample_indices(size_t count, int max_samples) {
  std::vector<size_t> idx;
  const auto cap = static_cast<size_t>(std::max(max_samples, 1));
  if (count <= cap) {
    idx.resize(count);
    for (size_t i = 0; i < count; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(cap);
  for (size_t i = 0; i < cap; ++i) idx.push_back(i * count / cap);
  return idx;
}

double edge_likelihood(std::span<const ContourPoint> contour, const EdgeMap& edges, const EdgeSearchParams& params) {
  return edge_likelihood_with(
      contour, edges.width(), edges.height(), [&](int x, int y) { return static_cast<double>(edges(x, y)); }, params);
}

void NoiseConfig::validate() const {
  if (!(box_sigma >= 0.0) || !(edge_blur >= 0.0)) throw InvalidInput("noise sigmas must be non-negative");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw InvalidInput("dropout must be in [0, 1]");
  if (!(clutter_rate >= 0.0) || !(edge_clutter_rate >= 0.0)) throw InvalidInput("clutter rates must be non-negative");
  if (edge_clutter_length < 1) throw InvalidInput("edge clutter length must be >= 1");
  if (!(true_score >= 0.0 && true_score <= 1.0)) throw InvalidInput("true_score must be in [0, 1]");
}

RenderBuffers render_truth(const SyntheticScene& scene, const RigidTransform& camera) {
  std::vector<RenderObject> objs;
  objs.reserve(scene.objects.size());
  for (const auto& o : scene.objects) objs.push_back({o.id, o.mesh, relative_object_in_camera(o.pose, camera)});
  return render_scene(objs, scene.intrinsics);
}

namespace {

// Keeps a jittered box inside the image with at least one pixel of extent.
PixelBox clamp_box(PixelBox b, int width, int height) {
  if (b.x0 > b.x1) std::swap(b.x0, b.x1);
  if (b.y0 > b.y1) std::swap(b.y0, b.y1);
  b.x0 = std::clamp(b.x0, 0.0, width - 1.0);
  b.y0 = std::clamp(b.y0, 0.0, height - 1.0);
  b.x1 = std::clamp(b.x1, b.x0 + 1.0, double(width));
  b.y1 = std::clamp(b.y1, b.y0 + 1.0, double(height));
  return b;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

// Separable blur, rescaled so an isolated straight one-pixel edge keeps a
// peak response of ~1 instead of 1 / (sqrt(2 pi) sigma).
Image<double> blur_edges(const Image<double>& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width(), h = in.height();
  Image<double> tmp(w, h, 0.0), out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in(xx, y);
      }
      tmp(x, y) = s;
    }
  }
  const double peak = k[r];
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp(x, yy);
      }
      out(x, y) = std::min(1.0, s / peak);
    }
  }
  return out;
}

}  // namespace

SyntheticFrame synth_frame(const SyntheticScene& scene, int frame, double timestamp, const RigidTransform& camera,
                           const NoiseConfig& noise, std::uint64_t seed, const std::set<int>& suppressed) {
  noise.validate();
  const CameraIntrinsics& k = scene.intrinsics;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticFrame out;
  out.truth = render_truth(scene, camera);
  FrameObservation& obs = out.observation;
  obs.index = frame;
  obs.timestamp = timestamp;
  obs.camera = camera;
  obs.gravity = scene.gravity;

  for (const auto& o : scene.objects) {
    const auto it = out.truth.boxes.find(o.id);
    if (it == out.truth.boxes.end()) continue;
    // Draw the dropout coin for every visible object so suppression does not
    // shift the random stream of later objects.
    const bool dropped = unit(rng) < noise.dropout;
    PixelBox b = it->second;
    if (noise.box_sigma > 0.0) {
      b.x0 += noise.box_sigma * gauss(rng);
      b.y0 += noise.box_sigma * gauss(rng);
      b.x1 += noise.box_sigma * gauss(rng);
      b.y1 += noise.box_sigma * gauss(rng);
      b = clamp_box(b, k.width, k.height);
    }
    if (dropped || suppressed.count(o.id)) continue;
    obs.proposals.push_back({frame, b, o.category, noise.true_score});
    out.detected.insert(o.id);
  }

  if (noise.clutter_rate > 0.0) {
    std::poisson_distribution<int> count(noise.clutter_rate);
    std::uniform_int_distribution<int> cat(1, std::max(1, scene.clutter_categories));
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double bw = k.width * (0.1 + 0.3 * unit(rng));
      const double bh = k.height * (0.1 + 0.3 * unit(rng));
      const double x0 = (k.width - bw) * unit(rng);
      const double y0 = (k.height - bh) * unit(rng);
      obs.proposals.push_back({frame, {x0, y0, x0 + bw, y0 + bh}, cat(rng), 0.8 + 0.2 * unit(rng)});
    }
  }

  Image<double> edges(k.width, k.height, 0.0);
  for (size_t i = 0; i < edges.data().size(); ++i) edges.data()[i] = out.truth.contour.data()[i] ? 1.0 : 0.0;
  if (noise.edge_blur > 0.0) edges = blur_edges(edges, noise.edge_blur);
  if (noise.edge_clutter_rate > 0.0) {
    std::poisson_distribution<int> count(noise.edge_clutter_rate);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double x = k.width * unit(rng), y = k.height * unit(rng);
      const double a = kTwoPi * unit(rng);
      for (int s = 0; s < noise.edge_clutter_length; ++s) {
        const int px = static_cast<int>(std::floor(x + s * std::cos(a)));
        const int py = static_cast<int>(std::floor(y + s * std::sin(a)));
        if (edges.contains(px, py)) edges(px, py) = 1.0;
      }
    }
  }
  obs.edges = EdgeMap(k.width, k.height, 0.0f);
  for (size_t i = 0; i < edges.data().size(); ++i) {
    obs.edges.data()[i] = static_cast<float>(std::lround(255.0 * edges.data()[i])) / 255.0f;
  }
  return out;
}

void write_proposals(const std::filesystem::path& path, const std::vector<DetectionProposal>& proposals) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : proposals) {
    const Json rec = {{"frame", p.frame},
                      {"box", Json::array({p.box.x0, p.box.y0, p.box.x1, p.box.y1})},
                      {"category", p.category},
                      {"score", p.score}};
    out << rec.dump() << '\n';
  }
}

std::vector<DetectionProposal> read_proposals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<DetectionProposal> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json rec = Json::parse(line);
      DetectionProposal p;
      p.frame = rec.at("frame").get<int>();
      const auto& b = rec.at("box");
      if (!b.is_array() || b.size() != 4) throw ParseError("box must have 4 entries", line_no);
      p.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      p.category = rec.at("category").get<int>();
      p.score = rec.at("score").get<double>();
      if (!(p.box.x0 < p.box.x1 && p.box.y0 < p.box.y1)) throw ParseError("degenerate proposal box", line_no);
      if (!(p.score >= 0.0 && p.score <= 1.0)) throw ParseError("proposal score outside [0, 1]", line_no);
      out.push_back(p);
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return out;
}

void write_edge_map(const std::filesystem::path& path, const EdgeMap& edges) {
  Gray8 g(edges.width(), edges.height());
  for (size_t i = 0; i < g.data().size(); ++i) {
    g.data()[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(double(edges.data()[i]), 0.0, 1.0)));
  }
  write_pgm(path, g);
}

EdgeMap read_edge_map(const std::filesystem::path& path) {
  const Gray8 g = read_pgm(path);
  EdgeMap e(g.width(), g.height());
  for (size_t i = 0; i < g.data().size(); ++i) e.data()[i] = static_cast<float>(g.data()[i]) / 255.0f;
  return e;
}

}  // namespace semap
