#include "semap/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "semap/io.hpp"

namespace semap {

double TriMesh::triangle_area(size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[tri[0]];
  return 0.5 * (vertices[tri[1]] - a).cross(vertices[tri[2]] - a).norm();
}

Vec3 TriMesh::triangle_normal(size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[tri[0]];
  return (vertices[tri[1]] - a).cross(vertices[tri[2]] - a).normalized();
}

double TriMesh::surface_area() const {
  double total = 0.0;
  for (size_t t = 0; t < triangles.size(); ++t) total += triangle_area(t);
  return total;
}

void TriMesh::validate() const {
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw InvalidInput("mesh has non-finite vertex coordinates");
  }
  for (size_t t = 0; t < triangles.size(); ++t) {
    for (auto idx : triangles[t]) {
      if (idx >= vertices.size()) {
        throw InvalidInput("mesh triangle " + std::to_string(t) + " references vertex " +
                           std::to_string(idx + 1) + " of " + std::to_string(vertices.size()));
      }
    }
    if (!(triangle_area(t) > 1e-12)) throw InvalidInput("mesh triangle " + std::to_string(t) + " is degenerate");
  }
}

TriMesh parse_mesh(std::istream& in) {
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  std::vector<int> face_lines;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("malformed vertex", line_no);
      if (!v.allFinite()) throw ParseError("non-finite vertex", line_no);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      Triangle tri{};
      std::string tok;
      int count = 0;
      while (ls >> tok) {
        if (count == 3) throw ParseError("only triangular faces are supported", line_no);
        // Accept `i`, `i/t`, `i//n` and `i/t/n`; only the position index matters.
        const std::string head = tok.substr(0, tok.find('/'));
        long idx = 0;
        try {
          size_t used = 0;
          idx = std::stol(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::logic_error&) {
          throw ParseError("malformed face index '" + tok + "'", line_no);
        }
        if (idx < 1) throw ParseError("face index must be >= 1", line_no);
        tri[count++] = static_cast<std::uint32_t>(idx - 1);
      }
      if (count != 3) throw ParseError("face needs exactly 3 indices", line_no);
      mesh.triangles.push_back(tri);
      face_lines.push_back(line_no);
    }
  }
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (auto idx : mesh.triangles[t]) {
      if (idx >= mesh.vertices.size()) {
        throw ParseError("face references vertex " + std::to_string(idx + 1) + " but only " +
                             std::to_string(mesh.vertices.size()) + " exist",
                         face_lines[t]);
      }
    }
  }
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mesh " + path.string());
  try {
    return parse_mesh(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.line());
  }
}

void write_mesh(std::ostream& out, const TriMesh& mesh) {
  for (const auto& v : mesh.vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write mesh " + path.string());
  write_mesh(out, mesh);
}

TriMesh transform_mesh(const TriMesh& mesh, const RigidTransform& g) {
  TriMesh out;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(g.apply(v));
  return out;
}

TriMesh merge_meshes(const std::vector<TriMesh>& parts) {
  TriMesh out;
  for (const auto& part : parts) {
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& t : part.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

PointCloud sample_surface(const TriMesh& mesh, size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw InvalidInput("sample_surface: empty mesh");
  if (n == 0) throw InvalidInput("sample_surface: need at least one sample");

  const size_t tri_count = mesh.triangles.size();
  std::vector<double> areas(tri_count);
  for (size_t t = 0; t < tri_count; ++t) areas[t] = mesh.triangle_area(t);
  const double total = std::accumulate(areas.begin(), areas.end(), 0.0);

  // Deterministic floor(n * a_i / A) per triangle, remainder drawn by residual.
  std::vector<size_t> counts(tri_count);
  std::vector<double> residual(tri_count);
  size_t assigned = 0;
  for (size_t t = 0; t < tri_count; ++t) {
    const double exact = static_cast<double>(n) * areas[t] / total;
    counts[t] = static_cast<size_t>(std::floor(exact));
    residual[t] = exact - static_cast<double>(counts[t]);
    assigned += counts[t];
  }
  std::mt19937_64 rng(seed);
  if (assigned < n) {
    std::discrete_distribution<size_t> pick(residual.begin(), residual.end());
    for (size_t r = assigned; r < n; ++r) ++counts[pick(rng)];
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.normals.reserve(n);
  for (size_t t = 0; t < tri_count; ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    const Vec3 normal = mesh.triangle_normal(t);
    for (size_t i = 0; i < counts[t]; ++i) {
      const double s = std::sqrt(unit(rng));
      const double r2 = unit(rng);
      cloud.points.push_back((1.0 - s) * a + s * (1.0 - r2) * b + s * r2 * c);
      cloud.normals.push_back(normal);
    }
  }
  return cloud;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

struct Candidate {
  double dist_sq = std::numeric_limits<double>::infinity();
  size_t triangle = 0;
  Vec3 point = Vec3::Zero();

  void offer(const Vec3& p, const TriMesh& mesh, size_t t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const double d = (p - q).squaredNorm();
    if (d < dist_sq || (d == dist_sq && t < triangle)) {
      dist_sq = d;
      triangle = t;
      point = q;
    }
  }

  ClosestPoint result() const { return {std::sqrt(dist_sq), triangle, point}; }
};

}  // namespace

ClosestPoint point_to_mesh_distance(const Vec3& p, const TriMesh& mesh) {
  if (mesh.empty()) throw InvalidInput("point_to_mesh_distance: empty mesh");
  Candidate best;
  for (size_t t = 0; t < mesh.triangles.size(); ++t) best.offer(p, mesh, t);
  return best.result();
}

MeshDistanceIndex::MeshDistanceIndex(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.empty()) throw InvalidInput("MeshDistanceIndex: empty mesh");
  const size_t n = mesh.triangles.size();
  std::vector<Vec3> centroids(n);
  for (size_t t = 0; t < n; ++t) {
    const auto& tri = mesh.triangles[t];
    centroids[t] = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * n);
  build(0, static_cast<std::uint32_t>(n), centroids);
}

std::uint32_t MeshDistanceIndex::build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids) {
  constexpr std::uint32_t kLeafSize = 4;
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();

  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& tri = mesh_->triangles[order_[i]];
    for (auto v : tri) box.extend(mesh_->vertices[v]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }

  Eigen::Index axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

ClosestPoint MeshDistanceIndex::query(const Vec3& p) const {
  Candidate best;
  std::vector<std::uint32_t> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.box.squaredExteriorDistance(p) > best.dist_sq) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) best.offer(p, *mesh_, order_[i]);
      continue;
    }
    const double dl = nodes_[node.first].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Push the farther child first so the nearer one is explored first.
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.first);
    } else {
      stack.push_back(node.first);
      stack.push_back(node.right);
    }
  }
  return best.result();
}

ShapeDatabase::ShapeDatabase(std::vector<ShapeEntry> entries) : entries_(std::move(entries)) {
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.id != static_cast<int>(i) + 1) {
      throw InvalidInput("shape database ids must be dense 1..K in order; found id " + std::to_string(e.id) +
                         " at position " + std::to_string(i + 1));
    }
    if (e.mesh.empty()) throw InvalidInput("shape " + std::to_string(e.id) + " has an empty mesh");
    e.mesh.validate();
    if (e.mesh.triangles.size() > 7500) {
      spdlog::warn("shape {} ('{}') has {} faces; database meshes are expected around 5000", e.id, e.name,
                   e.mesh.triangles.size());
    }
  }
}

const ShapeEntry& ShapeDatabase::shape(int id) const {
  if (!contains(id)) throw InvalidInput("unknown shape id " + std::to_string(id));
  return entries_[static_cast<size_t>(id - 1)];
}

std::vector<int> ShapeDatabase::shapes_in_category(int category) const {
  std::vector<int> ids;
  for (const auto& e : entries_) {
    if (e.category == category) ids.push_back(e.id);
  }
  return ids;
}

ShapeDatabase ShapeDatabase::load(const std::filesystem::path& manifest) {
  const Json doc = read_json(manifest);
  if (!doc.contains("shapes") || !doc["shapes"].is_array()) {
    throw DataError("database manifest " + manifest.string() + " lacks a 'shapes' array");
  }
  std::vector<ShapeEntry> entries;
  try {
    for (const auto& s : doc["shapes"]) {
      ShapeEntry e;
      e.id = s.at("id").get<int>();
      e.category = s.at("category").get<int>();
      e.name = s.value("name", std::string{});
      e.mesh = load_mesh(manifest.parent_path() / s.at("mesh").get<std::string>());
      entries.push_back(std::move(e));
    }
  } catch (const Json::exception& ex) {
    throw DataError("database manifest " + manifest.string() + ": " + ex.what());
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  try {
    return ShapeDatabase(std::move(entries));
  } catch (const InvalidInput& ex) {
    throw DataError(ex.what());
  }
}

void ShapeDatabase::save(const std::filesystem::path& manifest) const {
  Json shapes = Json::array();
  for (const auto& e : entries_) {
    const std::string file = "shape_" + std::to_string(e.id) + ".obj";
    save_mesh(e.mesh, manifest.parent_path() / file);
    shapes.push_back({{"id", e.id}, {"category", e.category}, {"mesh", file}, {"name", e.name}});
  }
  write_json(manifest, Json{{"shapes", shapes}});
}

}  // namespace semap
