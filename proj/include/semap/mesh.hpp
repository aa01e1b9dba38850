#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "semap/geometry.hpp"

namespace semap {

using Triangle = std::array<std::uint32_t, 3>;

/// Triangle mesh in an object-centric canonical frame (meters).
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  double triangle_area(size_t t) const;
  Vec3 triangle_normal(size_t t) const;
  double surface_area() const;

  /// Throws InvalidInput on out-of-range indices, non-finite coordinates, or
  /// degenerate triangles (area <= 1e-12 m^2).
  void validate() const;

  bool operator==(const TriMesh&) const = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or one per point

  size_t size() const { return points.size(); }
};

// Wavefront-style ASCII: `v x y z` and `f i j k` (1-based); other lines ignored.
TriMesh parse_mesh(std::istream& in);
TriMesh load_mesh(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const TriMesh& mesh);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

TriMesh transform_mesh(const TriMesh& mesh, const RigidTransform& g);
/// Concatenates meshes, re-indexing triangles.
TriMesh merge_meshes(const std::vector<TriMesh>& parts);

/// Area-weighted surface samples with stratified per-triangle allocation.
/// Normals are the source triangle normals.
PointCloud sample_surface(const TriMesh& mesh, size_t n, std::uint64_t seed);

struct ClosestPoint {
  double distance = 0.0;
  size_t triangle = 0;
  Vec3 point = Vec3::Zero();
};

/// Closest point on triangle abc to p (face, edge or vertex region).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Exact Euclidean point-to-mesh distance by exhaustive search. Ties resolve
/// to the lowest triangle index.
ClosestPoint point_to_mesh_distance(const Vec3& p, const TriMesh& mesh);

/// Bounding-volume hierarchy over a mesh's triangles. Queries return exactly
/// what point_to_mesh_distance returns. The mesh must outlive the index.
class MeshDistanceIndex {
 public:
  explicit MeshDistanceIndex(const TriMesh& mesh);

  ClosestPoint query(const Vec3& p) const;
  const TriMesh& mesh() const { return *mesh_; }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t first = 0;  // leaf: offset into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids);

  const TriMesh* mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct ShapeEntry {
  int id = 0;
  int category = 0;
  std::string name;
  TriMesh mesh;
};

/// Fixed dictionary of K shapes with the deterministic shape -> category map.
class ShapeDatabase {
 public:
  ShapeDatabase() = default;
  /// Entries must carry ids 1..K in order; every mesh must validate.
  explicit ShapeDatabase(std::vector<ShapeEntry> entries);

  /// JSON manifest: {"shapes": [{"id", "category", "mesh", "name"}]}; mesh
  /// paths are relative to the manifest's directory.
  static ShapeDatabase load(const std::filesystem::path& manifest);
  /// Writes the manifest plus one mesh file per shape next to it.
  void save(const std::filesystem::path& manifest) const;

  size_t size() const { return entries_.size(); }
  bool contains(int id) const { return id >= 1 && id <= static_cast<int>(entries_.size()); }
  const ShapeEntry& shape(int id) const;
  int category_of(int id) const { return shape(id).category; }
  std::vector<int> shapes_in_category(int category) const;
  const std::vector<ShapeEntry>& entries() const { return entries_; }

 private:
  std::vector<ShapeEntry> entries_;
};

}  // namespace semap
