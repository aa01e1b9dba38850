#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "semap/geometry.hpp"
#include "semap/image.hpp"
#include "semap/mesh.hpp"

namespace semap {

/// Pinhole intrinsics. Pixel (i, j) spans [i, i+1) x [j, j+1); its center is
/// (i + 0.5, j + 0.5).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  Vec2 project(const Vec3& p_cam) const { return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy}; }
  /// Normalized camera coordinates of an image point.
  Vec2 normalize(const Vec2& uv) const { return {(uv.x() - cx) / fx, (uv.y() - cy) / fy}; }
  /// Same field of view at a different resolution.
  CameraIntrinsics resized(int new_width, int new_height) const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Axis-aligned rectangle in continuous pixel coordinates.
struct PixelBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool operator==(const PixelBox&) const = default;
};

/// Intersection over union; 0 when both boxes are empty.
double box_iou(const PixelBox& a, const PixelBox& b);

using Mask = Image<std::uint8_t>;

inline constexpr double kNearPlane = 0.01;
inline constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

struct RenderObject {
  int id = 0;  // > 0; 0 is reserved for background
  const TriMesh* mesh = nullptr;
  RigidTransform object_to_camera;
};

struct RenderBuffers {
  Image<double> depth;           // meters, +inf where empty
  Image<std::int32_t> instance;  // 0 = background
  Mask contour;                  // instance-id discontinuities (4-neighborhood)
  std::map<int, PixelBox> boxes; // tight bound of each object's contour pixels

  static RenderBuffers empty(int width, int height);
  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

/// Z-buffered render of all objects. Equal depths resolve to the lower id so
/// the result never depends on the order of `objects`.
RenderBuffers render_scene(const std::vector<RenderObject>& objects, const CameraIntrinsics& k);

/// Contour pixels owned by `id`. Unknown ids give an empty mask.
Mask visible_contour(const RenderBuffers& buffers, int id);
/// Pixels whose instance id is `id`.
Mask projection_mask(const RenderBuffers& buffers, int id);
double mask_iou(const Mask& a, const Mask& b);
/// Tight bound of the non-zero pixels of a mask.
std::optional<PixelBox> mask_bounds(const Mask& mask);

/// Depth of a single object over the pixel rectangle it can cover. Reusable
/// scratch for the per-particle render loop.
class ObjectRaster {
 public:
  void rasterize(const TriMesh& mesh, const RigidTransform& object_to_camera, const CameraIntrinsics& k);

  bool empty() const { return covered_ == 0; }
  int covered() const { return covered_; }
  int x0() const { return x0_; }
  int y0() const { return y0_; }
  int region_width() const { return w_; }
  int region_height() const { return h_; }
  /// Depth at image pixel (x, y); +inf outside the region or where uncovered.
  double depth(int x, int y) const {
    const int lx = x - x0_, ly = y - y0_;
    if (lx < 0 || ly < 0 || lx >= w_ || ly >= h_) return kEmptyDepth;
    return depth_[static_cast<size_t>(ly) * w_ + lx];
  }

 private:
  struct ScreenTri {
    Vec2 p[3];
    double inv_z[3];
  };

  std::vector<Vec3> cam_vertices_;
  std::vector<ScreenTri> tris_;
  std::vector<double> depth_;
  int x0_ = 0, y0_ = 0, w_ = 0, h_ = 0;
  int covered_ = 0;
};

struct ContourPoint {
  int x = 0;
  int y = 0;
  double nx = 0.0;  // unit normal from the Sobel gradient of the object mask;
  double ny = 0.0;  // zero when the gradient vanishes
  bool border = false;      // touches the image border
  bool silhouette = false;  // the object is in front across the discontinuity
};

/// What a single object looks like once composited over a set of occluders.
struct ObjectView {
  int visible_pixels = 0;
  std::optional<PixelBox> box;
  std::vector<ContourPoint> contour;  // row-major order
};

/// Composites `raster` (as object `id`) over `occluders` using the same depth
/// test as render_scene. The contour matches visible_contour() of the joint
/// render. `occluders` may be null for an empty scene.
ObjectView compose_view(const ObjectRaster& raster, int id, const RenderBuffers* occluders,
                        const CameraIntrinsics& k);

/// Sobel normals for the contour pixels of a binary object mask. Used when a
/// contour comes from a plain mask rather than a composited view.
std::vector<ContourPoint> contour_points(const Mask& contour, const Mask& object_mask);

// Debug images. Depth maps to 255 at `near` falling linearly to 1 at `far`,
// 0 where empty; instance ids are written modulo 256.
Gray8 depth_to_gray(const Image<double>& depth, double near, double far);
Gray8 instance_to_gray(const Image<std::int32_t>& instance);

}  // namespace semap
