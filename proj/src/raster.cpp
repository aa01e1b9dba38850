#include "semap/raster.hpp"

#include <algorithm>
#include <cmath>

namespace semap {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw InvalidInput("intrinsics: principal point must lie inside the image");
  }
}

CameraIntrinsics CameraIntrinsics::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  return {fx * sx, fy * sy, cx * sx, cy * sy, new_width, new_height};
}

double box_iou(const PixelBox& a, const PixelBox& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

RenderBuffers RenderBuffers::empty(int width, int height) {
  RenderBuffers b;
  b.depth = Image<double>(width, height, kEmptyDepth);
  b.instance = Image<std::int32_t>(width, height, 0);
  b.contour = Mask(width, height, 0);
  return b;
}

namespace {

// Signed doubled area of (a, b, p); positive when p is left of a->b in a
// y-down image, i.e. on the same side as the third vertex of a positive triangle.
inline double edge(const Vec2& a, const Vec2& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

// Tie-break for pixel centers exactly on an edge. Antisymmetric under edge
// reversal, so a shared edge belongs to exactly one of its two triangles.
inline bool owns_edge(const Vec2& a, const Vec2& b) {
  const double dy = b.y() - a.y();
  const double dx = b.x() - a.x();
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

inline bool inside(double w, bool owned) { return w > 0.0 || (w == 0.0 && owned); }

int clamp_floor(double v, int lo, int hi) {
  if (!(v > lo)) return lo;
  if (!(v < hi)) return hi;
  return static_cast<int>(std::floor(v));
}

int clamp_ceil(double v, int lo, int hi) {
  if (!(v > lo)) return lo;
  if (!(v < hi)) return hi;
  return static_cast<int>(std::ceil(v));
}

}  // namespace

void ObjectRaster::rasterize(const TriMesh& mesh, const RigidTransform& object_to_camera, const CameraIntrinsics& k) {
  cam_vertices_.resize(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) cam_vertices_[i] = object_to_camera.apply(mesh.vertices[i]);

  tris_.clear();
  covered_ = 0;
  auto emit = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    ScreenTri t;
    const Vec3* v[3] = {&a, &b, &c};
    for (int i = 0; i < 3; ++i) {
      t.p[i] = k.project(*v[i]);
      t.inv_z[i] = 1.0 / v[i]->z();
    }
    tris_.push_back(t);
  };

  // Clip each triangle against the near plane, then fan-triangulate.
  Vec3 poly[4];
  for (const auto& tri : mesh.triangles) {
    const Vec3* in[3] = {&cam_vertices_[tri[0]], &cam_vertices_[tri[1]], &cam_vertices_[tri[2]]};
    int n = 0;
    for (int i = 0; i < 3; ++i) {
      const Vec3& cur = *in[i];
      const Vec3& nxt = *in[(i + 1) % 3];
      const bool cur_in = cur.z() >= kNearPlane;
      const bool nxt_in = nxt.z() >= kNearPlane;
      if (cur_in) poly[n++] = cur;
      if (cur_in != nxt_in) {
        const double s = (kNearPlane - cur.z()) / (nxt.z() - cur.z());
        Vec3 x = cur + s * (nxt - cur);
        x.z() = kNearPlane;
        poly[n++] = x;
      }
    }
    if (n >= 3) emit(poly[0], poly[1], poly[2]);
    if (n == 4) emit(poly[0], poly[2], poly[3]);
  }

  // Region spanned by candidate pixel centers of all triangles.
  int rx0 = k.width, ry0 = k.height, rx1 = -1, ry1 = -1;
  for (const auto& t : tris_) {
    const double umin = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double umax = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double vmin = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const double vmax = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const int i0 = clamp_ceil(umin - 0.5, 0, k.width), i1 = clamp_floor(umax - 0.5, -1, k.width - 1);
    const int j0 = clamp_ceil(vmin - 0.5, 0, k.height), j1 = clamp_floor(vmax - 0.5, -1, k.height - 1);
    if (i0 > i1 || j0 > j1) continue;
    rx0 = std::min(rx0, i0);
    ry0 = std::min(ry0, j0);
    rx1 = std::max(rx1, i1);
    ry1 = std::max(ry1, j1);
  }
  if (rx1 < rx0 || ry1 < ry0) {
    x0_ = y0_ = w_ = h_ = 0;
    depth_.clear();
    return;
  }
  x0_ = rx0;
  y0_ = ry0;
  w_ = rx1 - rx0 + 1;
  h_ = ry1 - ry0 + 1;
  depth_.assign(static_cast<size_t>(w_) * h_, kEmptyDepth);

  for (auto t : tris_) {
    double area = edge(t.p[0], t.p[1], t.p[2].x(), t.p[2].y());
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) {
      std::swap(t.p[1], t.p[2]);
      std::swap(t.inv_z[1], t.inv_z[2]);
      area = -area;
    }
    const bool own0 = owns_edge(t.p[1], t.p[2]);
    const bool own1 = owns_edge(t.p[2], t.p[0]);
    const bool own2 = owns_edge(t.p[0], t.p[1]);
    const double umin = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double umax = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
    const double vmin = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const double vmax = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
    const int i0 = clamp_ceil(umin - 0.5, 0, k.width), i1 = clamp_floor(umax - 0.5, -1, k.width - 1);
    const int j0 = clamp_ceil(vmin - 0.5, 0, k.height), j1 = clamp_floor(vmax - 0.5, -1, k.height - 1);
    const double inv_area = 1.0 / area;
    for (int j = j0; j <= j1; ++j) {
      const double py = j + 0.5;
      // Conservative span of the row (one pixel of slack); membership is
      // still decided by the exact edge tests below.
      double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      bool empty_row = false;
      for (int e = 0; e < 3; ++e) {
        const Vec2& a = t.p[(e + 1) % 3];
        const Vec2& b = t.p[(e + 2) % 3];
        const double dy = b.y() - a.y();
        if (dy == 0.0) {
          if (edge(a, b, a.x(), py) < 0.0) empty_row = true;
          continue;
        }
        const double root = a.x() + (b.x() - a.x()) * (py - a.y()) / dy;
        if (dy < 0.0) {
          lo = std::max(lo, root);
        } else {
          hi = std::min(hi, root);
        }
      }
      if (empty_row) continue;
      const int ia = clamp_ceil(lo - 1.5, i0, i1 + 1);
      const int ib = clamp_floor(hi + 0.5, i0 - 1, i1);
      double* row = depth_.data() + static_cast<size_t>(j - y0_) * w_ - x0_;
      for (int i = ia; i <= ib; ++i) {
        const double px = i + 0.5;
        const double w0 = edge(t.p[1], t.p[2], px, py);
        if (!inside(w0, own0)) continue;
        const double w1 = edge(t.p[2], t.p[0], px, py);
        if (!inside(w1, own1)) continue;
        const double w2 = edge(t.p[0], t.p[1], px, py);
        if (!inside(w2, own2)) continue;
        const double inv_z = (w0 * t.inv_z[0] + w1 * t.inv_z[1] + w2 * t.inv_z[2]) * inv_area;
        const double z = 1.0 / inv_z;
        if (z < row[i]) {
          if (row[i] == kEmptyDepth) ++covered_;
          row[i] = z;
        }
      }
    }
  }
}

RenderBuffers render_scene(const std::vector<RenderObject>& objects, const CameraIntrinsics& k) {
  k.validate();
  RenderBuffers out = RenderBuffers::empty(k.width, k.height);
  ObjectRaster raster;
  for (const auto& obj : objects) {
    if (obj.id <= 0) throw InvalidInput("render_scene: object ids must be positive");
    if (obj.mesh == nullptr || obj.mesh->empty()) throw InvalidInput("render_scene: object mesh is empty");
    raster.rasterize(*obj.mesh, obj.object_to_camera, k);
    if (raster.empty()) continue;
    for (int y = raster.y0(); y < raster.y0() + raster.region_height(); ++y) {
      for (int x = raster.x0(); x < raster.x0() + raster.region_width(); ++x) {
        const double z = raster.depth(x, y);
        if (z == kEmptyDepth) continue;
        double& d = out.depth(x, y);
        std::int32_t& id = out.instance(x, y);
        if (z < d || (z == d && obj.id < id)) {
          d = z;
          id = obj.id;
        }
      }
    }
  }

  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const std::int32_t id = out.instance(x, y);
      if (id == 0) continue;
      const bool edge_px = x == 0 || y == 0 || x == k.width - 1 || y == k.height - 1 ||
                           out.instance(x - 1, y) != id || out.instance(x + 1, y) != id ||
                           out.instance(x, y - 1) != id || out.instance(x, y + 1) != id;
      if (!edge_px) continue;
      out.contour(x, y) = 1;
      auto [it, fresh] = out.boxes.try_emplace(id, PixelBox{double(x), double(y), x + 1.0, y + 1.0});
      if (!fresh) {
        PixelBox& b = it->second;
        b.x0 = std::min(b.x0, double(x));
        b.y0 = std::min(b.y0, double(y));
        b.x1 = std::max(b.x1, x + 1.0);
        b.y1 = std::max(b.y1, y + 1.0);
      }
    }
  }
  return out;
}

Mask visible_contour(const RenderBuffers& buffers, int id) {
  Mask m(buffers.width(), buffers.height(), 0);
  for (size_t i = 0; i < m.data().size(); ++i) {
    m.data()[i] = (buffers.contour.data()[i] && buffers.instance.data()[i] == id) ? 1 : 0;
  }
  return m;
}

Mask projection_mask(const RenderBuffers& buffers, int id) {
  Mask m(buffers.width(), buffers.height(), 0);
  for (size_t i = 0; i < m.data().size(); ++i) m.data()[i] = buffers.instance.data()[i] == id ? 1 : 0;
  return m;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw InvalidInput("mask_iou: size mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const bool pa = a.data()[i] != 0, pb = b.data()[i] != 0;
    inter += (pa && pb);
    uni += (pa || pb);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<PixelBox> mask_bounds(const Mask& mask) {
  std::optional<PixelBox> box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      if (!box) {
        box = PixelBox{double(x), double(y), x + 1.0, y + 1.0};
      } else {
        box->x0 = std::min(box->x0, double(x));
        box->y0 = std::min(box->y0, double(y));
        box->x1 = std::max(box->x1, x + 1.0);
        box->y1 = std::max(box->y1, y + 1.0);
      }
    }
  }
  return box;
}

namespace {

template <typename MaskFn>
Vec2 sobel(const MaskFn& m, int x, int y) {
  const double gx = (m(x + 1, y - 1) + 2.0 * m(x + 1, y) + m(x + 1, y + 1)) -
                    (m(x - 1, y - 1) + 2.0 * m(x - 1, y) + m(x - 1, y + 1));
  const double gy = (m(x - 1, y + 1) + 2.0 * m(x, y + 1) + m(x + 1, y + 1)) -
                    (m(x - 1, y - 1) + 2.0 * m(x, y - 1) + m(x + 1, y - 1));
  const Vec2 g(gx, gy);
  const double n = g.norm();
  return n > 0.0 ? Vec2(g / n) : Vec2::Zero();
}

}  // namespace

ObjectView compose_view(const ObjectRaster& raster, int id, const RenderBuffers* occluders, const CameraIntrinsics& k) {
  ObjectView view;
  if (raster.empty()) return view;
  if (occluders && (occluders->width() != k.width || occluders->height() != k.height)) {
    throw InvalidInput("compose_view: occluder buffers do not match the intrinsics");
  }

  // Visibility of this object over its region plus a one-pixel margin.
  const int ox = raster.x0() - 1, oy = raster.y0() - 1;
  const int lw = raster.region_width() + 2, lh = raster.region_height() + 2;
  std::vector<std::uint8_t> vis(static_cast<size_t>(lw) * lh, 0);
  auto occ_depth = [&](int x, int y) { return occluders ? occluders->depth(x, y) : kEmptyDepth; };
  auto occ_id = [&](int x, int y) { return occluders ? occluders->instance(x, y) : 0; };

  int bx0 = k.width, by0 = k.height, bx1 = -1, by1 = -1;
  for (int y = raster.y0(); y < raster.y0() + raster.region_height(); ++y) {
    for (int x = raster.x0(); x < raster.x0() + raster.region_width(); ++x) {
      const double z = raster.depth(x, y);
      if (z == kEmptyDepth) continue;
      const double od = occ_depth(x, y);
      if (z < od || (z == od && id < occ_id(x, y))) {
        vis[static_cast<size_t>(y - oy) * lw + (x - ox)] = 1;
        ++view.visible_pixels;
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x);
        by1 = std::max(by1, y);
      }
    }
  }
  if (view.visible_pixels == 0) return view;
  view.box = PixelBox{double(bx0), double(by0), bx1 + 1.0, by1 + 1.0};

  auto visible = [&](int x, int y) -> double {
    const int lx = x - ox, ly = y - oy;
    if (lx < 0 || ly < 0 || lx >= lw || ly >= lh) return 0.0;
    return vis[static_cast<size_t>(ly) * lw + lx];
  };

  // Neighbours of a visible pixel always fall inside the padded local grid.
  const std::ptrdiff_t step[4] = {-1, 1, -lw, lw};
  const int nbr[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (int y = by0; y <= by1; ++y) {
    const bool row_border = y == 0 || y == k.height - 1;
    for (int x = bx0; x <= bx1; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y - oy) * lw + (x - ox);
      if (!vis[idx]) continue;
      const bool border = row_border || x == 0 || x == k.width - 1;
      if (!border && vis[idx - 1] && vis[idx + 1] && vis[idx - lw] && vis[idx + lw]) continue;
      const double z = raster.depth(x, y);
      bool silhouette = false;
      for (int d = 0; d < 4; ++d) {
        if (vis[idx + step[d]]) continue;
        const int qx = x + nbr[d][0], qy = y + nbr[d][1];
        if (qx < 0 || qy < 0 || qx >= k.width || qy >= k.height) continue;
        if (occ_depth(qx, qy) > z) silhouette = true;
      }
      const Vec2 n = sobel(visible, x, y);
      view.contour.push_back({x, y, n.x(), n.y(), border, silhouette});
    }
  }
  return view;
}

std::vector<ContourPoint> contour_points(const Mask& contour, const Mask& object_mask) {
  auto m = [&](int x, int y) -> double { return object_mask.contains(x, y) && object_mask(x, y) ? 1.0 : 0.0; };
  std::vector<ContourPoint> pts;
  for (int y = 0; y < contour.height(); ++y) {
    for (int x = 0; x < contour.width(); ++x) {
      if (!contour(x, y)) continue;
      const Vec2 n = sobel(m, x, y);
      const bool border = x == 0 || y == 0 || x == contour.width() - 1 || y == contour.height() - 1;
      pts.push_back({x, y, n.x(), n.y(), border, true});
    }
  }
  return pts;
}

Gray8 depth_to_gray(const Image<double>& depth, double near, double far) {
  Gray8 g(depth.width(), depth.height(), 0);
  const double span = far > near ? far - near : 1.0;
  for (size_t i = 0; i < depth.data().size(); ++i) {
    const double d = depth.data()[i];
    if (!std::isfinite(d)) continue;
    const double s = std::clamp((d - near) / span, 0.0, 1.0);
    g.data()[i] = static_cast<std::uint8_t>(std::lround(255.0 - 254.0 * s));
  }
  return g;
}

Gray8 instance_to_gray(const Image<std::int32_t>& instance) {
  Gray8 g(instance.width(), instance.height(), 0);
  for (size_t i = 0; i < instance.data().size(); ++i) g.data()[i] = static_cast<std::uint8_t>(instance.data()[i] & 0xff);
  return g;
}

}  // namespace semap
