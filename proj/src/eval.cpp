#include "semap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "semap/parallel.hpp"

namespace semap {

SceneMesh assemble_scene(std::span<const PosedShape> parts, const ShapeDatabase& db) {
  SceneMesh scene;
  std::vector<TriMesh> meshes;
  for (const auto& p : parts) {
    if (!db.contains(p.shape)) {
      throw InvalidInput("scene references shape " + std::to_string(p.shape) + " missing from the database");
    }
    scene.components.push_back(p);
    meshes.push_back(transform_mesh(db.shape(p.shape).mesh, p.pose));
  }
  scene.mesh = merge_meshes(meshes);
  return scene;
}

SceneMesh assemble_scene(const FrameEstimate& frame, const ShapeDatabase& db) {
  std::vector<PosedShape> parts;
  for (const auto& o : frame.objects) {
    if (o.status == TrackStatus::lost) continue;
    parts.push_back({o.id, o.shape, o.inertial});
  }
  return assemble_scene(parts, db);
}

namespace {

void check_source(const PointCloud& source) {
  if (source.size() < 3) throw InvalidInput("icp: need at least 3 source points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : source.points) mean += p;
  mean /= static_cast<double>(source.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : source.points) cov += (p - mean) * (p - mean).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov);
  const Vec3 s = svd.singularValues();
  if (!(s[0] > 0.0) || s[1] <= 1e-12 * s[0]) throw InvalidInput("icp: degenerate (collinear) source");
}

// Closed-form update from paired points.
RigidTransform solve_update(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const IcpOptions& opts) {
  const double n = static_cast<double>(p.size());
  Vec3 pm = Vec3::Zero(), qm = Vec3::Zero();
  for (size_t i = 0; i < p.size(); ++i) {
    pm += p[i];
    qm += q[i];
  }
  pm /= n;
  qm /= n;

  RigidTransform d;
  if (opts.mode == IcpMode::full) {
    Mat3 h = Mat3::Zero();
    for (size_t i = 0; i < p.size(); ++i) h += (p[i] - pm) * (q[i] - qm).transpose();
    const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU(), v = svd.matrixV();
    Mat3 fix = Mat3::Identity();
    fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    d.rotation = v * fix * u.transpose();
  } else {
    const Vec3 g = opts.gravity.vector();
    double a = 0.0, b = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      const Vec3 pc = p[i] - pm, qc = q[i] - qm;
      a += pc.dot(qc) - g.dot(pc) * g.dot(qc);
      b += qc.dot(g.cross(pc));
    }
    d.rotation = rodrigues(opts.gravity, std::atan2(b, a));
  }
  d.translation = qm - d.rotation * pm;
  return d;
}

template <typename Nearest>
IcpResult run_icp(const PointCloud& source, const IcpOptions& opts, Nearest&& nearest) {
  check_source(source);
  if (opts.max_iterations < 1) throw InvalidInput("icp: max_iterations must be >= 1");
  if (!opts.init.is_valid(1e-6)) throw InvalidInput("icp: init is not a rigid transform");
  if (opts.mode == IcpMode::gravity_constrained) {
    const Vec3 g = opts.gravity.vector();
    if ((opts.init.rotation * g - g).norm() > 1e-9) {
      throw InvalidInput("icp: constrained mode needs an init rotation about gravity");
    }
  }

  const size_t n = source.size();
  std::vector<Vec3> moved(n), matched(n);
  auto evaluate = [&](const RigidTransform& t) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      moved[i] = t.apply(source.points[i]);
      matched[i] = nearest(moved[i]);
      sum += (moved[i] - matched[i]).squaredNorm();
    }
    return sum / static_cast<double>(n);
  };

  IcpResult r;
  r.transform = opts.init;
  double e = evaluate(r.transform);
  r.objective.push_back(e);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const RigidTransform next = solve_update(moved, matched, opts) * r.transform;
    const double e_next = evaluate(next);
    if (e_next > e * (1.0 + 1e-12) + 1e-24) {
      throw NumericalError("icp: objective increased from " + format_double(e) + " to " + format_double(e_next));
    }
    r.transform = next;
    r.objective.push_back(e_next);
    r.iterations = it;
    if (e - e_next < opts.tolerance) break;
    e = e_next;
  }
  return r;
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const TriMesh& target, const IcpOptions& opts) {
  if (target.empty()) throw InvalidInput("icp: empty target mesh");
  const MeshDistanceIndex index(target);
  return run_icp(source, opts, [&](const Vec3& p) { return index.query(p).point; });
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpOptions& opts) {
  if (target.size() == 0) throw InvalidInput("icp: empty target cloud");
  return run_icp(source, opts, [&](const Vec3& p) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < target.size(); ++j) {
      const double d = (target.points[j] - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return target.points[best];
  });
}

SurfaceErrorStats summarize(std::vector<double> d) {
  if (d.empty()) throw InvalidInput("summarize: no distances");
  SurfaceErrorStats s;
  const size_t n = d.size();
  double sum = 0.0;
  for (double v : d) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (double v : d) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(n));
  std::sort(d.begin(), d.end());
  s.median = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return s;
}

SurfaceErrorResult surface_error(const SceneMesh& estimated, const TriMesh& ground_truth,
                                 const SurfaceErrorOptions& opts) {
  if (estimated.mesh.empty() || ground_truth.empty()) throw InvalidInput("surface_error: empty scene");
  if (opts.samples == 0) throw InvalidInput("surface_error: need at least one sample");
  PointCloud cloud = sample_surface(estimated.mesh, opts.samples, opts.seed);

  SurfaceErrorResult result;
  const MeshDistanceIndex index(ground_truth);
  if (opts.align) {
    result.alignment = run_icp(cloud, opts.icp, [&](const Vec3& p) { return index.query(p).point; });
    for (auto& p : cloud.points) p = result.alignment->transform.apply(p);
  }
  std::vector<double> d(cloud.size());
  parallel_for(cloud.size(), opts.threads, [&](size_t i, size_t) { d[i] = index.query(cloud.points[i]).distance; });
  result.stats = summarize(std::move(d));
  return result;
}

PoseError pose_error(const RigidTransform& est, const RigidTransform& gt) {
  return {(gt.translation - est.translation).norm(), rotation_angle(est.rotation.transpose() * gt.rotation)};
}

EvalReport evaluate(std::span<const FrameEstimate> frames, std::span<const PosedShape> ground_truth,
                    const ShapeDatabase& db, const SurfaceErrorOptions& opts) {
  EvalReport report;
  for (const auto& g : ground_truth) {
    ObjectReport o;
    o.gt_id = g.object_id;
    o.gt_shape = g.shape;
    report.objects.push_back(o);
  }
  if (frames.empty()) return report;

  const FrameEstimate& last = frames.back();
  std::vector<const ObjectEstimate*> live;
  for (const auto& e : last.objects) {
    if (e.status != TrackStatus::lost) live.push_back(&e);
  }
  report.estimated_objects = static_cast<int>(live.size());

  struct Pair {
    double dist;
    size_t gt, est;
  };
  std::vector<Pair> pairs;
  for (size_t g = 0; g < ground_truth.size(); ++g) {
    for (size_t e = 0; e < live.size(); ++e) {
      pairs.push_back({(ground_truth[g].pose.translation - live[e]->inertial.translation).norm(), g, e});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  std::vector<bool> gt_used(ground_truth.size(), false), est_used(live.size(), false);
  for (const auto& p : pairs) {
    if (gt_used[p.gt] || est_used[p.est]) continue;
    gt_used[p.gt] = est_used[p.est] = true;
    ObjectReport& o = report.objects[p.gt];
    const ObjectEstimate& e = *live[p.est];
    o.estimate_id = e.id;
    o.estimate_shape = e.shape;
    o.shape_correct = e.shape == o.gt_shape;
    o.final_error = pose_error(e.inertial, ground_truth[p.gt].pose);

    PoseError sum;
    for (const auto& f : frames) {
      for (const auto& fe : f.objects) {
        if (fe.id != e.id) continue;
        const PoseError pe = pose_error(fe.inertial, ground_truth[p.gt].pose);
        sum.translational += pe.translational;
        sum.rotational += pe.rotational;
        ++o.frames_tracked;
      }
    }
    if (o.frames_tracked > 0) {
      o.mean_error = PoseError{sum.translational / o.frames_tracked, sum.rotational / o.frames_tracked};
    }
  }

  const SceneMesh est_scene = assemble_scene(last, db);
  if (!est_scene.empty() && !ground_truth.empty()) {
    const SceneMesh gt_scene = assemble_scene(ground_truth, db);
    report.surface = surface_error(est_scene, gt_scene.mesh, opts).stats;
  }
  return report;
}

namespace {

Json pose_error_json(const PoseError& e) {
  return {{"translational_m", e.translational}, {"rotational_deg", to_degrees(e.rotational)}};
}

}  // namespace

Json eval_report_to_json(const EvalReport& r) {
  Json objects = Json::array();
  for (const auto& o : r.objects) {
    objects.push_back({
        {"gt_id", o.gt_id},
        {"gt_shape", o.gt_shape},
        {"estimate_id", o.estimate_id ? Json(*o.estimate_id) : Json(nullptr)},
        {"estimate_shape", o.estimate_id ? Json(o.estimate_shape) : Json(nullptr)},
        {"shape_correct", o.shape_correct},
        {"final", o.estimate_id ? pose_error_json(o.final_error) : Json(nullptr)},
        {"frame_mean", o.mean_error ? pose_error_json(*o.mean_error) : Json(nullptr)},
        {"frames_tracked", o.frames_tracked},
    });
  }
  Json surface = nullptr;
  if (r.surface) {
    surface = {{"median_m", r.surface->median},
               {"mean_m", r.surface->mean},
               {"std_m", r.surface->std},
               {"max_m", r.surface->max}};
  }
  return {{"surface_error", surface}, {"estimated_objects", r.estimated_objects}, {"objects", objects}};
}

std::string eval_report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "gt_id,gt_shape,estimate_id,estimate_shape,shape_correct,final_translational_m,final_rotational_deg,"
         "mean_translational_m,mean_rotational_deg,frames_tracked,surface_median_m,surface_mean_m,surface_std_m,"
         "surface_max_m\n";
  auto opt = [](bool has, double v) { return has ? format_double(v) : std::string(); };
  for (const auto& o : r.objects) {
    out << o.gt_id << ',' << o.gt_shape << ',' << (o.estimate_id ? std::to_string(*o.estimate_id) : "") << ','
        << (o.estimate_id ? std::to_string(o.estimate_shape) : "") << ',' << (o.shape_correct ? 1 : 0) << ','
        << opt(o.estimate_id.has_value(), o.final_error.translational) << ','
        << opt(o.estimate_id.has_value(), to_degrees(o.final_error.rotational)) << ','
        << opt(o.mean_error.has_value(), o.mean_error ? o.mean_error->translational : 0.0) << ','
        << opt(o.mean_error.has_value(), o.mean_error ? to_degrees(o.mean_error->rotational) : 0.0) << ','
        << o.frames_tracked << ',' << opt(r.surface.has_value(), r.surface ? r.surface->median : 0.0) << ','
        << opt(r.surface.has_value(), r.surface ? r.surface->mean : 0.0) << ','
        << opt(r.surface.has_value(), r.surface ? r.surface->std : 0.0) << ','
        << opt(r.surface.has_value(), r.surface ? r.surface->max : 0.0) << '\n';
  }
  return out.str();
}

}  // namespace semap
