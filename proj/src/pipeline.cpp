#include "semap/pipeline.hpp"

#include <cstdio>
#include <ostream>

namespace semap {

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename Fn>
void as_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

FilterConfig filter_config_from_json(const Json& j) {
  const std::string w = "filter";
  reject_unknown_keys(j,
                      {"particles", "diffusion", "init", "weights", "edge", "persistence", "persistence_iou",
                       "explain_iou", "ess_resampling", "lost_after", "threads"},
                      w);
  FilterConfig c;
  read_field(j, "particles", c.particles, w);
  read_field(j, "persistence", c.persistence, w);
  read_field(j, "persistence_iou", c.persistence_iou, w);
  read_field(j, "explain_iou", c.explain_iou, w);
  read_field(j, "ess_resampling", c.ess_resampling, w);
  read_field(j, "lost_after", c.lost_after, w);
  read_field(j, "threads", c.threads, w);
  if (j.contains("diffusion")) {
    const Json& d = j.at("diffusion");
    const std::string wd = w + ".diffusion";
    reject_unknown_keys(d, {"sigma_x", "sigma_y", "sigma_log_depth", "sigma_azimuth", "p_stay", "anneal", "anneal_floor"},
                        wd);
    read_field(d, "sigma_x", c.diffusion.sigma_x, wd);
    read_field(d, "sigma_y", c.diffusion.sigma_y, wd);
    read_field(d, "sigma_log_depth", c.diffusion.sigma_log_depth, wd);
    read_field(d, "sigma_azimuth", c.diffusion.sigma_azimuth, wd);
    read_field(d, "p_stay", c.diffusion.p_stay, wd);
    read_field(d, "anneal", c.diffusion.anneal, wd);
    read_field(d, "anneal_floor", c.diffusion.anneal_floor, wd);
  }
  if (j.contains("init")) {
    const Json& d = j.at("init");
    const std::string wd = w + ".init";
    reject_unknown_keys(d, {"nominal_depth", "category_depth", "sigma_log_depth", "sigma_bearing"}, wd);
    read_field(d, "nominal_depth", c.init.nominal_depth, wd);
    read_field(d, "sigma_log_depth", c.init.sigma_log_depth, wd);
    read_field(d, "sigma_bearing", c.init.sigma_bearing, wd);
    if (d.contains("category_depth")) {
      const Json& cd = d.at("category_depth");
      if (!cd.is_object()) throw ConfigError(wd + ".category_depth: expected an object");
      for (const auto& [key, value] : cd.items()) {
        int cat = 0;
        try {
          cat = std::stoi(key);
        } catch (const std::exception&) {
          throw ConfigError(wd + ".category_depth: keys must be category ids");
        }
        if (!value.is_number()) throw ConfigError(wd + ".category_depth: depths must be numbers");
        c.init.category_depth[cat] = value.get<double>();
      }
    }
  }
  if (j.contains("weights")) {
    const Json& d = j.at("weights");
    reject_unknown_keys(d, {"alpha", "beta"}, w + ".weights");
    read_field(d, "alpha", c.weights.alpha, w + ".weights");
    read_field(d, "beta", c.weights.beta, w + ".weights");
  }
  if (j.contains("edge")) {
    const Json& d = j.at("edge");
    const std::string wd = w + ".edge";
    reject_unknown_keys(d, {"radius", "sigma", "threshold", "max_samples", "floor"}, wd);
    read_field(d, "radius", c.edge.radius, wd);
    read_field(d, "sigma", c.edge.sigma, wd);
    read_field(d, "threshold", c.edge.threshold, wd);
    read_field(d, "max_samples", c.edge.max_samples, wd);
    read_field(d, "floor", c.edge.floor, wd);
  }
  as_config_error([&] { c.validate(); });
  return c;
}

Json filter_config_to_json(const FilterConfig& c) {
  Json depth = Json::object();
  for (const auto& [cat, d] : c.init.category_depth) depth[std::to_string(cat)] = d;
  return {{"particles", c.particles},
          {"diffusion",
           {{"sigma_x", c.diffusion.sigma_x},
            {"sigma_y", c.diffusion.sigma_y},
            {"sigma_log_depth", c.diffusion.sigma_log_depth},
            {"sigma_azimuth", c.diffusion.sigma_azimuth},
            {"p_stay", c.diffusion.p_stay},
            {"anneal", c.diffusion.anneal},
            {"anneal_floor", c.diffusion.anneal_floor}}},
          {"init",
           {{"nominal_depth", c.init.nominal_depth},
            {"category_depth", depth},
            {"sigma_log_depth", c.init.sigma_log_depth},
            {"sigma_bearing", c.init.sigma_bearing}}},
          {"weights", {{"alpha", c.weights.alpha}, {"beta", c.weights.beta}}},
          {"edge",
           {{"radius", c.edge.radius},
            {"sigma", c.edge.sigma},
            {"threshold", c.edge.threshold},
            {"max_samples", c.edge.max_samples},
            {"floor", c.edge.floor}}},
          {"persistence", c.persistence},
          {"persistence_iou", c.persistence_iou},
          {"explain_iou", c.explain_iou},
          {"ess_resampling", c.ess_resampling},
          {"lost_after", c.lost_after},
          {"threads", c.threads}};
}

ShapeDatabase load_database(const std::string& ref) {
  if (ref.empty() || ref == "builtin") return default_shape_database();
  return ShapeDatabase::load(ref);
}

std::vector<FrameObservation> observations_from(const Sequence& seq) {
  std::vector<FrameObservation> out;
  for (size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& fr = seq.frames[f];
    FrameObservation o;
    o.index = static_cast<int>(f);
    o.timestamp = fr.pose.timestamp;
    o.camera = fr.pose.pose();
    o.gravity = seq.spec.gravity;
    o.proposals = fr.proposals;
    o.edges = fr.edges;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<FrameObservation> load_observations(const std::filesystem::path& dir, const SequenceManifest& m) {
  const auto poses = load_trajectory(dir / "trajectory.txt");
  if (static_cast<int>(poses.size()) != m.frames) {
    throw DataError("trajectory has " + std::to_string(poses.size()) + " poses but the manifest lists " +
                    std::to_string(m.frames) + " frames");
  }
  const auto proposals = read_proposals(dir / "proposals.jsonl");
  std::vector<FrameObservation> out(poses.size());
  for (size_t f = 0; f < poses.size(); ++f) {
    FrameObservation& o = out[f];
    o.index = static_cast<int>(f);
    o.timestamp = poses[f].timestamp;
    o.camera = poses[f].pose();
    o.gravity = m.gravity;
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", f);
    o.edges = read_edge_map(dir / "edges" / name);
    if (o.edges.width() != m.intrinsics.width || o.edges.height() != m.intrinsics.height) {
      throw DataError(std::string("edge map ") + name + " does not match the manifest intrinsics");
    }
  }
  for (const auto& p : proposals) {
    if (p.frame < 0 || p.frame >= static_cast<int>(out.size())) {
      throw DataError("proposal references frame " + std::to_string(p.frame) + " outside the sequence");
    }
    out[static_cast<size_t>(p.frame)].proposals.push_back(p);
  }
  return out;
}

std::map<int, std::vector<ReferenceBox>> oracle_references(const Sequence& seq) {
  std::map<int, std::vector<ReferenceBox>> out;
  for (size_t f = 0; f < seq.frames.size(); ++f) {
    auto& refs = out[static_cast<int>(f)];
    for (const auto& b : seq.frames[f].boxes) {
      refs.push_back({b.box, b.category});
    }
  }
  return out;
}

FilterRun run_filter(const SemanticFilter& filter, std::span<const FrameObservation> frames, const ShapeDatabase& db,
                     std::ostream* dump) {
  FilterRun run;
  for (const auto& obs : frames) {
    const StepReport report = filter.step(run.world, obs);
    run.states.push_back(snapshot_world(run.world, obs, report, db));
    if (dump) write_state_line(*dump, run.states.back());
  }
  return run;
}

Json world_summary(const FilterRun& run) {
  Json objects = Json::array();
  if (!run.states.empty()) objects = frame_estimate_to_json(run.states.back()).at("objects");
  return {{"frames", run.world.frames}, {"objects", objects}};
}

}  // namespace semap
