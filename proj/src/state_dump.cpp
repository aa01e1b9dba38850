#include "semap/state_dump.hpp"

#include <fstream>
#include <sstream>

namespace semap {

TrackStatus status_from_string(const std::string& s) {
  if (s == "initializing") return TrackStatus::initializing;
  if (s == "tracking") return TrackStatus::tracking;
  if (s == "lost") return TrackStatus::lost;
  throw DataError("unknown track status '" + s + "'");
}

FrameEstimate snapshot_world(const WorldState& world, const FrameObservation& obs, const StepReport& report,
                             const ShapeDatabase& db) {
  FrameEstimate f;
  f.frame = obs.index;
  f.timestamp = obs.timestamp;
  f.accepted = report.accepted;
  for (const auto& o : world.objects) {
    ObjectEstimate e;
    e.id = o.set.id;
    e.status = o.set.status;
    e.shape = o.mean.hypothesis.shape;
    e.category = db.category_of(e.shape);
    for (const auto& [k, w] : o.mean.shape_posterior) e.shape_posterior.emplace_back(k, w);
    e.pose = o.mean.hypothesis.pose;
    e.anchor = o.set.anchor;
    e.inertial = o.mean.hypothesis.inertial(obs.gravity);
    if (const auto it = report.ess.find(e.id); it != report.ess.end()) e.ess = it->second;
    f.objects.push_back(std::move(e));
  }
  return f;
}

Json frame_estimate_to_json(const FrameEstimate& f) {
  Json objects = Json::array();
  for (const auto& e : f.objects) {
    Json posterior = Json::array();
    for (const auto& [k, w] : e.shape_posterior) posterior.push_back({{"shape", k}, {"weight", w}});
    objects.push_back({
        {"id", e.id},
        {"status", to_string(e.status)},
        {"shape", e.shape},
        {"category", e.category},
        {"shape_posterior", posterior},
        {"pose",
         {{"x", e.pose.x}, {"y", e.pose.y}, {"log_depth", e.pose.log_depth}, {"azimuth", e.pose.azimuth}}},
        {"anchor", {{"frame", e.anchor.frame}, {"camera", transform_to_json(e.anchor.camera)}}},
        {"inertial", transform_to_json(e.inertial)},
        {"ess", e.ess ? Json(*e.ess) : Json(nullptr)},
    });
  }
  return {{"frame", f.frame}, {"timestamp", f.timestamp}, {"accepted", f.accepted}, {"objects", objects}};
}

FrameEstimate frame_estimate_from_json(const Json& j) {
  FrameEstimate f;
  f.frame = j.at("frame").get<int>();
  f.timestamp = j.at("timestamp").get<double>();
  f.accepted = j.at("accepted").get<bool>();
  for (const auto& o : j.at("objects")) {
    ObjectEstimate e;
    e.id = o.at("id").get<int>();
    e.status = status_from_string(o.at("status").get<std::string>());
    e.shape = o.at("shape").get<int>();
    e.category = o.at("category").get<int>();
    for (const auto& p : o.at("shape_posterior")) {
      e.shape_posterior.emplace_back(p.at("shape").get<int>(), p.at("weight").get<double>());
    }
    const auto& pose = o.at("pose");
    e.pose = {pose.at("x").get<double>(), pose.at("y").get<double>(), pose.at("log_depth").get<double>(),
              pose.at("azimuth").get<double>()};
    e.anchor.frame = o.at("anchor").at("frame").get<int>();
    e.anchor.camera = transform_from_json(o.at("anchor").at("camera"));
    e.inertial = transform_from_json(o.at("inertial"));
    if (!o.at("ess").is_null()) e.ess = o.at("ess").get<double>();
    f.objects.push_back(std::move(e));
  }
  return f;
}

void write_state_line(std::ostream& out, const FrameEstimate& f) { out << frame_estimate_to_json(f).dump() << '\n'; }

std::vector<FrameEstimate> read_state_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open state dump " + path.string());
  std::vector<FrameEstimate> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(frame_estimate_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const InvalidInput& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const DataError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace semap
