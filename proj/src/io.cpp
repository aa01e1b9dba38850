#include "semap/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace semap {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

Vec3 vec3_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected a 3-element array");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json transform_to_json(const RigidTransform& g) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({g.rotation(r, 0), g.rotation(r, 1), g.rotation(r, 2)}));
  return {{"rotation", rows}, {"translation", vec3_to_json(g.translation)}};
}

RigidTransform transform_from_json(const Json& j) {
  RigidTransform g;
  try {
    const auto& rows = j.at("rotation");
    if (!rows.is_array() || rows.size() != 3) throw DataError("transform rotation must be 3x3");
    for (int r = 0; r < 3; ++r) {
      if (!rows[r].is_array() || rows[r].size() != 3) throw DataError("transform rotation must be 3x3");
      for (int c = 0; c < 3; ++c) g.rotation(r, c) = rows[r][c].get<double>();
    }
    const auto& t = j.at("translation");
    if (!t.is_array() || t.size() != 3) throw DataError("transform translation must have 3 entries");
    for (int i = 0; i < 3; ++i) g.translation[i] = t[i].get<double>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("bad transform: ") + e.what());
  }
  if (!g.is_valid(1e-6)) throw DataError("transform rotation is not a valid rotation");
  return g;
}

std::vector<TimedPose> load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory " + path.string());
  std::vector<TimedPose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) throw ParseError("malformed trajectory record", line_no);
    const Quat q(qw, qx, qy, qz);
    if (std::abs(q.norm() - 1.0) > 1e-3) throw ParseError("trajectory quaternion is not unit length", line_no);
    poses.push_back({t, q, Vec3(tx, ty, tz)});
  }
  return poses;
}

void save_trajectory(const std::filesystem::path& path, const std::vector<TimedPose>& poses) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trajectory " + path.string());
  for (const auto& p : poses) {
    const Quat& q = p.orientation;
    const Vec3& t = p.position;
    out << format_double(p.timestamp) << ' ' << format_double(t.x()) << ' ' << format_double(t.y()) << ' '
        << format_double(t.z()) << ' ' << format_double(q.x()) << ' ' << format_double(q.y()) << ' '
        << format_double(q.z()) << ' ' << format_double(q.w()) << '\n';
  }
}

}  // namespace semap
