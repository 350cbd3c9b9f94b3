#include "tidyplan/serialization.hpp"

#include <fstream>

namespace tidy {

void to_json(Json& j, const Workspace& ws) {
  j = Json{{"width_m", ws.width_m},
           {"depth_m", ws.depth_m},
           {"grid_h", ws.grid_h},
           {"grid_w", ws.grid_w},
           {"rotation_bins", ws.rotation_bins}};
}

void from_json(const Json& j, Workspace& ws) {
  ws.width_m = j.at("width_m").get<double>();
  ws.depth_m = j.at("depth_m").get<double>();
  ws.grid_h = j.at("grid_h").get<int>();
  ws.grid_w = j.at("grid_w").get<int>();
  ws.rotation_bins = j.at("rotation_bins").get<int>();
  ws.validate();
}

void to_json(Json& j, const ObjectInstance& o) {
  j = Json{{"id", o.id},
           {"category", o.category},
           {"half_extents", {o.half_extents.x, o.half_extents.y}},
           {"pose", {{"x", o.pose.x}, {"y", o.pose.y}, {"theta", o.pose.theta}}},
           {"is_support", o.is_support}};
}

void from_json(const Json& j, ObjectInstance& o) {
  o.id = j.at("id").get<int>();
  o.category = j.at("category").get<std::string>();
  const auto& he = j.at("half_extents");
  o.half_extents = {he.at(0).get<double>(), he.at(1).get<double>()};
  const auto& p = j.at("pose");
  o.pose = {p.at("x").get<double>(), p.at("y").get<double>(),
            p.at("theta").get<double>()};
  o.is_support = j.value("is_support", false);
}

void to_json(Json& j, const Scene& s) {
  j = Json{{"workspace", s.workspace},
           {"environment_tag", std::string(to_string(s.environment))},
           {"objects", s.objects}};
}

void from_json(const Json& j, Scene& s) {
  s.workspace = j.at("workspace").get<Workspace>();
  s.environment = parse_environment(j.value("environment_tag", "mixed"));
  s.objects = j.at("objects").get<std::vector<ObjectInstance>>();
  s.validate();
}

void to_json(Json& j, const ActionSpec& a) {
  j = Json{{"object_id", a.object_id},
           {"cell", {a.x_idx, a.y_idx}},
           {"rotation_bin", a.rotation_bin}};
}

void from_json(const Json& j, ActionSpec& a) {
  a.object_id = j.at("object_id").get<int>();
  a.x_idx = j.at("cell").at(0).get<int>();
  a.y_idx = j.at("cell").at(1).get<int>();
  a.rotation_bin = j.at("rotation_bin").get<int>();
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::vector<Json> read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Scene load_scene(const std::filesystem::path& path) {
  try {
    return read_json_file(path).get<Scene>();
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace tidy
