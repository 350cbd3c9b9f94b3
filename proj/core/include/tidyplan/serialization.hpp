#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tidyplan/world.hpp"

namespace tidy {

using Json = nlohmann::json;

void to_json(Json& j, const Workspace& ws);
void from_json(const Json& j, Workspace& ws);
void to_json(Json& j, const ObjectInstance& o);
void from_json(const Json& j, ObjectInstance& o);
void to_json(Json& j, const Scene& s);
void from_json(const Json& j, Scene& s);
void to_json(Json& j, const ActionSpec& a);
void from_json(const Json& j, ActionSpec& a);

Json read_json_file(const std::filesystem::path& path);
/// Writes with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& doc);
/// Reads newline-delimited JSON, skipping blank lines.
std::vector<Json> read_ndjson(const std::filesystem::path& path);

Scene load_scene(const std::filesystem::path& path);

}  // namespace tidy
