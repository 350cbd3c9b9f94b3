#include "tidyplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "tidyplan/ellipse.hpp"
#include "tidyplan/random.hpp"

namespace tidy {

double tidiness_label(int t, int T) {
  return static_cast<double>(t - 1) / static_cast<double>(T - 1);
}

namespace {

bool object_fits(const Scene& scene, std::size_t index) {
  const auto& obj = scene.objects[index];
  if (!footprint_in_bounds(scene.workspace, obj)) return false;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j != index && illegal_overlap(obj, scene.objects[j])) return false;
  }
  return true;
}

// Orientation uniform; center uniform over the region keeping the rotated
// footprint inside the workspace.
void draw_pose(Scene& scene, std::size_t index, Rng& rng) {
  auto& obj = scene.objects[index];
  const auto& ws = scene.workspace;
  obj.pose.theta = rng.uniform(0.0, 360.0);
  const double t = obj.pose.theta * std::numbers::pi / 180.0;
  const double ex = std::abs(std::cos(t)) * obj.half_extents.x +
                    std::abs(std::sin(t)) * obj.half_extents.y;
  const double ey = std::abs(std::sin(t)) * obj.half_extents.x +
                    std::abs(std::cos(t)) * obj.half_extents.y;
  obj.pose.x = ex < ws.width_m / 2.0 ? rng.uniform(ex, ws.width_m - ex)
                                     : rng.uniform(0.0, ws.width_m);
  obj.pose.y = ey < ws.depth_m / 2.0 ? rng.uniform(ey, ws.depth_m - ey)
                                     : rng.uniform(0.0, ws.depth_m);
}

}  // namespace

bool scatter_object(Scene& scene, std::size_t index, Rng& rng, int max_tries) {
  const Pose original = scene.objects[index].pose;
  for (int i = 0; i < max_tries; ++i) {
    draw_pose(scene, index, rng);
    if (object_fits(scene, index)) return true;
  }
  scene.objects[index].pose = original;
  return false;
}

Trajectory generate_trajectory(const Template& tmpl, int T, std::uint64_t rng_seed,
                               const AugmentSpec& augment) {
  if (T < 2) throw Error("trajectory length must be >= 2");
  TidiedScene tidied = sample_tidied_scene(tmpl, rng_seed, augment);
  Rng rng(derive_seed(rng_seed, hash_string(tmpl.id), 0x5ca77e5ULL));

  std::vector<Scene> reversed{tidied.scene};
  Scene current = tidied.scene;
  for (int step = 1; step < T; ++step) {
    const auto index = static_cast<std::size_t>(rng.below(current.objects.size()));
    const Pose original = current.objects[index].pose;
    bool placed = false;
    // Scattered scenes must be valid and must no longer satisfy the template,
    // so the tidied scene is the only label-1 state.
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      draw_pose(current, index, rng);
      placed = object_fits(current, index) &&
               !satisfies_template(current, tmpl, tidied.binding).satisfied;
    }
    if (!placed) {
      current.objects[index].pose = original;
      throw Error("scatter failed");
    }
    reversed.push_back(current);
  }

  Trajectory traj;
  traj.template_id = tmpl.id;
  traj.seed = rng_seed;
  traj.binding = tidied.binding;
  for (int t = 1; t <= T; ++t) {
    traj.steps.push_back({reversed[static_cast<std::size_t>(T - t)], tidiness_label(t, T)});
  }
  return traj;
}

std::vector<RLTransition> to_rl_transitions(const Trajectory& traj) {
  std::vector<RLTransition> out;
  if (traj.steps.size() < 2) throw Error("malformed trajectory");
  for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
    const Scene& cur = traj.steps[t].scene;
    const Scene& nxt = traj.steps[t + 1].scene;
    if (cur.objects.size() != nxt.objects.size()) throw Error("malformed trajectory");
    std::vector<std::size_t> moved;
    for (std::size_t i = 0; i < cur.objects.size(); ++i) {
      if (cur.objects[i].id != nxt.objects[i].id) throw Error("malformed trajectory");
      if (cur.objects[i].pose != nxt.objects[i].pose) moved.push_back(i);
    }
    if (moved.size() != 1) throw Error("malformed trajectory");
    const ObjectInstance& dest = nxt.objects[moved.front()];
    const auto [xi, yi] = cur.workspace.snap_cell(dest.center());
    RLTransition tr;
    tr.state = cur;
    tr.action = {dest.id, xi, yi, aligned_rotation_bin(dest, cur.workspace)};
    tr.next_state = nxt;
    tr.terminal = t + 2 == traj.steps.size();
    tr.reward = tr.terminal ? 1.0 : 0.0;
    out.push_back(std::move(tr));
  }
  return out;
}

std::string_view to_string(Split s) {
  return s == Split::train ? "train" : "validation";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  throw Error("unknown split: " + std::string(s));
}

bool TemplateSplit::is_train(const std::string& id) const {
  return std::find(train.begin(), train.end(), id) != train.end();
}

TemplateSplit split_templates(const std::vector<Template>& library, std::uint64_t seed) {
  if (library.empty()) throw Error("empty template library");
  std::map<EnvironmentTag, std::vector<std::string>> by_env;
  for (const auto& t : library) by_env[t.environment].push_back(t.id);
  TemplateSplit split;
  for (auto& [env, ids] : by_env) {
    if (ids.size() < 2) throw Error("cannot split");
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(env), 0x5b117ULL));
    // Fisher-Yates with the library's own integer mapping.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
      std::swap(ids[i], ids[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    const auto n = static_cast<double>(ids.size());
    auto n_train = static_cast<std::size_t>(std::lround(0.72 * n));
    n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.insert(split.validation.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

Dataset build_dataset(const std::vector<Template>& library, const DatasetConfig& config) {
  if (library.empty()) throw Error("empty template library");
  if (config.trajectories_per_template < 1) throw Error("need at least one trajectory per template");
  Dataset ds;
  ds.split = split_templates(library, config.seed);

  std::vector<const Template*> ordered;
  for (const auto& t : library) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const Template* a, const Template* b) { return a->id < b->id; });

  for (const Template* tmpl : ordered) {
    const Split split = ds.split.is_train(tmpl->id) ? Split::train : Split::validation;
    for (int k = 0; k < config.trajectories_per_template; ++k) {
      const std::uint64_t seed = derive_seed(config.seed, hash_string(tmpl->id),
                                             static_cast<std::uint64_t>(k));
      const Trajectory traj = generate_trajectory(*tmpl, config.T, seed, config.augment);
      for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        ds.disc.push_back({traj.steps[t].scene, traj.steps[t].label, split, tmpl->id,
                           static_cast<int>(t)});
      }
      for (auto& tr : to_rl_transitions(traj)) {
        ds.rl.push_back({std::move(tr), split, tmpl->id});
      }
    }
  }
  ds.report = compute_stats(ds.disc, config.T);
  return ds;
}

Json to_json(const DiscRecord& r) {
  return Json{{"scene", r.scene},
              {"label", r.label},
              {"split", std::string(to_string(r.split))},
              {"template_id", r.template_id},
              {"step", r.step}};
}

DiscRecord disc_record_from_json(const Json& j) {
  DiscRecord r;
  r.scene = j.at("scene").get<Scene>();
  r.label = j.at("label").get<double>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.template_id = j.value("template_id", "");
  r.step = j.value("step", 0);
  return r;
}

Json to_json(const RLRecord& r) {
  const auto& tr = r.transition;
  return Json{{"state", tr.state},
              {"action", tr.action},
              {"next_state", tr.next_state},
              {"reward", tr.reward},
              {"terminal", tr.terminal},
              {"split", std::string(to_string(r.split))},
              {"template_id", r.template_id}};
}

RLRecord rl_record_from_json(const Json& j) {
  RLRecord r;
  r.transition.state = j.at("state").get<Scene>();
  r.transition.action = j.at("action").get<ActionSpec>();
  r.transition.next_state = j.at("next_state").get<Scene>();
  r.transition.reward = j.at("reward").get<double>();
  r.transition.terminal = j.at("terminal").get<bool>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.template_id = j.value("template_id", "");
  return r;
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<Json>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& l : lines) out << l.dump() << '\n';
}

Json report_json(const std::map<std::string, EnvironmentCounts>& report) {
  Json j = Json::object();
  for (const auto& [env, c] : report) {
    j[env] = {{"objects", c.objects},
              {"templates", c.templates},
              {"trajectories", c.trajectories},
              {"data", c.data}};
  }
  return j;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Json> disc;
  disc.reserve(ds.disc.size());
  for (const auto& r : ds.disc) disc.push_back(to_json(r));
  write_lines(dir / "disc.jsonl", disc);
  std::vector<Json> rl;
  rl.reserve(ds.rl.size());
  for (const auto& r : ds.rl) rl.push_back(to_json(r));
  write_lines(dir / "rl.jsonl", rl);
  write_json_file(dir / "stats.json",
                  {{"report", report_json(ds.report)},
                   {"split", {{"train", ds.split.train}, {"validation", ds.split.validation}}}});
}

std::vector<DiscRecord> load_disc_records(const std::filesystem::path& file) {
  std::vector<DiscRecord> out;
  for (const auto& j : read_ndjson(file)) out.push_back(disc_record_from_json(j));
  return out;
}

std::vector<RLRecord> load_rl_records(const std::filesystem::path& file) {
  std::vector<RLRecord> out;
  for (const auto& j : read_ndjson(file)) out.push_back(rl_record_from_json(j));
  return out;
}

std::map<std::string, EnvironmentCounts> compute_stats(const std::vector<DiscRecord>& records,
                                                       int T) {
  std::map<std::string, std::set<std::string>> categories;
  std::map<std::string, std::set<std::string>> templates;
  std::map<std::string, EnvironmentCounts> report;
  for (const auto& r : records) {
    const std::string env(to_string(r.scene.environment));
    for (const std::string& key : {env, std::string("Total")}) {
      auto& c = report[key];
      ++c.data;
      if (r.step == 0) ++c.trajectories;
      templates[key].insert(r.template_id);
      for (const auto& o : r.scene.objects) categories[key].insert(o.category);
    }
  }
  for (auto& [key, c] : report) {
    c.objects = categories[key].size();
    c.templates = templates[key].size();
    if (c.trajectories == 0 && T > 0) c.trajectories = c.data / static_cast<std::size_t>(T);
  }
  return report;
}

std::string format_stats_table(const std::map<std::string, EnvironmentCounts>& report) {
  std::ostringstream os;
  os << "Environment,# Objects,# Templates,# Trajectories,# Data\n";
  for (const auto& [env, c] : report) {
    if (env == "Total") continue;
    os << env << ',' << c.objects << ',' << c.templates << ',' << c.trajectories << ','
       << c.data << '\n';
  }
  if (const auto it = report.find("Total"); it != report.end()) {
    const auto& c = it->second;
    os << "Total," << c.objects << ',' << c.templates << ',' << c.trajectories << ','
       << c.data << '\n';
  }
  return os.str();
}

}  // namespace tidy
