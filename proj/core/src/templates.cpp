#include "tidyplan/templates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <set>

#include "tidyplan/random.hpp"

namespace tidy {

namespace {

using E = EnvironmentTag;

std::vector<CategoryInfo> build_catalog() {
  return {
      // dining
      {"plate", {0.11, 0.11}, true, E::dining},
      {"bowl", {0.075, 0.075}, false, E::dining},
      {"cup", {0.045, 0.045}, false, E::dining},
      {"glass", {0.035, 0.035}, false, E::dining},
      {"fork", {0.09, 0.015}, false, E::dining},
      {"knife", {0.10, 0.012}, false, E::dining},
      {"spoon", {0.08, 0.017}, false, E::dining},
      {"napkin", {0.08, 0.06}, false, E::dining},
      // coffee table
      {"mug", {0.045, 0.045}, false, E::coffee},
      {"saucer", {0.07, 0.07}, true, E::coffee},
      {"teapot", {0.09, 0.065}, false, E::coffee},
      {"tray", {0.2, 0.13}, true, E::coffee},
      {"book", {0.11, 0.075}, false, E::coffee},
      {"remote", {0.085, 0.025}, false, E::coffee},
      {"coaster", {0.05, 0.05}, true, E::coffee},
      {"sugar_bowl", {0.05, 0.05}, false, E::coffee},
      {"magazine", {0.12, 0.09}, false, E::coffee},
      // office desk
      {"laptop", {0.16, 0.11}, false, E::office},
      {"keyboard", {0.21, 0.07}, false, E::office},
      {"mouse", {0.055, 0.035}, false, E::office},
      {"notebook", {0.1, 0.075}, false, E::office},
      {"pen", {0.07, 0.008}, false, E::office},
      {"pencil_cup", {0.04, 0.04}, false, E::office},
      {"stapler", {0.075, 0.022}, false, E::office},
      {"phone", {0.075, 0.038}, false, E::office},
      {"desk_mat", {0.17, 0.12}, true, E::office},
      // bathroom
      {"toothbrush", {0.09, 0.012}, false, E::bathroom},
      {"toothpaste", {0.095, 0.022}, false, E::bathroom},
      {"soap", {0.045, 0.03}, false, E::bathroom},
      {"soap_dish", {0.065, 0.05}, true, E::bathroom},
      {"towel", {0.13, 0.08}, true, E::bathroom},
      {"razor", {0.075, 0.02}, false, E::bathroom},
      {"comb", {0.08, 0.018}, false, E::bathroom},
      {"bottle", {0.04, 0.04}, false, E::bathroom},
  };
}

constexpr std::array<std::string_view, kRelationKindCount> kKindNames = {
    "on",    "under",      "left",        "right",       "front",
    "behind", "left-front", "left-behind", "right-front", "right-behind"};

// Sector i is centered at i * 45 degrees.
constexpr std::array<RelationKind, 8> kSectorKinds = {
    RelationKind::right,       RelationKind::right_behind,
    RelationKind::behind,      RelationKind::left_behind,
    RelationKind::left,        RelationKind::left_front,
    RelationKind::front,       RelationKind::right_front};

double extent_along(const Vec2& half, double theta_deg, Vec2 u) {
  const double t = theta_deg * std::numbers::pi / 180.0;
  const Vec2 e1{std::cos(t), std::sin(t)};
  const Vec2 e2{-std::sin(t), std::cos(t)};
  return std::abs(u.x * e1.x + u.y * e1.y) * half.x +
         std::abs(u.x * e2.x + u.y * e2.y) * half.y;
}

Vec2 rotate(Vec2 v, double deg) {
  const double t = deg * std::numbers::pi / 180.0;
  return {std::cos(t) * v.x - std::sin(t) * v.y,
          std::sin(t) * v.x + std::cos(t) * v.y};
}

}  // namespace

const std::vector<CategoryInfo>& category_catalog() {
  static const std::vector<CategoryInfo> catalog = build_catalog();
  return catalog;
}

std::size_t category_index(std::string_view name) {
  const auto& cat = category_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    if (cat[i].name == name) return i;
  }
  throw Error("unknown category: " + std::string(name));
}

const CategoryInfo& category_info(std::string_view name) {
  return category_catalog()[category_index(name)];
}

bool is_known_category(std::string_view name) {
  const auto& cat = category_catalog();
  return std::any_of(cat.begin(), cat.end(),
                     [name](const CategoryInfo& c) { return c.name == name; });
}

ObjectInstance make_object(int id, std::string_view category, Pose pose) {
  const auto& info = category_info(category);
  ObjectInstance o;
  o.id = id;
  o.category = info.name;
  o.half_extents = info.half_extents;
  o.pose = {pose.x, pose.y, wrap_degrees(pose.theta)};
  o.is_support = info.is_support;
  return o;
}

std::string_view to_string(RelationKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

RelationKind parse_relation_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<RelationKind>(i);
  }
  throw Error("unknown relation kind: " + std::string(name));
}

std::optional<double> relation_direction(RelationKind kind) {
  for (std::size_t i = 0; i < kSectorKinds.size(); ++i) {
    if (kSectorKinds[i] == kind) return 45.0 * static_cast<double>(i);
  }
  return std::nullopt;
}

RelationKind opposite(RelationKind kind) {
  if (kind == RelationKind::on) return RelationKind::under;
  if (kind == RelationKind::under) return RelationKind::on;
  for (std::size_t i = 0; i < kSectorKinds.size(); ++i) {
    if (kSectorKinds[i] == kind) return kSectorKinds[(i + 4) % 8];
  }
  return kind;
}

RelationKind classify_relation(const ObjectInstance& reference,
                               const ObjectInstance& subject) {
  if (reference.is_support && reference.contains(subject.center())) {
    return RelationKind::on;
  }
  if (subject.is_support && subject.contains(reference.center())) {
    return RelationKind::under;
  }
  const double dx = subject.pose.x - reference.pose.x;
  const double dy = subject.pose.y - reference.pose.y;
  if (dx == 0.0 && dy == 0.0) throw Error("degenerate offset");
  double angle = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 360.0;
  const auto sector =
      static_cast<std::size_t>(std::floor((angle + 22.5) / 45.0)) % 8;
  return kSectorKinds[sector];
}

void Template::validate() const {
  const auto fail = [this](const std::string& why) {
    throw Error("template " + id + ": " + why);
  };
  if (slots.size() < 2 || slots.size() > 9) fail("needs 2 to 9 slots");
  std::set<int> indices;
  for (const auto& s : slots) {
    if (!indices.insert(s.slot).second) fail("duplicate slot index");
    if (!is_known_category(s.category)) fail("unknown category " + s.category);
    for (const auto& alt : s.alternates) {
      if (!is_known_category(alt)) fail("unknown category " + alt);
    }
  }
  if (relations.empty()) fail("no relations");
  const auto supports = [this](int slot_index) {
    const auto& s = slot(slot_index);
    if (!category_info(s.category).is_support) return false;
    return std::all_of(s.alternates.begin(), s.alternates.end(),
                       [](const std::string& a) {
                         return category_info(a).is_support;
                       });
  };
  // Union-find over slot indices for connectivity.
  std::map<int, int> parent;
  for (int i : indices) parent[i] = i;
  const auto find = [&parent](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& r : relations) {
    if (!indices.contains(r.subject_slot) || !indices.contains(r.reference_slot)) {
      fail("relation references undeclared slot");
    }
    if (r.subject_slot == r.reference_slot) fail("relation on a single slot");
    if (r.kind == RelationKind::on && !supports(r.reference_slot)) {
      fail("'on' needs a support reference");
    }
    if (r.kind == RelationKind::under && !supports(r.subject_slot)) {
      fail("'under' needs a support subject");
    }
    parent[find(r.subject_slot)] = find(r.reference_slot);
  }
  const int root = find(*indices.begin());
  for (int i : indices) {
    if (find(i) != root) fail("relation graph is not connected");
  }
}

const TemplateSlot& Template::slot(int index) const {
  for (const auto& s : slots) {
    if (s.slot == index) return s;
  }
  throw Error("template " + id + ": no slot " + std::to_string(index));
}

void to_json(Json& j, const Template& t) {
  Json slots = Json::array();
  for (const auto& s : t.slots) {
    slots.push_back({{"slot", s.slot},
                     {"category", s.category},
                     {"alternates", s.alternates},
                     {"theta", s.theta}});
  }
  Json rels = Json::array();
  for (const auto& r : t.relations) {
    rels.push_back({{"kind", std::string(to_string(r.kind))},
                    {"subject", r.subject_slot},
                    {"reference", r.reference_slot}});
  }
  j = Json{{"id", t.id},
           {"environment_tag", std::string(to_string(t.environment))},
           {"slots", slots},
           {"relations", rels}};
}

void from_json(const Json& j, Template& t) {
  t.id = j.at("id").get<std::string>();
  t.environment = parse_environment(j.at("environment_tag").get<std::string>());
  t.slots.clear();
  for (const auto& s : j.at("slots")) {
    TemplateSlot slot;
    slot.slot = s.at("slot").get<int>();
    slot.category = s.at("category").get<std::string>();
    slot.alternates = s.value("alternates", std::vector<std::string>{});
    slot.theta = s.value("theta", 0.0);
    t.slots.push_back(std::move(slot));
  }
  t.relations.clear();
  for (const auto& r : j.at("relations")) {
    t.relations.push_back({parse_relation_kind(r.at("kind").get<std::string>()),
                           r.at("subject").get<int>(),
                           r.at("reference").get<int>()});
  }
  t.validate();
}

Template load_template(const std::filesystem::path& path) {
  try {
    return read_json_file(path).get<Template>();
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Template> load_template_library(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("template library not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::vector<Template> out;
  for (const auto& f : files) out.push_back(load_template(f));
  std::sort(out.begin(), out.end(),
            [](const Template& a, const Template& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].id == out[i - 1].id) throw Error("duplicate template id " + out[i].id);
  }
  return out;
}

TemplateCheck satisfies_template(const Scene& scene, const Template& tmpl,
                                 const Binding& binding) {
  for (const auto& s : tmpl.slots) {
    if (!binding.contains(s.slot)) throw Error("incomplete binding");
  }
  TemplateCheck check;
  for (const auto& r : tmpl.relations) {
    const auto& subject = scene.object(binding.at(r.subject_slot));
    const auto& reference = scene.object(binding.at(r.reference_slot));
    bool ok = false;
    if (subject.center() != reference.center() ||
        reference.is_support || subject.is_support) {
      ok = classify_relation(reference, subject) == r.kind;
    }
    if (!ok) check.violated.push_back(r);
  }
  check.satisfied = check.violated.empty();
  return check;
}

namespace {

// One rejection-sampling attempt; nullopt when the draw is invalid.
std::optional<Scene> try_sample(const Template& tmpl, const AugmentSpec& aug,
                                Rng& rng) {
  const std::size_t n = tmpl.slots.size();
  std::map<int, ObjectInstance> placed_objects;
  std::map<int, ObjectInstance> objects;
  for (const auto& s : tmpl.slots) {
    std::string category = s.category;
    if (!s.alternates.empty() && rng.bernoulli(aug.p_swap)) {
      category = s.alternates[rng.below(s.alternates.size())];
    }
    objects.emplace(s.slot, make_object(s.slot, category, {0.0, 0.0, s.theta}));
  }

  // Breadth-first placement along relations starting from the first slot.
  std::deque<int> frontier{tmpl.slots.front().slot};
  placed_objects.emplace(frontier.front(), objects.at(frontier.front()));
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop_front();
    for (const auto& r : tmpl.relations) {
      int other = 0;
      RelationKind kind{};  // relation of `other` with respect to `cur`
      if (r.reference_slot == cur && !placed_objects.contains(r.subject_slot)) {
        other = r.subject_slot;
        kind = r.kind;
      } else if (r.subject_slot == cur &&
                 !placed_objects.contains(r.reference_slot)) {
        other = r.reference_slot;
        kind = opposite(r.kind);
      } else {
        continue;
      }
      const ObjectInstance& ref = placed_objects.at(cur);
      ObjectInstance obj = objects.at(other);
      if (kind == RelationKind::on || kind == RelationKind::under) {
        // Center of the supported object lands in the inner half of the support.
        const ObjectInstance& support = kind == RelationKind::on ? ref : obj;
        const Vec2 local{rng.uniform(-0.5, 0.5) * support.half_extents.x,
                         rng.uniform(-0.5, 0.5) * support.half_extents.y};
        const Vec2 off = rotate(local, support.pose.theta);
        const Vec2 c = kind == RelationKind::on ? ref.center() + off
                                                : ref.center() - off;
        obj.pose.x = c.x;
        obj.pose.y = c.y;
      } else {
        double dir = *relation_direction(kind);
        if (aug.direction_jitter_deg > 0.0) {
          dir += rng.uniform(-aug.direction_jitter_deg, aug.direction_jitter_deg);
        }
        const double t = dir * std::numbers::pi / 180.0;
        const Vec2 u{std::cos(t), std::sin(t)};
        const double gap = aug.nominal_gap_m *
                           rng.uniform(1.0 - aug.gap_jitter, 1.0 + aug.gap_jitter);
        const double dist = extent_along(ref.half_extents, ref.pose.theta, u) +
                            extent_along(obj.half_extents, obj.pose.theta, u) + gap;
        obj.pose.x = ref.pose.x + u.x * dist;
        obj.pose.y = ref.pose.y + u.y * dist;
      }
      placed_objects.emplace(other, obj);
      frontier.push_back(other);
    }
  }
  if (placed_objects.size() != n) return std::nullopt;

  Vec2 centroid{};
  for (const auto& [slot, o] : placed_objects) centroid = centroid + o.center();
  centroid = centroid * (1.0 / static_cast<double>(n));
  const auto& ws = aug.workspace;
  const double margin = (1.0 - aug.centroid_region) / 2.0;
  const Vec2 target{rng.uniform(margin, 1.0 - margin) * ws.width_m,
                    rng.uniform(margin, 1.0 - margin) * ws.depth_m};
  Scene scene;
  scene.workspace = ws;
  scene.environment = tmpl.environment;
  for (const auto& s : tmpl.slots) {
    ObjectInstance o = placed_objects.at(s.slot);
    o.pose.x += target.x - centroid.x;
    o.pose.y += target.y - centroid.y;
    scene.objects.push_back(o);
  }
  if (!is_valid(scene)) return std::nullopt;
  Binding binding;
  for (const auto& s : tmpl.slots) binding[s.slot] = s.slot;
  if (!satisfies_template(scene, tmpl, binding).satisfied) return std::nullopt;
  return scene;
}

}  // namespace

TidiedScene sample_tidied_scene(const Template& tmpl, std::uint64_t rng_seed,
                                const AugmentSpec& augment) {
  tmpl.validate();
  augment.workspace.validate();
  Rng rng(derive_seed(rng_seed, hash_string(tmpl.id)));
  for (int attempt = 0; attempt < augment.max_retries; ++attempt) {
    if (auto scene = try_sample(tmpl, augment, rng)) {
      TidiedScene out{std::move(*scene), {}};
      for (const auto& s : tmpl.slots) out.binding[s.slot] = s.slot;
      return out;
    }
  }
  throw Error("template infeasible in workspace");
}

}  // namespace tidy
