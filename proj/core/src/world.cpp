#include "tidyplan/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace tidy {

namespace {

// Projected overlap below this counts as touching, not colliding.
constexpr double kContactTolerance = 1e-9;
constexpr double kBoundsTolerance = 1e-12;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

// cos/sin that are exact at multiples of 90 degrees so axis-aligned
// footprints produce exact corners.
std::pair<double, double> cos_sin_degrees(double deg) {
  const double wrapped = wrap_degrees(deg);
  if (wrapped == 0.0) return {1.0, 0.0};
  if (wrapped == 90.0) return {0.0, 1.0};
  if (wrapped == 180.0) return {-1.0, 0.0};
  if (wrapped == 270.0) return {0.0, -1.0};
  const double r = deg_to_rad(wrapped);
  return {std::cos(r), std::sin(r)};
}

std::pair<double, double> project(const std::array<Vec2, 4>& pts, Vec2 axis) {
  double lo = pts[0].x * axis.x + pts[0].y * axis.y;
  double hi = lo;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].x * axis.x + pts[i].y * axis.y;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

}  // namespace

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

void Workspace::validate() const {
  if (!(width_m > 0.0) || !(depth_m > 0.0) || !std::isfinite(width_m) ||
      !std::isfinite(depth_m)) {
    throw Error("invalid workspace: extents must be positive");
  }
  if (grid_h < 2 || grid_w < 2 || rotation_bins < 1) {
    throw Error("invalid workspace: grid needs H, W >= 2 and R >= 1");
  }
}

Vec2 Workspace::cell_center(int x_idx, int y_idx) const {
  return {(x_idx + 0.5) * width_m / grid_w, (y_idx + 0.5) * depth_m / grid_h};
}

double Workspace::bin_angle(int bin) const {
  return bin * 360.0 / rotation_bins;
}

std::pair<int, int> Workspace::snap_cell(Vec2 p) const {
  const int xi = static_cast<int>(std::floor(p.x / width_m * grid_w));
  const int yi = static_cast<int>(std::floor(p.y / depth_m * grid_h));
  return {std::clamp(xi, 0, grid_w - 1), std::clamp(yi, 0, grid_h - 1)};
}

int Workspace::nearest_bin(double deg) const {
  const double step = 360.0 / rotation_bins;
  const int bin = static_cast<int>(std::lround(wrap_degrees(deg) / step));
  return bin % rotation_bins;
}

double Workspace::diagonal() const { return std::hypot(width_m, depth_m); }

std::string_view to_string(EnvironmentTag tag) {
  switch (tag) {
    case EnvironmentTag::coffee: return "coffee";
    case EnvironmentTag::dining: return "dining";
    case EnvironmentTag::office: return "office";
    case EnvironmentTag::bathroom: return "bathroom";
    case EnvironmentTag::mixed: return "mixed";
  }
  return "mixed";
}

EnvironmentTag parse_environment(std::string_view name) {
  for (auto tag : {EnvironmentTag::coffee, EnvironmentTag::dining,
                   EnvironmentTag::office, EnvironmentTag::bathroom,
                   EnvironmentTag::mixed}) {
    if (to_string(tag) == name) return tag;
  }
  throw Error("unknown environment tag: " + std::string(name));
}

std::array<Vec2, 4> ObjectInstance::corners() const {
  const auto [c, s] = cos_sin_degrees(pose.theta);
  const double hx = half_extents.x;
  const double hy = half_extents.y;
  const std::array<Vec2, 4> local = {
      Vec2{-hx, -hy}, Vec2{hx, -hy}, Vec2{hx, hy}, Vec2{-hx, hy}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {pose.x + c * local[i].x - s * local[i].y,
              pose.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

bool ObjectInstance::contains(Vec2 p) const {
  const auto [c, s] = cos_sin_degrees(pose.theta);
  const double dx = p.x - pose.x;
  const double dy = p.y - pose.y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= half_extents.x + kBoundsTolerance &&
         std::abs(ly) <= half_extents.y + kBoundsTolerance;
}

void Scene::validate() const {
  workspace.validate();
  if (objects.empty()) throw Error("no objects");
  std::unordered_set<int> ids;
  for (const auto& o : objects) {
    if (!ids.insert(o.id).second) {
      throw Error("duplicate object id " + std::to_string(o.id));
    }
    if (!(o.half_extents.x > 0.0) || !(o.half_extents.y > 0.0)) {
      throw Error("object " + std::to_string(o.id) +
                  ": half extents must be positive");
    }
    if (!std::isfinite(o.pose.x) || !std::isfinite(o.pose.y) ||
        !std::isfinite(o.pose.theta)) {
      throw Error("object " + std::to_string(o.id) + ": non-finite pose");
    }
  }
}

std::size_t Scene::index_of(int id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return i;
  }
  throw Error("no such object");
}

bool Scene::has_object(int id) const {
  return std::any_of(objects.begin(), objects.end(),
                     [id](const ObjectInstance& o) { return o.id == id; });
}

const ObjectInstance& Scene::object(int id) const {
  return objects[index_of(id)];
}

ObjectInstance& Scene::object(int id) { return objects[index_of(id)]; }

bool action_in_bounds(const Workspace& ws, const ActionSpec& a) {
  return a.x_idx >= 0 && a.x_idx < ws.grid_w && a.y_idx >= 0 &&
         a.y_idx < ws.grid_h && a.rotation_bin >= 0 &&
         a.rotation_bin < ws.rotation_bins;
}

Pose action_pose(const Workspace& ws, const ActionSpec& action) {
  const Vec2 c = ws.cell_center(action.x_idx, action.y_idx);
  return {c.x, c.y, ws.bin_angle(action.rotation_bin)};
}

Scene apply_action(const Scene& scene, const ActionSpec& action) {
  if (!scene.has_object(action.object_id)) throw Error("no such object");
  if (!action_in_bounds(scene.workspace, action)) {
    throw Error("action out of bounds");
  }
  Scene next = scene;
  next.object(action.object_id).pose = action_pose(scene.workspace, action);
  return next;
}

bool footprints_intersect(const ObjectInstance& a, const ObjectInstance& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto axes_of = [](const std::array<Vec2, 4>& c) {
    const Vec2 e0 = c[1] - c[0];
    const Vec2 e1 = c[3] - c[0];
    const double n0 = std::hypot(e0.x, e0.y);
    const double n1 = std::hypot(e1.x, e1.y);
    return std::array<Vec2, 2>{Vec2{e0.x / n0, e0.y / n0},
                               Vec2{e1.x / n1, e1.y / n1}};
  };
  for (const auto& axes : {axes_of(ca), axes_of(cb)}) {
    for (const Vec2 axis : axes) {
      const auto [alo, ahi] = project(ca, axis);
      const auto [blo, bhi] = project(cb, axis);
      if (std::min(ahi, bhi) - std::max(alo, blo) <= kContactTolerance) {
        return false;
      }
    }
  }
  return true;
}

bool legal_on_placement(const ObjectInstance& a, const ObjectInstance& b) {
  return (a.is_support && a.contains(b.center())) ||
         (b.is_support && b.contains(a.center()));
}

bool illegal_overlap(const ObjectInstance& a, const ObjectInstance& b) {
  return footprints_intersect(a, b) && !legal_on_placement(a, b);
}

std::vector<std::pair<int, int>> check_overlap(const Scene& scene) {
  std::vector<std::pair<int, int>> pairs;
  const auto& objs = scene.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      if (illegal_overlap(objs[i], objs[j])) {
        pairs.emplace_back(std::min(objs[i].id, objs[j].id),
                           std::max(objs[i].id, objs[j].id));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

bool footprint_in_bounds(const Workspace& ws, const ObjectInstance& obj) {
  for (const Vec2 c : obj.corners()) {
    if (c.x < -kBoundsTolerance || c.y < -kBoundsTolerance ||
        c.x > ws.width_m + kBoundsTolerance ||
        c.y > ws.depth_m + kBoundsTolerance) {
      return false;
    }
  }
  return true;
}

std::vector<int> in_bounds(const Scene& scene) {
  std::vector<int> out;
  for (const auto& o : scene.objects) {
    if (!footprint_in_bounds(scene.workspace, o)) out.push_back(o.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_valid(const Scene& scene) {
  return in_bounds(scene).empty() && check_overlap(scene).empty();
}

Scene without_object(const Scene& scene, int object_id) {
  Scene out = scene;
  out.objects.erase(out.objects.begin() +
                    static_cast<std::ptrdiff_t>(scene.index_of(object_id)));
  return out;
}

}  // namespace tidy
