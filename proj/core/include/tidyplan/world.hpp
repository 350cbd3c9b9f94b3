#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tidy {

/// Raised for every contract violation in the library. The message is the
/// stable, user-facing reason ("no such object", "action out of bounds", ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

/// Planar pose. Angles are degrees, kept in [0, 360).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Wraps any finite angle into [0, 360).
double wrap_degrees(double deg);

/// Bounded rectangular table top discretized into a grid_w x grid_h cell map
/// and rotation_bins orientation bins. Cell (0, 0) sits at the corner with
/// minimum x and y; x indexes along the width, y along the depth.
struct Workspace {
  double width_m = 1.0;
  double depth_m = 0.7;
  int grid_h = 16;
  int grid_w = 16;
  int rotation_bins = 4;

  friend bool operator==(const Workspace&, const Workspace&) = default;

  void validate() const;
  double cell_width() const { return width_m / grid_w; }
  double cell_depth() const { return depth_m / grid_h; }
  Vec2 cell_center(int x_idx, int y_idx) const;
  /// Orientation realized by rotation bin k: k * 360 / R degrees.
  double bin_angle(int bin) const;
  /// Cell whose area contains p, clamped into the grid.
  std::pair<int, int> snap_cell(Vec2 p) const;
  /// Bin whose realized angle is nearest to deg.
  int nearest_bin(double deg) const;
  double diagonal() const;
  std::size_t action_count() const {
    return static_cast<std::size_t>(grid_h) * grid_w * rotation_bins;
  }
};

enum class EnvironmentTag { coffee, dining, office, bathroom, mixed };

std::string_view to_string(EnvironmentTag tag);
EnvironmentTag parse_environment(std::string_view name);
inline constexpr std::array<EnvironmentTag, 4> kTemplateEnvironments = {
    EnvironmentTag::coffee, EnvironmentTag::dining, EnvironmentTag::office,
    EnvironmentTag::bathroom};

struct ObjectInstance {
  int id = 0;
  std::string category;
  Vec2 half_extents{0.05, 0.05};
  Pose pose;
  bool is_support = false;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;

  /// Footprint corners in table coordinates, counter-clockwise.
  std::array<Vec2, 4> corners() const;
  /// True when p lies inside (or on the boundary of) the footprint.
  bool contains(Vec2 p) const;
  Vec2 center() const { return {pose.x, pose.y}; }
};

struct Scene {
  Workspace workspace;
  std::vector<ObjectInstance> objects;
  EnvironmentTag environment = EnvironmentTag::mixed;

  friend bool operator==(const Scene&, const Scene&) = default;

  /// Checks ids are distinct, N >= 1, extents positive and poses finite.
  void validate() const;
  const ObjectInstance& object(int id) const;
  ObjectInstance& object(int id);
  std::size_t index_of(int id) const;
  bool has_object(int id) const;
};

/// Discretized pick-and-place a = (o, x, y, r).
struct ActionSpec {
  int object_id = 0;
  int x_idx = 0;
  int y_idx = 0;
  int rotation_bin = 0;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
  friend auto operator<=>(const ActionSpec&, const ActionSpec&) = default;
};

bool action_in_bounds(const Workspace& ws, const ActionSpec& a);

/// Deterministic transition: re-poses the object at the target cell center
/// with the bin's orientation. Throws "no such object" / "action out of bounds".
Scene apply_action(const Scene& scene, const ActionSpec& action);

/// Pose a placement action realizes.
Pose action_pose(const Workspace& ws, const ActionSpec& action);

/// True iff the two footprints intersect with positive area.
bool footprints_intersect(const ObjectInstance& a, const ObjectInstance& b);

/// True when one object is a support and the other's center lies on it.
bool legal_on_placement(const ObjectInstance& a, const ObjectInstance& b);

/// Positive-area intersection that is not a legal "on" placement.
bool illegal_overlap(const ObjectInstance& a, const ObjectInstance& b);

/// Every unordered colliding pair as (smaller id, larger id), sorted.
std::vector<std::pair<int, int>> check_overlap(const Scene& scene);

bool footprint_in_bounds(const Workspace& ws, const ObjectInstance& obj);

/// Ids of objects with any footprint corner outside the workspace, sorted.
std::vector<int> in_bounds(const Scene& scene);

/// No illegal overlap and nothing out of bounds.
bool is_valid(const Scene& scene);

/// Returns the scene without the given object (throws "no such object").
Scene without_object(const Scene& scene, int object_id);

}  // namespace tidy
