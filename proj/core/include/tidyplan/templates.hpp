#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tidyplan/serialization.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

// ---------------------------------------------------------------------------
// Object catalog

struct CategoryInfo {
  std::string name;
  Vec2 half_extents;
  bool is_support = false;
  EnvironmentTag home = EnvironmentTag::mixed;
};

/// The fixed category vocabulary. Order is stable and defines the layout of
/// category histograms and one-hot encodings.
const std::vector<CategoryInfo>& category_catalog();
const CategoryInfo& category_info(std::string_view name);
std::size_t category_index(std::string_view name);
bool is_known_category(std::string_view name);

/// Builds an object of the given category at pose.
ObjectInstance make_object(int id, std::string_view category, Pose pose);

// ---------------------------------------------------------------------------
// Relations

enum class RelationKind {
  on,
  under,
  left,
  right,
  front,
  behind,
  left_front,
  left_behind,
  right_front,
  right_behind,
};

inline constexpr std::size_t kRelationKindCount = 10;

std::string_view to_string(RelationKind kind);
RelationKind parse_relation_kind(std::string_view name);
/// Direction of a planar kind in the table frame (+x right, +y behind),
/// in degrees; nullopt for on/under.
std::optional<double> relation_direction(RelationKind kind);
RelationKind opposite(RelationKind kind);

struct Relation {
  RelationKind kind = RelationKind::right;
  int subject_slot = 0;
  int reference_slot = 0;

  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Relation of subject with respect to reference. "on"/"under" take
/// precedence (center containment on a support); otherwise the center offset
/// angle picks one of eight 45 degree sectors, boundary ties going to the
/// counter-clockwise sector. Throws "degenerate offset" on coincident centers.
RelationKind classify_relation(const ObjectInstance& reference,
                               const ObjectInstance& subject);

// ---------------------------------------------------------------------------
// Templates

struct TemplateSlot {
  int slot = 0;
  std::string category;
  std::vector<std::string> alternates;
  /// Orientation of the object in the tidied arrangement (degrees).
  double theta = 0.0;
};

struct Template {
  std::string id;
  EnvironmentTag environment = EnvironmentTag::dining;
  std::vector<TemplateSlot> slots;
  std::vector<Relation> relations;

  /// Enforces: 2..9 slots, distinct slot indices, known categories,
  /// at least one relation, relations over declared and distinct slots,
  /// support categories behind on/under, and a connected relation graph.
  void validate() const;
  const TemplateSlot& slot(int index) const;
};

void to_json(Json& j, const Template& t);
void from_json(const Json& j, Template& t);

Template load_template(const std::filesystem::path& path);
/// Loads every *.json in dir, sorted by template id.
std::vector<Template> load_template_library(const std::filesystem::path& dir);

/// slot -> object id
using Binding = std::map<int, int>;

struct TemplateCheck {
  bool satisfied = false;
  std::vector<Relation> violated;
};

TemplateCheck satisfies_template(const Scene& scene, const Template& tmpl,
                                 const Binding& binding);

struct AugmentSpec {
  double nominal_gap_m = 0.03;
  /// Relative gap jitter: gaps drawn from nominal * [1 - j, 1 + j].
  double gap_jitter = 0.3;
  double p_swap = 0.3;
  /// Centroid drawn uniformly over this central fraction of the workspace.
  double centroid_region = 0.6;
  /// Max angular deviation of a placed offset from its sector center.
  double direction_jitter_deg = 0.0;
  int max_retries = 100;
  Workspace workspace;
};

struct TidiedScene {
  Scene scene;
  Binding binding;
};

/// Rejection-samples a valid scene satisfying the template. Deterministic per
/// seed. Throws "template infeasible in workspace" after max_retries.
TidiedScene sample_tidied_scene(const Template& tmpl, std::uint64_t rng_seed,
                                const AugmentSpec& augment = {});

}  // namespace tidy
