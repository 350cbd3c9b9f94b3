#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tidyplan/random.hpp"
#include "tidyplan/templates.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

struct TrajectoryStep {
  Scene scene;
  double label = 0.0;
};

/// Messy (label 0) to tidied (label 1) sequence, built by scattering a
/// tidied scene one object at a time and reversing.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::string template_id;
  std::uint64_t seed = 0;
  Binding binding;
};

struct RLTransition {
  Scene state;
  ActionSpec action;
  Scene next_state;
  double reward = 0.0;
  bool terminal = false;
};

/// psi_t = (t - 1) / (T - 1) for t = 1..T.
double tidiness_label(int t, int T);

/// Uniformly random valid pose for one object, keeping all others fixed.
/// Returns false after max_tries draws without a valid pose.
bool scatter_object(Scene& scene, std::size_t index, Rng& rng, int max_tries = 100);

/// Throws "scatter failed" when an object cannot be scattered validly.
Trajectory generate_trajectory(const Template& tmpl, int T, std::uint64_t rng_seed,
                               const AugmentSpec& augment = {});

/// Throws "malformed trajectory" unless adjacent scenes differ in exactly one
/// object's pose.
std::vector<RLTransition> to_rl_transitions(const Trajectory& traj);

enum class Split { train, validation };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct TemplateSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  bool is_train(const std::string& id) const;
};

/// Holds out whole templates: per environment, round(0.72 n) templates train
/// (clamped to [1, n - 1]); the rest validate. Throws "cannot split" when an
/// environment has fewer than two templates.
TemplateSplit split_templates(const std::vector<Template>& library, std::uint64_t seed);

struct DiscRecord {
  Scene scene;
  double label = 0.0;
  Split split = Split::train;
  std::string template_id;
  int step = 0;  // 0 for the messiest scene, T - 1 for the tidy one
};

struct RLRecord {
  RLTransition transition;
  Split split = Split::train;
  std::string template_id;
};

struct EnvironmentCounts {
  std::size_t objects = 0;  // distinct categories
  std::size_t templates = 0;
  std::size_t trajectories = 0;
  std::size_t data = 0;
};

struct DatasetConfig {
  int trajectories_per_template = 120;
  int T = 5;
  std::uint64_t seed = 0;
  AugmentSpec augment;
};

struct Dataset {
  std::vector<DiscRecord> disc;
  std::vector<RLRecord> rl;
  TemplateSplit split;
  std::map<std::string, EnvironmentCounts> report;  // keyed by environment; "Total" row
};

Dataset build_dataset(const std::vector<Template>& library, const DatasetConfig& config);

Json to_json(const DiscRecord& r);
DiscRecord disc_record_from_json(const Json& j);
Json to_json(const RLRecord& r);
RLRecord rl_record_from_json(const Json& j);

/// Writes disc.jsonl, rl.jsonl and stats.json into dir.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
std::vector<DiscRecord> load_disc_records(const std::filesystem::path& file);
std::vector<RLRecord> load_rl_records(const std::filesystem::path& file);

/// Per-environment counts laid out as: Environment, Objects, Templates,
/// Trajectories, Data.
std::string format_stats_table(const std::map<std::string, EnvironmentCounts>& report);
std::map<std::string, EnvironmentCounts> compute_stats(
    const std::vector<DiscRecord>& records, int T);

}  // namespace tidy
