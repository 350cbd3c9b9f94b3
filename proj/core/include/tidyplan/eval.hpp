#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tidyplan/dataset.hpp"
#include "tidyplan/mcts.hpp"
#include "tidyplan/templates.hpp"

namespace tidy {

enum class PlannerKind { tsmcts, random, greedy };

std::string_view to_string(PlannerKind k);
PlannerKind parse_planner(std::string_view name);

struct BenchmarkConfig {
  std::vector<EnvironmentTag> environments = {EnvironmentTag::coffee, EnvironmentTag::dining,
                                              EnvironmentTag::office, EnvironmentTag::bathroom,
                                              EnvironmentTag::mixed};
  int episodes_per_env = 100;
  int max_steps = 10;
  int scatter_steps = 4;  // initial scene = s_1 of a trajectory of this many moves
  std::uint64_t split_seed = 0;  // must match the dataset the models saw
  std::uint64_t seed = 0;
  PlannerKind planner = PlannerKind::tsmcts;
  SearchConfig search;
};

struct BenchmarkRow {
  std::string environment;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_tidiness = 0.0;
  double mean_length = 0.0;
  std::map<std::string, int> outcomes;  // status -> count, successes included
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;  // requested environments, then "Average"
  BenchmarkConfig config;
  std::vector<std::uint64_t> episode_seeds;
};

/// Held-out templates: the validation side of split_templates(library, split_seed).
std::vector<Template> held_out_templates(const std::vector<Template>& library,
                                         std::uint64_t split_seed);

/// Template for the mixed environment: a held-out template whose non-support
/// slots are recast with categories drawn across all environments.
Template mixed_template(const Template& base, std::uint64_t seed);

/// Messy starting scene for one benchmark episode.
Scene benchmark_scene(const std::vector<Template>& held_out, EnvironmentTag env,
                      int scatter_steps, std::uint64_t seed);

/// Uniformly random feasible action; throws "stuck" when none exists.
ActionSpec random_action(const Scene& scene, Rng& rng);
/// Feasible action maximizing the one-step score; ties go to the smallest
/// action. Throws "stuck" when none exists.
ActionSpec greedy_action(const Scene& scene, const std::function<double(const Scene&)>& score);

/// Runs episodes_per_env episodes per environment with the configured planner.
/// Throws "empty benchmark" for zero episodes and "no templates for <env>"
/// when the held-out set lacks an environment.
BenchmarkReport run_benchmark(const PlannerModels& models, const std::vector<Template>& library,
                              const BenchmarkConfig& config);

Json to_json(const BenchmarkReport& r);
/// Environment, Success Rate, Tidiness Score, Length, then one column per status.
std::string format_report_csv(const BenchmarkReport& r);

}  // namespace tidy
