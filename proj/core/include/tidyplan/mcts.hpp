#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tidyplan/policy.hpp"
#include "tidyplan/serialization.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

/// Scene scorer and action proposer used by the planner. Any callable works,
/// which is how tests plug in oracle scores and uniform proposals.
struct PlannerModels {
  std::function<double(const Scene&)> score;
  std::function<PolicyDistribution(const Scene&)> policy;
};

struct SearchConfig {
  int iterations = 200;
  double exploration = 1.0;
  double mixing = 0.3;
  int rollout_horizon = 5;
  double threshold = 0.85;
  int width = 8;
  int duplicate_retries = 50;

  void validate() const;
};

Json to_json(const SearchConfig& c);
SearchConfig search_config_from_json(const Json& j);

struct Edge {
  ActionSpec action;
  int child = -1;
  int visits = 0;
  double value = 0.0;  // cumulative backed-up reward Q(s, a)
};

struct TreeNode {
  Scene scene;
  int visits = 0;
  double score = 0.0;
  bool fully_expanded = false;
  bool terminal = false;  // score >= threshold; never expanded further
  std::vector<Edge> edges;
  std::optional<PolicyDistribution> distribution;
};

class SearchTree {
 public:
  explicit SearchTree(Scene root, double root_score, bool terminal);

  TreeNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  int add(TreeNode n);

  /// N(s) == 1 + sum N(s, a) at every visited node.
  bool consistent() const;

 private:
  std::vector<TreeNode> nodes_;
};

/// UCT: argmax Q/N + c * sqrt(2 ln N(s) / N(s, a)); unvisited edges first;
/// ties go to the lexicographically smallest action. Returns the edge index.
/// Throws "leaf node" without edges.
std::size_t uct_select(const TreeNode& node, double c);

/// Adds one child for a new action sampled from the node's cached policy
/// distribution. Returns the new node id, or nothing (and marks the node
/// fully expanded) when the width is reached or no new action turns up.
std::optional<int> expand(SearchTree& tree, int node_id, const PlannerModels& models,
                          const SearchConfig& config, Rng& rng);

struct Simulation {
  double value = 0.0;
  int outcome = 0;
};

/// V is the score of the start scene; z = 1 when any state of a policy
/// rollout of the given horizon (including the start) reaches the threshold.
Simulation simulate(const Scene& scene, double start_score, const PlannerModels& models,
                    int horizon, double threshold, Rng& rng);

struct PathStep {
  int node = 0;
  std::size_t edge = 0;
};

/// Q(s, a) += (1 - lambda) V + lambda z and N(s), N(s, a) += 1 along the path;
/// the leaf's own count goes up only on its first visit.
void backpropagate(SearchTree& tree, const std::vector<PathStep>& path, int leaf,
                   const Simulation& sim, double lambda);

struct EdgeStats {
  ActionSpec action;
  int visits = 0;
  double value = 0.0;
};

struct SearchResult {
  ActionSpec best;
  std::vector<EdgeStats> root_edges;
  std::size_t nodes = 0;
  int root_visits = 0;
};

/// K select-expand-simulate-backpropagate iterations from a fresh tree.
/// Returns the most visited root action (ties: smallest action).
/// Throws "stuck" when the root has no feasible action.
SearchResult search(const Scene& root, const PlannerModels& models, const SearchConfig& config,
                    std::uint64_t rng_seed);

/// Same, exposing the tree to callers that inspect it.
SearchResult search(SearchTree& tree, const PlannerModels& models, const SearchConfig& config,
                    std::uint64_t rng_seed);

enum class EpisodeStatus { success, collision, out_of_bounds, stuck, timeout };

std::string_view to_string(EpisodeStatus s);
EpisodeStatus parse_status(std::string_view s);

struct EpisodeResult {
  std::vector<Scene> scenes;       // s_0 .. s_L
  std::vector<double> scores;      // score of each recorded scene
  std::vector<ActionSpec> actions;  // L actions
  EpisodeStatus status = EpisodeStatus::timeout;
  double final_score = 0.0;
  int length = 0;
};

Json to_json(const EpisodeResult& r);

/// Chooses the next action for a scene; the episode loop is shared between
/// the tree search and the baselines.
using StepPlanner = std::function<ActionSpec(const Scene&, int step)>;

/// Runs until the score reaches the threshold (success), the scene becomes
/// invalid, no action is available ("stuck" thrown by the planner) or
/// max_steps actions have been taken.
EpisodeResult run_episode(const Scene& initial, const std::function<double(const Scene&)>& score,
                          const StepPlanner& planner, double threshold, int max_steps);

EpisodeResult plan_episode(const Scene& initial, const PlannerModels& models,
                           const SearchConfig& config, int max_steps, std::uint64_t rng_seed);

}  // namespace tidy
