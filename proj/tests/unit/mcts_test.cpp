#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tidyplan/mcts.hpp"

namespace tidy {
namespace {

using testing::box;
using testing::scene_of;

// Score is high only when object 1 sits in the goal cell.
PlannerModels goal_cell_models(int gx, int gy) {
  PlannerModels m;
  m.score = [gx, gy](const Scene& s) {
    const auto cell = s.workspace.snap_cell({s.object(1).pose.x, s.object(1).pose.y});
    return cell == std::pair{gx, gy} ? 0.95 : 0.4;
  };
  m.policy = [](const Scene& s) { return uniform_distribution(s); };
  return m;
}

Workspace small_ws() {
  Workspace ws;
  ws.width_m = 0.6;
  ws.depth_m = 0.6;
  ws.grid_w = 6;
  ws.grid_h = 6;
  ws.rotation_bins = 2;
  return ws;
}

Scene two_box_scene() {
  return scene_of({box(1, 0.05, 0.05, 0.0, 0.03, 0.03), box(2, 0.55, 0.55, 0.0, 0.03, 0.03)},
                  small_ws());
}

TreeNode node_with(std::vector<Edge> edges, int visits) {
  TreeNode n;
  n.visits = visits;
  n.edges = std::move(edges);
  return n;
}

TEST(UctSelect, Examples) {
  const Edge a{{1, 0, 0, 0}, 1, 4, 3.6};
  const Edge b{{2, 0, 0, 0}, 2, 1, 0.3};
  EXPECT_EQ(uct_select(node_with({a, b}, 8), 0.0), 0u);
  EXPECT_EQ(uct_select(node_with({a, b}, 8), 1.0), 1u);
  const Edge fresh{{3, 0, 0, 0}, 3, 0, 0.0};
  EXPECT_EQ(uct_select(node_with({a, b, fresh}, 8), 1.0), 2u);
  // Equal statistics resolve to the smaller action.
  const Edge hi{{5, 1, 0, 0}, 4, 2, 1.0};
  const Edge lo{{5, 0, 3, 1}, 5, 2, 1.0};
  EXPECT_EQ(uct_select(node_with({hi, lo}, 5), 1.0), 1u);
  const Edge u1{{4, 0, 0, 0}, 6, 0, 0.0};
  EXPECT_EQ(uct_select(node_with({u1, fresh}, 1), 1.0), 1u);
  try {
    uct_select(TreeNode{}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "leaf node");
  }
}

TEST(Backpropagate, MixedIncrement) {
  SearchTree tree(two_box_scene(), 0.4, false);
  TreeNode child;
  const int c = tree.add(child);
  tree.node(0).edges.push_back({{1, 2, 2, 0}, c, 0, 0.0});
  backpropagate(tree, {{0, 0}}, c, {0.8, 1}, 0.3);
  EXPECT_NEAR(tree.node(0).edges[0].value, 0.86, 1e-12);
  EXPECT_EQ(tree.node(0).edges[0].visits, 1);
  EXPECT_EQ(tree.node(0).visits, 2);
  EXPECT_EQ(tree.node(c).visits, 1);
  EXPECT_TRUE(tree.consistent());

  backpropagate(tree, {{0, 0}}, c, {0.0, 0}, 0.3);
  EXPECT_NEAR(tree.node(0).edges[0].value, 0.86, 1e-12);
  backpropagate(tree, {{0, 0}}, c, {0.55, 1}, 0.0);
  EXPECT_NEAR(tree.node(0).edges[0].value, 0.86 + 0.55, 1e-12);
  EXPECT_EQ(tree.node(c).visits, 1);
  EXPECT_EQ(tree.node(0).visits, 4);
}

TEST(Expand, OneChildPerCallUntilWidth) {
  const Scene s = two_box_scene();
  const PlannerModels m = goal_cell_models(3, 3);
  SearchTree tree(s, m.score(s), false);
  SearchConfig cfg;
  cfg.width = 3;
  Rng rng(11);
  std::set<ActionSpec> seen;
  for (int i = 0; i < 3; ++i) {
    const auto id = expand(tree, 0, m, cfg, rng);
    ASSERT_TRUE(id.has_value());
    EXPECT_EQ(tree.node(0).edges.size(), static_cast<std::size_t>(i + 1));
    EXPECT_TRUE(is_valid(tree.node(*id).scene));
    EXPECT_EQ(tree.node(*id).visits, 0);
    seen.insert(tree.node(0).edges.back().action);
  }
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_FALSE(expand(tree, 0, m, cfg, rng).has_value());
  EXPECT_TRUE(tree.node(0).fully_expanded);
  EXPECT_EQ(tree.size(), 4u);
}

TEST(Expand, ExhaustsTinyActionSpace) {
  Workspace ws;
  ws.width_m = 0.2;
  ws.depth_m = 0.1;
  ws.grid_w = 2;
  ws.grid_h = 1;
  ws.rotation_bins = 1;
  const Scene s = scene_of({box(1, 0.05, 0.05, 0.0, 0.03, 0.03)}, ws);
  const PlannerModels m = goal_cell_models(1, 0);
  SearchTree tree(s, 0.4, false);
  SearchConfig cfg;
  cfg.width = 10;
  Rng rng(2);
  EXPECT_TRUE(expand(tree, 0, m, cfg, rng).has_value());
  EXPECT_TRUE(expand(tree, 0, m, cfg, rng).has_value());
  EXPECT_FALSE(expand(tree, 0, m, cfg, rng).has_value());
  EXPECT_TRUE(tree.node(0).fully_expanded);
}

TEST(Simulate, ThresholdAndZeroHorizon) {
  const Scene s = two_box_scene();
  const PlannerModels m = goal_cell_models(3, 3);
  Rng rng(1);
  const Simulation done = simulate(s, 0.9, m, 5, 0.85, rng);
  EXPECT_EQ(done.outcome, 1);
  EXPECT_EQ(done.value, 0.9);
  const Simulation none = simulate(s, 0.4, m, 0, 0.85, rng);
  EXPECT_EQ(none.outcome, 0);
  EXPECT_EQ(none.value, 0.4);
}

TEST(Simulate, SuccessRateMatchesEnumeration) {
  Workspace ws;
  ws.width_m = 0.2;
  ws.depth_m = 0.1;
  ws.grid_w = 2;
  ws.grid_h = 1;
  ws.rotation_bins = 1;
  const Scene s = scene_of({box(1, 0.05, 0.05, 0.0, 0.03, 0.03)}, ws);
  const PlannerModels m = goal_cell_models(1, 0);
  // Exact probability: each step lands in the goal with the uniform share of
  // feasible goal placements, independent of the current cell.
  const auto mask = feasibility_mask(s);
  double feasible = 0.0, goal = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    feasible += 1.0;
    if (uniform_distribution(s).action_at(i).x_idx == 1) goal += 1.0;
  }
  const double p = goal / feasible;
  for (int horizon : {1, 2, 3}) {
    const double exact = 1.0 - std::pow(1.0 - p, horizon);
    Rng rng(static_cast<std::uint64_t>(horizon));
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) hits += simulate(s, 0.4, m, horizon, 0.85, rng).outcome;
    EXPECT_NEAR(static_cast<double>(hits) / n, exact, 0.03) << horizon;
  }
}

TEST(Search, SingleIteration) {
  const Scene s = two_box_scene();
  SearchConfig cfg;
  cfg.iterations = 1;
  const SearchResult r = search(s, goal_cell_models(3, 3), cfg, 4);
  EXPECT_EQ(r.root_edges.size(), 1u);
  EXPECT_EQ(r.root_visits, 2);
  EXPECT_EQ(r.nodes, 2u);
  EXPECT_EQ(r.best, r.root_edges[0].action);
}

TEST(Search, DeterministicPerSeed) {
  const Scene s = two_box_scene();
  SearchConfig cfg;
  cfg.iterations = 150;
  const auto m = goal_cell_models(3, 3);
  const SearchResult a = search(s, m, cfg, 17);
  const SearchResult b = search(s, m, cfg, 17);
  ASSERT_EQ(a.root_edges.size(), b.root_edges.size());
  EXPECT_EQ(a.best, b.best);
  for (std::size_t i = 0; i < a.root_edges.size(); ++i) {
    EXPECT_EQ(a.root_edges[i].action, b.root_edges[i].action);
    EXPECT_EQ(a.root_edges[i].visits, b.root_edges[i].visits);
    EXPECT_EQ(a.root_edges[i].value, b.root_edges[i].value);
  }
  EXPECT_EQ(a.root_visits, 151);
}

TEST(Search, FuzzedTreesStayConsistent) {
  Rng meta(99);
  int total = 0;
  for (int trial = 0; total < 10000; ++trial) {
    SearchConfig cfg;
    cfg.iterations = 50 + static_cast<int>(meta.below(400));
    cfg.width = 1 + static_cast<int>(meta.below(10));
    cfg.rollout_horizon = static_cast<int>(meta.below(4));
    cfg.mixing = meta.uniform();
    cfg.exploration = meta.uniform(0.0, 2.0);
    const auto m = goal_cell_models(static_cast<int>(meta.below(6)), static_cast<int>(meta.below(6)));
    Scene s = two_box_scene();
    s.object(1).pose = {meta.uniform(0.05, 0.25), meta.uniform(0.05, 0.25), 0.0};
    const double root_score = m.score(s);
    SearchTree tree(s, root_score, root_score >= cfg.threshold);
    const SearchResult r = search(tree, m, cfg, meta.next());
    total += cfg.iterations;
    ASSERT_TRUE(tree.consistent()) << trial;
    EXPECT_EQ(r.root_visits, 1 + cfg.iterations);
    for (std::size_t id = 0; id < tree.size(); ++id) {
      const TreeNode& n = tree.node(static_cast<int>(id));
      EXPECT_LE(n.edges.size(), static_cast<std::size_t>(cfg.width));
      if (id != 0 && n.terminal) {
        EXPECT_TRUE(n.edges.empty());
      }
      EXPECT_TRUE(is_valid(n.scene));
      std::set<ActionSpec> actions;
      for (const auto& e : n.edges) actions.insert(e.action);
      EXPECT_EQ(actions.size(), n.edges.size());
    }
  }
}

TEST(Search, StuckWithoutFeasibleActions) {
  Workspace ws;
  ws.width_m = 0.2;
  ws.depth_m = 0.2;
  ws.grid_w = 2;
  ws.grid_h = 2;
  ws.rotation_bins = 1;
  const Scene s = scene_of({box(1, 0.1, 0.1, 0.0, 0.3, 0.3)}, ws);
  const auto m = goal_cell_models(0, 0);
  try {
    search(s, m, SearchConfig{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "stuck");
  }
  PlannerModels low = m;
  low.score = [](const Scene&) { return 0.1; };
  EXPECT_EQ(plan_episode(s, low, SearchConfig{}, 5, 1).status, EpisodeStatus::stuck);
}

TEST(PlanEpisode, TidyStartAndZeroBudget) {
  Scene s = two_box_scene();
  const auto m = goal_cell_models(0, 0);
  const EpisodeResult tidy = plan_episode(s, m, SearchConfig{}, 10, 1);
  EXPECT_EQ(tidy.status, EpisodeStatus::success);
  EXPECT_EQ(tidy.length, 0);
  EXPECT_EQ(tidy.scenes.size(), 1u);

  const auto far = goal_cell_models(3, 3);
  const EpisodeResult none = plan_episode(s, far, SearchConfig{}, 0, 1);
  EXPECT_EQ(none.status, EpisodeStatus::timeout);
  EXPECT_EQ(none.length, 0);
}

TEST(PlanEpisode, ReachesGoalWithoutInvalidStates) {
  const auto m = goal_cell_models(3, 3);
  SearchConfig cfg;
  cfg.iterations = 100;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EpisodeResult r = plan_episode(two_box_scene(), m, cfg, 10, seed);
    EXPECT_NE(r.status, EpisodeStatus::collision);
    EXPECT_NE(r.status, EpisodeStatus::out_of_bounds);
    EXPECT_EQ(r.status, EpisodeStatus::success) << seed;
    EXPECT_EQ(r.scenes.size(), r.actions.size() + 1);
    for (const auto& sc : r.scenes) EXPECT_TRUE(is_valid(sc));
    EXPECT_EQ(to_json(r)["status"], "success");
  }
}

TEST(SearchConfig, ValidationAndJson) {
  SearchConfig c;
  c.mixing = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = SearchConfig{};
  c.iterations = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SearchConfig{};
  c.width = 3;
  c.mixing = 0.6;
  const SearchConfig back = search_config_from_json(to_json(c));
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.mixing, 0.6);
  EXPECT_EQ(parse_status("failure:stuck"), EpisodeStatus::stuck);
  EXPECT_THROW(parse_status("nope"), Error);
}

}  // namespace
}  // namespace tidy
