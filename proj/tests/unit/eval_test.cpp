#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tidyplan/eval.hpp"

namespace tidy {
namespace {

using testing::box;
using testing::scene_of;

Workspace grid6() {
  Workspace ws;
  ws.width_m = 0.6;
  ws.depth_m = 0.6;
  ws.grid_w = 6;
  ws.grid_h = 6;
  ws.rotation_bins = 2;
  return ws;
}

// High score once object 1 is in the right half of the table.
double right_half(const Scene& s) { return s.object(1).pose.x > 0.3 ? 0.9 : 0.2; }

// Share of axis-aligned objects, squeezed below the default threshold.
double aligned_share(const Scene& s) {
  double k = 0.0;
  for (const auto& o : s.objects) {
    const double r = std::fmod(o.pose.theta, 90.0);
    k += (r < 1e-6 || 90.0 - r < 1e-6) ? 1.0 : 0.0;
  }
  return 0.8 * k / static_cast<double>(s.objects.size());
}

PlannerModels cheap_models() {
  PlannerModels m;
  m.score = aligned_share;
  m.policy = [](const Scene& s) { return uniform_distribution(s); };
  return m;
}

BenchmarkConfig small_config(PlannerKind planner) {
  BenchmarkConfig c;
  c.episodes_per_env = 3;
  c.max_steps = 3;
  c.planner = planner;
  c.search.iterations = 10;
  c.seed = 8;
  return c;
}

TEST(PlannerKind, NamesRoundTrip) {
  for (auto k : {PlannerKind::tsmcts, PlannerKind::random, PlannerKind::greedy}) {
    EXPECT_EQ(parse_planner(to_string(k)), k);
  }
  EXPECT_THROW(parse_planner("oracle"), Error);
}

TEST(GreedyAction, SolvesOneMoveScene) {
  const Scene s = scene_of({box(1, 0.05, 0.05, 0.0, 0.03, 0.03)}, grid6());
  const ActionSpec a = greedy_action(s, right_half);
  EXPECT_GE(right_half(apply_action(s, a)), 0.85);
  // Smallest action among the ties.
  EXPECT_EQ(a, (ActionSpec{1, 3, 0, 0}));
  const EpisodeResult r = run_episode(
      s, right_half, [&](const Scene& sc, int) { return greedy_action(sc, right_half); }, 0.85, 5);
  EXPECT_EQ(r.status, EpisodeStatus::success);
  EXPECT_EQ(r.length, 1);
}

TEST(RandomAction, OneStepSuccessMatchesFeasibleShare) {
  const Scene s = scene_of({box(1, 0.05, 0.05, 0.0, 0.03, 0.03), box(2, 0.45, 0.45, 0.0, 0.03, 0.03)},
                           grid6());
  const PolicyDistribution layout = uniform_distribution(s);
  double feasible = 0.0, good = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!layout.mask[i]) continue;
    feasible += 1.0;
    good += right_half(apply_action(s, layout.action_at(i))) >= 0.85 ? 1.0 : 0.0;
  }
  Rng rng(21);
  int hits = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const ActionSpec a = random_action(s, rng);
    EXPECT_TRUE(layout.mask[layout.index_of(a)]);
    hits += right_half(apply_action(s, a)) >= 0.85;
  }
  EXPECT_NEAR(static_cast<double>(hits) / n, good / feasible, 0.05);
}

TEST(RandomAction, StuckWhenNothingFits) {
  Workspace ws = grid6();
  const Scene s = scene_of({box(1, 0.3, 0.3, 0.0, 0.5, 0.5)}, ws);
  Rng rng(0);
  try {
    random_action(s, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "stuck");
  }
  EXPECT_THROW(greedy_action(s, right_half), Error);
}

TEST(BenchmarkScene, HeldOutAndValid) {
  const auto held = held_out_templates(testing::library(), 0);
  const TemplateSplit split = split_templates(testing::library(), 0);
  for (const auto& t : held) EXPECT_FALSE(split.is_train(t.id));
  for (auto env : {EnvironmentTag::coffee, EnvironmentTag::dining, EnvironmentTag::office,
                   EnvironmentTag::bathroom, EnvironmentTag::mixed}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Scene s = benchmark_scene(held, env, 4, seed);
      EXPECT_TRUE(is_valid(s));
      EXPECT_EQ(s.environment, env);
      EXPECT_EQ(Json(s).dump(), Json(benchmark_scene(held, env, 4, seed)).dump());
    }
  }
  EXPECT_THROW(benchmark_scene({}, EnvironmentTag::coffee, 4, 0), Error);
}

TEST(RunBenchmark, EmptyBenchmark) {
  BenchmarkConfig c = small_config(PlannerKind::random);
  c.episodes_per_env = 0;
  try {
    run_benchmark(cheap_models(), testing::library(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty benchmark");
  }
}

TEST(RunBenchmark, OutcomesSumToEpisodes) {
  for (auto planner : {PlannerKind::random, PlannerKind::greedy, PlannerKind::tsmcts}) {
    const BenchmarkConfig c = small_config(planner);
    const BenchmarkReport r = run_benchmark(cheap_models(), testing::library(), c);
    ASSERT_EQ(r.rows.size(), c.environments.size() + 1);
    EXPECT_EQ(r.rows.back().environment, "Average");
    for (const auto& row : r.rows) {
      const int total = std::accumulate(row.outcomes.begin(), row.outcomes.end(), 0,
                                        [](int acc, const auto& kv) { return acc + kv.second; });
      EXPECT_EQ(total, row.episodes);
      EXPECT_GE(row.success_rate, 0.0);
      EXPECT_LE(row.success_rate, 1.0);
      EXPECT_LE(row.mean_length, c.max_steps);
      EXPECT_EQ(row.outcomes.count("failure:collision"), 0u);
      EXPECT_EQ(row.outcomes.count("failure:out-of-bounds"), 0u);
    }
    EXPECT_EQ(r.rows.back().episodes, c.episodes_per_env * static_cast<int>(c.environments.size()));
    EXPECT_EQ(r.episode_seeds.size(), static_cast<std::size_t>(r.rows.back().episodes));
  }
}

TEST(RunBenchmark, ReportBytesAreReproducible) {
  const BenchmarkConfig c = small_config(PlannerKind::tsmcts);
  const auto a = run_benchmark(cheap_models(), testing::library(), c);
  const auto b = run_benchmark(cheap_models(), testing::library(), c);
  EXPECT_EQ(format_report_csv(a), format_report_csv(b));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  const std::string csv = format_report_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "Environment,Success Rate,Tidiness Score,Length,failure:collision,"
            "failure:out-of-bounds,failure:stuck,failure:timeout");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(MixedTemplate, KeepsGeometryAndSupports) {
  const auto held = held_out_templates(testing::library(), 0);
  ASSERT_FALSE(held.empty());
  const Template m = mixed_template(held.front(), 3);
  EXPECT_EQ(m.environment, EnvironmentTag::mixed);
  ASSERT_EQ(m.slots.size(), held.front().slots.size());
  for (std::size_t i = 0; i < m.slots.size(); ++i) {
    if (category_info(held.front().slots[i].category).is_support) {
      EXPECT_EQ(m.slots[i].category, held.front().slots[i].category);
    }
  }
}

}  // namespace
}  // namespace tidy
