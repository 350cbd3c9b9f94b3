#include <benchmark/benchmark.h>

#include "tidyplan/dataset.hpp"
#include "tidyplan/discriminator.hpp"
#include "tidyplan/ellipse.hpp"
#include "tidyplan/mcts.hpp"
#include "tidyplan/policy.hpp"
#include "tidyplan/templates.hpp"

namespace {

using namespace tidy;

const std::vector<Template>& library() {
  static const auto lib = load_template_library(TIDYPLAN_TEMPLATE_DIR);
  return lib;
}

// Messy starting scene from the template with the most slots.
const Scene& messy_scene() {
  static const Scene s = [] {
    const Template* big = &library().front();
    for (const auto& t : library()) {
      if (t.slots.size() > big->slots.size()) big = &t;
    }
    return generate_trajectory(*big, 5, 3).steps.front().scene;
  }();
  return s;
}

const Discriminator& untrained_disc() {
  static const Discriminator d(nn::Mlp({static_cast<int>(features::size()), 128, 64, 1},
                                       {nn::Activation::relu, nn::Activation::relu,
                                        nn::Activation::sigmoid},
                                       1));
  return d;
}

const TidyingPolicy& untrained_policy() {
  static const TidyingPolicy p = [] {
    const Workspace ws;
    nn::Mlp head({static_cast<int>(policy_feature_size()), 128,
                  static_cast<int>(ws.action_count())},
                 {nn::Activation::relu, nn::Activation::identity}, 2);
    nn::Mlp place({static_cast<int>(2 * placement::kSize), 16, 1},
                  {nn::Activation::relu, nn::Activation::identity}, 3);
    return TidyingPolicy(std::move(head), std::move(place));
  }();
  return p;
}

void BM_CheckOverlap(benchmark::State& state) {
  const Scene& s = messy_scene();
  for (auto _ : state) benchmark::DoNotOptimize(check_overlap(s));
  state.counters["objects"] = static_cast<double>(s.objects.size());
}
BENCHMARK(BM_CheckOverlap);

void BM_Featurize(benchmark::State& state) {
  const Scene& s = messy_scene();
  for (auto _ : state) benchmark::DoNotOptimize(featurize(s));
}
BENCHMARK(BM_Featurize);

void BM_DiscriminatorScore(benchmark::State& state) {
  const Scene& s = messy_scene();
  for (auto _ : state) benchmark::DoNotOptimize(untrained_disc().score(s));
}
BENCHMARK(BM_DiscriminatorScore);

void BM_FeasibilityMask(benchmark::State& state) {
  const Scene& s = messy_scene();
  for (auto _ : state) benchmark::DoNotOptimize(feasibility_mask(s));
}
BENCHMARK(BM_FeasibilityMask)->Unit(benchmark::kMicrosecond);

void BM_PolicyDistribution(benchmark::State& state) {
  const Scene& s = messy_scene();
  for (auto _ : state) benchmark::DoNotOptimize(untrained_policy().distribution(s));
}
BENCHMARK(BM_PolicyDistribution)->Unit(benchmark::kMicrosecond);

void BM_FitEllipse(benchmark::State& state) {
  const auto pts = footprint_points(messy_scene().objects.front(), 64);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ellipse(pts));
}
BENCHMARK(BM_FitEllipse);

void BM_Search(benchmark::State& state) {
  PlannerModels m;
  m.score = [](const Scene& s) { return untrained_disc().score(s); };
  m.policy = [](const Scene& s) { return untrained_policy().distribution(s); };
  SearchConfig cfg;
  cfg.iterations = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(search(messy_scene(), m, cfg, seed++));
}
BENCHMARK(BM_Search)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
