#include "tidyplan/eval.hpp"

#include <algorithm>
#include <sstream>

#include "tidyplan/random.hpp"

namespace tidy {

std::string_view to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::tsmcts: return "tsmcts";
    case PlannerKind::random: return "random";
    case PlannerKind::greedy: return "greedy";
  }
  return "tsmcts";
}

PlannerKind parse_planner(std::string_view name) {
  for (auto k : {PlannerKind::tsmcts, PlannerKind::random, PlannerKind::greedy}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown planner: " + std::string(name));
}

std::vector<Template> held_out_templates(const std::vector<Template>& library,
                                         std::uint64_t split_seed) {
  const TemplateSplit split = split_templates(library, split_seed);
  std::vector<Template> out;
  for (const auto& t : library) {
    if (!split.is_train(t.id)) out.push_back(t);
  }
  return out;
}

Template mixed_template(const Template& base, std::uint64_t seed) {
  std::vector<std::string> pool;
  for (const auto& c : category_catalog()) {
    if (!c.is_support) pool.push_back(c.name);
  }
  Rng rng(derive_seed(seed, hash_string(base.id), 0x313dULL));
  Template t = base;
  t.id = base.id + "-mixed";
  t.environment = EnvironmentTag::mixed;
  for (auto& slot : t.slots) {
    if (category_info(slot.category).is_support) continue;
    slot.category = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    slot.alternates.clear();
  }
  t.validate();
  return t;
}

Scene benchmark_scene(const std::vector<Template>& held_out, EnvironmentTag env,
                      int scatter_steps, std::uint64_t seed) {
  std::vector<const Template*> pool;
  for (const auto& t : held_out) {
    if (env == EnvironmentTag::mixed || t.environment == env) pool.push_back(&t);
  }
  if (pool.empty()) throw Error("no templates for " + std::string(to_string(env)));
  Rng rng(derive_seed(seed, 0x5ce4eULL));
  // Substituted categories can make a layout infeasible; draw again.
  for (int attempt = 0; attempt < 50; ++attempt) {
    const Template& base = *pool[static_cast<std::size_t>(rng.below(pool.size()))];
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(attempt));
    try {
      const Template t = env == EnvironmentTag::mixed ? mixed_template(base, s) : base;
      Scene scene = generate_trajectory(t, scatter_steps + 1, s).steps.front().scene;
      scene.environment = env;
      return scene;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error("could not build a benchmark scene");
}

ActionSpec random_action(const Scene& scene, Rng& rng) {
  try {
    return sample_action(uniform_distribution(scene), rng);
  } catch (const Error&) {
    throw Error("stuck");
  }
}

ActionSpec greedy_action(const Scene& scene, const std::function<double(const Scene&)>& score) {
  const auto mask = feasibility_mask(scene);
  PolicyDistribution layout;
  layout.workspace = scene.workspace;
  for (const auto& o : scene.objects) layout.object_ids.push_back(o.id);
  layout.probabilities.resize(mask.size());
  std::optional<ActionSpec> best;
  double best_score = -1.0;
  // Entries are visited in increasing action order only within one object,
  // so ties are settled explicitly.
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const ActionSpec a = layout.action_at(i);
    const double s = score(apply_action(scene, a));
    if (!best || s > best_score || (s == best_score && a < *best)) {
      best = a;
      best_score = s;
    }
  }
  if (!best) throw Error("stuck");
  return *best;
}

BenchmarkReport run_benchmark(const PlannerModels& models, const std::vector<Template>& library,
                              const BenchmarkConfig& config) {
  if (config.episodes_per_env <= 0 || config.environments.empty()) {
    throw Error("empty benchmark");
  }
  config.search.validate();
  const auto held_out = held_out_templates(library, config.split_seed);
  for (const auto env : config.environments) {
    const bool covered = env == EnvironmentTag::mixed
                             ? !held_out.empty()
                             : std::any_of(held_out.begin(), held_out.end(),
                                           [env](const Template& t) { return t.environment == env; });
    if (!covered) throw Error("no templates for " + std::string(to_string(env)));
  }

  BenchmarkReport report;
  report.config = config;
  BenchmarkRow average;
  average.environment = "Average";
  for (const auto env : config.environments) {
    BenchmarkRow row;
    row.environment = std::string(to_string(env));
    for (int e = 0; e < config.episodes_per_env; ++e) {
      const std::uint64_t seed =
          derive_seed(config.seed, hash_string(row.environment), static_cast<std::uint64_t>(e));
      report.episode_seeds.push_back(seed);
      const Scene initial = benchmark_scene(held_out, env, config.scatter_steps, seed);
      const std::uint64_t plan_seed = derive_seed(seed, 0x91a4ULL);
      EpisodeResult result;
      switch (config.planner) {
        case PlannerKind::tsmcts:
          result = plan_episode(initial, models, config.search, config.max_steps, plan_seed);
          break;
        case PlannerKind::random: {
          Rng rng(plan_seed);
          result = run_episode(
              initial, models.score, [&](const Scene& s, int) { return random_action(s, rng); },
              config.search.threshold, config.max_steps);
          break;
        }
        case PlannerKind::greedy:
          result = run_episode(
              initial, models.score,
              [&](const Scene& s, int) { return greedy_action(s, models.score); },
              config.search.threshold, config.max_steps);
          break;
      }
      ++row.episodes;
      row.outcomes[std::string(to_string(result.status))] += 1;
      row.mean_tidiness += result.final_score;
      row.mean_length += result.length;
      if (result.status == EpisodeStatus::success) row.success_rate += 1.0;
    }
    average.episodes += row.episodes;
    average.success_rate += row.success_rate;
    average.mean_tidiness += row.mean_tidiness;
    average.mean_length += row.mean_length;
    for (const auto& [k, v] : row.outcomes) average.outcomes[k] += v;
    const double n = row.episodes;
    row.success_rate /= n;
    row.mean_tidiness /= n;
    row.mean_length /= n;
    report.rows.push_back(std::move(row));
  }
  const double n = average.episodes;
  average.success_rate /= n;
  average.mean_tidiness /= n;
  average.mean_length /= n;
  report.rows.push_back(std::move(average));
  return report;
}

Json to_json(const BenchmarkReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"environment", row.environment},
                    {"episodes", row.episodes},
                    {"success_rate", row.success_rate},
                    {"mean_tidiness", row.mean_tidiness},
                    {"mean_length", row.mean_length},
                    {"outcomes", row.outcomes}});
  }
  Json envs = Json::array();
  for (const auto e : r.config.environments) envs.push_back(std::string(to_string(e)));
  return Json{{"rows", rows},
              {"config",
               {{"environments", envs},
                {"episodes_per_env", r.config.episodes_per_env},
                {"max_steps", r.config.max_steps},
                {"scatter_steps", r.config.scatter_steps},
                {"split_seed", r.config.split_seed},
                {"seed", r.config.seed},
                {"planner", std::string(to_string(r.config.planner))},
                {"search", to_json(r.config.search)}}},
              {"episode_seeds", r.episode_seeds}};
}

std::string format_report_csv(const BenchmarkReport& r) {
  static constexpr std::array<EpisodeStatus, 4> kFailures = {
      EpisodeStatus::collision, EpisodeStatus::out_of_bounds, EpisodeStatus::stuck,
      EpisodeStatus::timeout};
  std::ostringstream out;
  out.precision(6);
  out << "Environment,Success Rate,Tidiness Score,Length";
  for (const auto s : kFailures) out << ',' << to_string(s);
  out << '\n';
  for (const auto& row : r.rows) {
    out << row.environment << ',' << row.success_rate << ',' << row.mean_tidiness << ','
        << row.mean_length;
    for (const auto s : kFailures) {
      const auto it = row.outcomes.find(std::string(to_string(s)));
      out << ',' << (it == row.outcomes.end() ? 0 : it->second);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace tidy
