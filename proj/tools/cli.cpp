#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "service.hpp"
#include "tidyplan/discriminator.hpp"
#include "tidyplan/eval.hpp"
#include "tidyplan/mcts.hpp"
#include "tidyplan/policy.hpp"

#ifndef TIDYPLAN_TEMPLATE_DIR
#define TIDYPLAN_TEMPLATE_DIR "data/templates"
#endif

namespace tidy {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct GenDataArgs {
  std::string templates = TIDYPLAN_TEMPLATE_DIR;
  std::string out;
  int trajectories = 120;
  int T = 5;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenDataArgs& a) {
  DatasetConfig cfg;
  cfg.trajectories_per_template = a.trajectories;
  cfg.T = a.T;
  cfg.seed = a.seed;
  const Dataset ds = build_dataset(load_template_library(a.templates), cfg);
  write_dataset(ds, a.out);
  std::cout << format_stats_table(ds.report);
  return 0;
}

struct TrainDiscArgs {
  std::string data;
  std::string out;
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

int run_train_disc(const TrainDiscArgs& a) {
  DiscriminatorConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.seed = a.seed;
  const auto records = load_disc_records(fs::path(a.data) / "disc.jsonl");
  const auto trained = train_discriminator(records, cfg);
  nn::save_checkpoint(a.out, trained.checkpoint);

  std::ostringstream curves;
  curves.precision(17);
  curves << "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < trained.history.train.size(); ++e) {
    curves << e + 1 << ',' << trained.history.train[e] << ',';
    if (e < trained.history.validation.size()) curves << trained.history.validation[e];
    curves << '\n';
  }
  write_text(fs::path(a.out).replace_extension(".loss.csv"), curves.str());

  const Discriminator disc(trained.checkpoint.net);
  std::vector<double> scores;
  std::vector<double> labels;
  for (const auto& r : records) {
    if (r.split != Split::validation) continue;
    scores.push_back(disc.score(r.scene));
    labels.push_back(r.label);
  }
  if (!scores.empty()) {
    const std::vector<double> thresholds = {0.5, 0.7, 0.8, 0.85, 0.9, 0.95};
    std::cout << "threshold,precision,recall\n";
    for (const auto& row : threshold_sweep_scores(scores, labels, thresholds)) {
      std::cout << row.threshold << ',';
      if (row.precision) std::cout << *row.precision;
      std::cout << ',' << row.recall << '\n';
    }
  }
  return 0;
}

struct TrainPolicyArgs {
  std::string data;
  std::string out;
  IqlConfig cfg;
};

int run_train_policy(const TrainPolicyArgs& a) {
  const auto records = load_rl_records(fs::path(a.data) / "rl.jsonl");
  const IqlResult r = train_iql(records, a.cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  nn::save_checkpoint(dir / "policy.json", r.policy);
  nn::save_checkpoint(dir / "q.json", r.q);
  nn::save_checkpoint(dir / "v.json", r.v);
  std::ostringstream curves;
  curves.precision(17);
  curves << "step,value_loss,q_loss,policy_loss\n";
  for (std::size_t i = 0; i < r.history.value_loss.size(); ++i) {
    curves << i + 1 << ',' << r.history.value_loss[i] << ',' << r.history.q_loss[i] << ','
           << r.history.policy_loss[i] << '\n';
  }
  write_text(dir / "iql_loss.csv", curves.str());
  std::cout << "wrote " << (dir / "policy.json").string() << ", q.json, v.json, iql_loss.csv\n";
  return 0;
}

struct SearchArgs {
  SearchConfig search;
  int max_steps = 10;
};

void add_search_options(CLI::App* app, SearchArgs& s) {
  app->add_option("--k", s.search.iterations, "Search iterations per step")->capture_default_str();
  app->add_option("--c", s.search.exploration, "UCT exploration constant")->capture_default_str();
  app->add_option("--lambda", s.search.mixing, "Mixing of value and rollout outcome")
      ->capture_default_str();
  app->add_option("--xi", s.search.threshold, "Tidiness threshold")->capture_default_str();
  app->add_option("--rollout", s.search.rollout_horizon, "Rollout horizon")->capture_default_str();
  app->add_option("--width", s.search.width, "Children per node")->capture_default_str();
  app->add_option("--max-steps", s.max_steps, "Episode step limit")->capture_default_str();
}

struct Models {
  Discriminator disc;
  std::optional<TidyingPolicy> policy;

  PlannerModels planner() const {
    PlannerModels m;
    m.score = [this](const Scene& s) { return disc.score(s); };
    if (policy) {
      m.policy = [this](const Scene& s) { return policy->distribution(s); };
    } else {
      m.policy = [](const Scene& s) { return uniform_distribution(s); };
    }
    return m;
  }
};

struct PlanArgs {
  std::string scene;
  std::string disc;
  std::string policy;
  std::string out;
  std::uint64_t seed = 0;
  SearchArgs search;
};

int run_plan(const PlanArgs& a) {
  Models models{Discriminator(nn::load_checkpoint(a.disc).net), load_policy(a.policy)};
  const Scene scene = load_scene(a.scene);
  const EpisodeResult r =
      plan_episode(scene, models.planner(), a.search.search, a.search.max_steps, a.seed);
  Json j = to_json(r);
  j["config"] = to_json(a.search.search);
  j["seed"] = a.seed;
  if (a.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(a.out, j);
    std::cout << to_string(r.status) << " in " << r.length << " steps, final score "
              << r.final_score << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string envs = "coffee,dining,office,bathroom,mixed";
  std::string planner = "tsmcts";
  std::string templates = TIDYPLAN_TEMPLATE_DIR;
  std::string disc;
  std::string policy;
  std::string out;
  int episodes = 100;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  SearchArgs search;
};

int run_eval(const EvalArgs& a) {
  BenchmarkConfig cfg;
  cfg.environments.clear();
  std::stringstream ss(a.envs);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) cfg.environments.push_back(parse_environment(tok));
  }
  cfg.episodes_per_env = a.episodes;
  cfg.planner = parse_planner(a.planner);
  cfg.seed = a.seed;
  cfg.split_seed = a.split_seed;
  cfg.search = a.search.search;
  cfg.max_steps = a.search.max_steps;
  if (cfg.planner == PlannerKind::tsmcts && a.policy.empty()) {
    throw Error("--policy is required for the tsmcts planner");
  }
  Models models{Discriminator(nn::load_checkpoint(a.disc).net), std::nullopt};
  if (!a.policy.empty()) models.policy = load_policy(a.policy);
  const BenchmarkReport report =
      run_benchmark(models.planner(), load_template_library(a.templates), cfg);
  const std::string csv = format_report_csv(report);
  write_json_file(a.out + ".json", to_json(report));
  write_text(a.out + ".csv", csv);
  std::cout << csv;
  return 0;
}

int run_stats(const std::string& data) {
  const auto records = load_disc_records(fs::path(data) / "disc.jsonl");
  if (records.empty()) throw Error("empty dataset");
  int T = 0;
  for (const auto& r : records) T = std::max(T, r.step + 1);
  std::cout << format_stats_table(compute_stats(records, T));
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string scenes;
  std::string store;
};

int run_serve(const ServeArgs& a) {
  std::string store = a.store;
  if (store.empty()) {
    const char* env = std::getenv("TIDYPLAN_STORE");
    store = env != nullptr && *env != '\0' ? env : "sessions.jsonl";
  }
  SessionStore sessions(load_scene_set(a.scenes), store);
  return serve_sessions(a.host, a.port, sessions);
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Tidiness-guided tabletop rearrangement planning"};
  app.name("tidyplan");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate untidying trajectories");
  gen_cmd->add_option("--templates", gen.templates, "Template directory")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--trajectories", gen.trajectories, "Trajectories per template")
      ->capture_default_str();
  gen_cmd->add_option("--T", gen.T, "Trajectory length")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainDiscArgs disc;
  auto* disc_cmd = app.add_subcommand("train-disc", "Train the tidiness discriminator");
  disc_cmd->add_option("--data", disc.data, "Dataset directory")->required();
  disc_cmd->add_option("--out", disc.out, "Checkpoint path")->required();
  disc_cmd->add_option("--epochs", disc.epochs)->capture_default_str();
  disc_cmd->add_option("--batch", disc.batch)->capture_default_str();
  disc_cmd->add_option("--lr", disc.lr)->capture_default_str();
  disc_cmd->add_option("--seed", disc.seed)->capture_default_str();

  TrainPolicyArgs pol;
  auto* pol_cmd = app.add_subcommand("train-policy", "Train the policy with implicit Q-learning");
  pol_cmd->add_option("--data", pol.data, "Dataset directory")->required();
  pol_cmd->add_option("--out", pol.out, "Output directory")->required();
  pol_cmd->add_option("--tau", pol.cfg.tau, "Expectile")->capture_default_str();
  pol_cmd->add_option("--beta", pol.cfg.beta, "Inverse temperature")->capture_default_str();
  pol_cmd->add_option("--gamma", pol.cfg.gamma, "Discount")->capture_default_str();
  pol_cmd->add_option("--steps", pol.cfg.steps, "Gradient steps")->capture_default_str();
  pol_cmd->add_option("--batch", pol.cfg.batch_size, "Minibatch size")->capture_default_str();
  pol_cmd->add_option("--seed", pol.cfg.seed)->capture_default_str();

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Tidy one scene with tree search");
  plan_cmd->add_option("--scene", plan.scene, "Scene JSON")->required();
  plan_cmd->add_option("--disc", plan.disc, "Discriminator checkpoint")->required();
  plan_cmd->add_option("--policy", plan.policy, "Policy checkpoint")->required();
  plan_cmd->add_option("--seed", plan.seed)->capture_default_str();
  plan_cmd->add_option("--out", plan.out, "Episode JSON (stdout when omitted)");
  add_search_options(plan_cmd, plan.search);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Run the benchmark");
  eval_cmd->add_option("--envs", ev.envs, "Comma-separated environments")->capture_default_str();
  eval_cmd->add_option("--episodes", ev.episodes, "Episodes per environment")->capture_default_str();
  eval_cmd->add_option("--planner", ev.planner, "tsmcts, random or greedy")
      ->check(CLI::IsMember({"tsmcts", "random", "greedy"}))
      ->capture_default_str();
  eval_cmd->add_option("--disc", ev.disc, "Discriminator checkpoint")->required();
  eval_cmd->add_option("--policy", ev.policy, "Policy checkpoint");
  eval_cmd->add_option("--templates", ev.templates, "Template directory")->capture_default_str();
  eval_cmd->add_option("--split-seed", ev.split_seed, "Seed of the template split")
      ->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report prefix (.json and .csv)")->required();
  add_search_options(eval_cmd, ev.search);

  std::string stats_data;
  auto* stats_cmd = app.add_subcommand("stats", "Print dataset counts per environment");
  stats_cmd->add_option("--data", stats_data, "Dataset directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve scenes and record editing sessions");
  serve_cmd->add_option("--scenes", serve.scenes, "Scene directory")->required();
  serve_cmd->add_option("--port", serve.port)->capture_default_str();
  serve_cmd->add_option("--host", serve.host)->capture_default_str();
  serve_cmd->add_option("--store", serve.store, "Session store (default $TIDYPLAN_STORE)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*disc_cmd) return run_train_disc(disc);
    if (*pol_cmd) return run_train_policy(pol);
    if (*plan_cmd) return run_plan(plan);
    if (*eval_cmd) return run_eval(ev);
    if (*stats_cmd) return run_stats(stats_data);
    if (*serve_cmd) return run_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace tidy
