#include "tidyplan/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tidy {

void SearchConfig::validate() const {
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (!(mixing >= 0.0 && mixing <= 1.0)) throw Error("mixing must lie in [0, 1]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
  if (rollout_horizon < 0) throw Error("rollout horizon must be >= 0");
  if (width < 1) throw Error("width must be >= 1");
  if (!(exploration >= 0.0)) throw Error("exploration must be >= 0");
}

Json to_json(const SearchConfig& c) {
  return Json{{"iterations", c.iterations}, {"exploration", c.exploration},
              {"mixing", c.mixing},         {"rollout_horizon", c.rollout_horizon},
              {"threshold", c.threshold},   {"width", c.width}};
}

SearchConfig search_config_from_json(const Json& j) {
  SearchConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.exploration = j.value("exploration", c.exploration);
  c.mixing = j.value("mixing", c.mixing);
  c.rollout_horizon = j.value("rollout_horizon", c.rollout_horizon);
  c.threshold = j.value("threshold", c.threshold);
  c.width = j.value("width", c.width);
  c.validate();
  return c;
}

SearchTree::SearchTree(Scene root, double root_score, bool terminal) {
  TreeNode n;
  n.scene = std::move(root);
  n.score = root_score;
  n.terminal = terminal;
  n.visits = 1;
  nodes_.push_back(std::move(n));
}

int SearchTree::add(TreeNode n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

bool SearchTree::consistent() const {
  for (const auto& n : nodes_) {
    if (n.visits == 0) continue;
    int sum = 0;
    for (const auto& e : n.edges) {
      if (e.visits < 0 || !std::isfinite(e.value)) return false;
      sum += e.visits;
    }
    if (n.visits != 1 + sum) return false;
  }
  return true;
}

std::size_t uct_select(const TreeNode& node, double c) {
  if (node.edges.empty()) throw Error("leaf node");
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  const double log_n = std::log(static_cast<double>(std::max(node.visits, 1)));
  for (std::size_t i = 0; i < node.edges.size(); ++i) {
    const Edge& e = node.edges[i];
    const double v = e.visits == 0
                         ? std::numeric_limits<double>::infinity()
                         : e.value / e.visits + c * std::sqrt(2.0 * log_n / e.visits);
    if (v > best_value || (v == best_value && e.action < node.edges[best].action)) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

std::optional<int> expand(SearchTree& tree, int node_id, const PlannerModels& models,
                          const SearchConfig& config, Rng& rng) {
  {
    TreeNode& n = tree.node(node_id);
    if (n.fully_expanded) return std::nullopt;
    if (n.edges.size() >= static_cast<std::size_t>(config.width)) {
      n.fully_expanded = true;
      return std::nullopt;
    }
    if (!n.distribution) {
      try {
        n.distribution = models.policy(n.scene);
      } catch (const Error&) {
        n.fully_expanded = true;
        return std::nullopt;
      }
    }
  }
  for (int attempt = 0; attempt < config.duplicate_retries; ++attempt) {
    const TreeNode& n = tree.node(node_id);
    const ActionSpec a = sample_action(*n.distribution, rng);
    const bool seen = std::any_of(n.edges.begin(), n.edges.end(),
                                  [&](const Edge& e) { return e.action == a; });
    if (seen) continue;
    TreeNode child;
    child.scene = apply_action(n.scene, a);
    child.score = models.score(child.scene);
    child.terminal = child.score >= config.threshold;
    const int id = tree.add(std::move(child));
    tree.node(node_id).edges.push_back({a, id, 0, 0.0});
    return id;
  }
  tree.node(node_id).fully_expanded = true;
  return std::nullopt;
}

namespace {

Simulation rollout(const Scene& scene, double start_score, const PolicyDistribution* first,
                   const PlannerModels& models, int horizon, double threshold, Rng& rng) {
  Simulation sim;
  sim.value = start_score;
  if (start_score >= threshold) {
    sim.outcome = 1;
    return sim;
  }
  Scene s = scene;
  for (int t = 0; t < horizon; ++t) {
    ActionSpec a;
    try {
      if (t == 0 && first != nullptr) {
        a = sample_action(*first, rng);
      } else {
        a = sample_action(models.policy(s), rng);
      }
    } catch (const Error&) {
      break;
    }
    s = apply_action(s, a);
    if (models.score(s) >= threshold) {
      sim.outcome = 1;
      break;
    }
  }
  return sim;
}

}  // namespace

Simulation simulate(const Scene& scene, double start_score, const PlannerModels& models,
                    int horizon, double threshold, Rng& rng) {
  return rollout(scene, start_score, nullptr, models, horizon, threshold, rng);
}

void backpropagate(SearchTree& tree, const std::vector<PathStep>& path, int leaf,
                   const Simulation& sim, double lambda) {
  const double increment = (1.0 - lambda) * sim.value + lambda * sim.outcome;
  for (const auto& step : path) {
    TreeNode& n = tree.node(step.node);
    Edge& e = n.edges.at(step.edge);
    n.visits += 1;
    e.visits += 1;
    e.value += increment;
  }
  TreeNode& l = tree.node(leaf);
  if (l.visits == 0) l.visits = 1;
}

SearchResult search(SearchTree& tree, const PlannerModels& models, const SearchConfig& config,
                    std::uint64_t rng_seed) {
  config.validate();
  {
    TreeNode& root = tree.node(0);
    if (!root.distribution) {
      try {
        root.distribution = models.policy(root.scene);
      } catch (const Error&) {
        throw Error("stuck");
      }
    }
  }
  for (int k = 0; k < config.iterations; ++k) {
    Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(k)));
    std::vector<PathStep> path;
    int node = 0;
    int leaf = 0;
    for (;;) {
      const TreeNode& n = tree.node(node);
      if (node != 0 && n.terminal) {
        leaf = node;
        break;
      }
      if (!n.fully_expanded) {
        if (const auto child = expand(tree, node, models, config, rng)) {
          path.push_back({node, tree.node(node).edges.size() - 1});
          leaf = *child;
          break;
        }
      }
      const TreeNode& m = tree.node(node);
      if (m.edges.empty()) {
        leaf = node;
        break;
      }
      const std::size_t e = uct_select(m, config.exploration);
      path.push_back({node, e});
      node = m.edges[e].child;
    }

    TreeNode& l = tree.node(leaf);
    const PolicyDistribution* first = nullptr;
    if (!l.terminal && l.score < config.threshold && config.rollout_horizon > 0 &&
        !l.fully_expanded) {
      if (!l.distribution) {
        try {
          l.distribution = models.policy(l.scene);
        } catch (const Error&) {
          l.fully_expanded = true;
        }
      }
      if (l.distribution) first = &*l.distribution;
    }
    const Simulation sim = rollout(l.scene, l.score, first, models, config.rollout_horizon,
                                   config.threshold, rng);
    backpropagate(tree, path, leaf, sim, config.mixing);
  }

  const TreeNode& root = tree.node(0);
  if (root.edges.empty()) throw Error("stuck");
  std::size_t best = 0;
  for (std::size_t i = 1; i < root.edges.size(); ++i) {
    const Edge& e = root.edges[i];
    const Edge& b = root.edges[best];
    if (e.visits > b.visits || (e.visits == b.visits && e.action < b.action)) best = i;
  }
  SearchResult out;
  out.best = root.edges[best].action;
  out.nodes = tree.size();
  out.root_visits = root.visits;
  for (const auto& e : root.edges) out.root_edges.push_back({e.action, e.visits, e.value});
  return out;
}

SearchResult search(const Scene& root, const PlannerModels& models, const SearchConfig& config,
                    std::uint64_t rng_seed) {
  const double s = models.score(root);
  SearchTree tree(root, s, s >= config.threshold);
  return search(tree, models, config, rng_seed);
}

std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::success: return "success";
    case EpisodeStatus::collision: return "failure:collision";
    case EpisodeStatus::out_of_bounds: return "failure:out-of-bounds";
    case EpisodeStatus::stuck: return "failure:stuck";
    case EpisodeStatus::timeout: return "failure:timeout";
  }
  return "failure:timeout";
}

EpisodeStatus parse_status(std::string_view s) {
  for (auto st : {EpisodeStatus::success, EpisodeStatus::collision, EpisodeStatus::out_of_bounds,
                  EpisodeStatus::stuck, EpisodeStatus::timeout}) {
    if (to_string(st) == s) return st;
  }
  throw Error("unknown episode status: " + std::string(s));
}

Json to_json(const EpisodeResult& r) {
  Json scenes = Json::array();
  for (const auto& s : r.scenes) scenes.push_back(s);
  Json actions = Json::array();
  for (const auto& a : r.actions) actions.push_back(a);
  return Json{{"status", std::string(to_string(r.status))},
              {"final_score", r.final_score},
              {"length", r.length},
              {"scores", r.scores},
              {"actions", actions},
              {"scenes", scenes}};
}

EpisodeResult run_episode(const Scene& initial, const std::function<double(const Scene&)>& score,
                          const StepPlanner& planner, double threshold, int max_steps) {
  if (initial.objects.empty()) throw Error("no objects");
  EpisodeResult r;
  r.scenes.push_back(initial);
  r.scores.push_back(score(initial));
  for (int step = 0;; ++step) {
    if (r.scores.back() >= threshold) {
      r.status = EpisodeStatus::success;
      break;
    }
    if (step >= max_steps) {
      r.status = EpisodeStatus::timeout;
      break;
    }
    ActionSpec a;
    try {
      a = planner(r.scenes.back(), step);
    } catch (const Error& e) {
      if (std::string_view(e.what()) != "stuck") throw;
      r.status = EpisodeStatus::stuck;
      break;
    }
    Scene next = apply_action(r.scenes.back(), a);
    r.actions.push_back(a);
    r.scores.push_back(score(next));
    r.scenes.push_back(std::move(next));
    if (!check_overlap(r.scenes.back()).empty()) {
      r.status = EpisodeStatus::collision;
      break;
    }
    if (!in_bounds(r.scenes.back()).empty()) {
      r.status = EpisodeStatus::out_of_bounds;
      break;
    }
  }
  r.final_score = r.scores.back();
  r.length = static_cast<int>(r.actions.size());
  return r;
}

EpisodeResult plan_episode(const Scene& initial, const PlannerModels& models,
                           const SearchConfig& config, int max_steps, std::uint64_t rng_seed) {
  config.validate();
  const StepPlanner planner = [&](const Scene& s, int step) {
    return search(s, models, config, derive_seed(rng_seed, static_cast<std::uint64_t>(step))).best;
  };
  return run_episode(initial, models.score, planner, config.threshold, max_steps);
}

}  // namespace tidy
