#include "tidyplan/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tidyplan/discriminator.hpp"
#include "tidyplan/templates.hpp"

namespace tidy {

namespace {

constexpr std::size_t kDescriptorExtra = 5;  // half extents (2) + pose (3)
constexpr double kGapScale = 0.05;
constexpr double kSeparationMargin = 1e-7;

std::pair<double, double> unit_heading(double deg) {
  const double w = wrap_degrees(deg);
  if (w == 0.0) return {1.0, 0.0};
  if (w == 90.0) return {0.0, 1.0};
  if (w == 180.0) return {-1.0, 0.0};
  if (w == 270.0) return {0.0, -1.0};
  const double r = w * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

struct Body {
  Vec2 center;
  double c = 1.0;
  double s = 0.0;
  Vec2 half;
  bool support = false;
  Vec2 lo;
  Vec2 hi;

  static Body of(const ObjectInstance& o) {
    Body b;
    b.center = o.center();
    std::tie(b.c, b.s) = unit_heading(o.pose.theta);
    b.half = o.half_extents;
    b.support = o.is_support;
    const auto corners = o.corners();
    b.lo = b.hi = corners[0];
    for (const Vec2 p : corners) {
      b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
      b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
    }
    return b;
  }

  // Half-width of the footprint projected on unit direction u.
  double extent_along(Vec2 u) const {
    return std::abs(u.x * c + u.y * s) * half.x + std::abs(-u.x * s + u.y * c) * half.y;
  }

  bool contains(Vec2 p) const {
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    return std::abs(c * dx + s * dy) <= half.x + 1e-12 &&
           std::abs(-s * dx + c * dy) <= half.y + 1e-12;
  }
};

bool aabb_separated(const Body& a, const Body& b) {
  return a.hi.x < b.lo.x - kSeparationMargin || b.hi.x < a.lo.x - kSeparationMargin ||
         a.hi.y < b.lo.y - kSeparationMargin || b.hi.y < a.lo.y - kSeparationMargin;
}

// Number of bins whose footprints are distinct; bin r and r + R/2 describe
// the same rectangle when R is even.
int distinct_bins(int R) { return R % 2 == 0 ? R / 2 : R; }

struct SceneGeometry {
  std::vector<Body> bodies;
  Vec2 center_sum;
};

SceneGeometry geometry_of(const Scene& scene) {
  SceneGeometry g;
  for (const auto& o : scene.objects) {
    g.bodies.push_back(Body::of(o));
    g.center_sum = g.center_sum + o.center();
  }
  return g;
}

void fill_placement(const Scene& scene, const SceneGeometry& geo, std::size_t self,
                    const Body& cand, std::pair<int, int> current_cell,
                    std::pair<int, int> cell, double* out) {
  const auto& ws = scene.workspace;
  const double diag = ws.diagonal();
  const std::size_t n = geo.bodies.size();
  const Vec2 c = cand.center;

  double d1 = std::numeric_limits<double>::infinity();
  double d2 = d1;
  std::size_t j1 = n;
  std::size_t j2 = n;
  bool on_support = false;
  bool hosting = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == self) continue;
    const Body& o = geo.bodies[j];
    const double d = std::hypot(o.center.x - c.x, o.center.y - c.y);
    if (d < d1) {
      d2 = d1;
      j2 = j1;
      d1 = d;
      j1 = j;
    } else if (d < d2) {
      d2 = d;
      j2 = j;
    }
    if (o.support && o.contains(c)) on_support = true;
    if (cand.support && cand.contains(o.center)) hosting = true;
  }

  const auto neighbour = [&](std::size_t j, double d, double* f) {
    if (j == n) {
      f[0] = 1.0;
      f[1] = 0.0;
      f[2] = 4.0;
      return;
    }
    const Body& o = geo.bodies[j];
    f[0] = d / diag;
    if (d < 1e-12) {
      f[1] = 0.0;
      f[2] = -2.0;
      return;
    }
    const Vec2 off = o.center - c;
    const Vec2 u{off.x / d, off.y / d};
    const bool stacked = (o.support && o.contains(c)) || (cand.support && cand.contains(o.center));
    f[1] = stacked ? 0.0 : sector_residual(off);
    const double gap = d - cand.extent_along(u) - o.extent_along(u);
    f[2] = std::clamp(gap / kGapScale, -2.0, 4.0);
  };
  neighbour(j1, d1, out);
  neighbour(j2, d2, out + 3);
  out[6] = on_support ? 1.0 : 0.0;
  out[7] = hosting ? 1.0 : 0.0;

  const Vec2 others = geo.center_sum - geo.bodies[self].center;
  if (n > 1) {
    const double k = static_cast<double>(n - 1);
    out[8] = (c.x - others.x / k) / ws.width_m;
    out[9] = (c.y - others.y / k) / ws.depth_m;
  } else {
    out[8] = 0.0;
    out[9] = 0.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out[10] = (others.x + c.x) * inv_n / ws.width_m - 0.5;
  out[11] = (others.y + c.y) * inv_n / ws.depth_m - 0.5;
  out[12] = cell == current_cell ? 1.0 : 0.0;
}

Body candidate_body(const ObjectInstance& obj, const Workspace& ws, int x, int y, int r) {
  ObjectInstance cand = obj;
  cand.pose = action_pose(ws, {obj.id, x, y, r});
  return Body::of(cand);
}

}  // namespace

std::size_t policy_feature_size() {
  return features::size() + category_catalog().size() + kDescriptorExtra;
}

std::vector<double> policy_features(const Scene& scene, int object_id) {
  const ObjectInstance& obj = scene.object(object_id);
  std::vector<double> out;
  out.reserve(policy_feature_size());
  if (scene.objects.size() > 1) {
    out = featurize(without_object(scene, object_id));
  } else {
    out.assign(features::size(), 0.0);
  }
  const std::size_t base = out.size();
  out.resize(base + category_catalog().size(), 0.0);
  out[base + category_index(obj.category)] = 1.0;
  out.push_back(obj.half_extents.x);
  out.push_back(obj.half_extents.y);
  out.push_back(obj.pose.x);
  out.push_back(obj.pose.y);
  out.push_back(obj.pose.theta);
  return out;
}

std::size_t PolicyDistribution::index_of(const ActionSpec& a) const {
  const auto it = std::find(object_ids.begin(), object_ids.end(), a.object_id);
  if (it == object_ids.end()) throw Error("no such object");
  if (!action_in_bounds(workspace, a)) throw Error("action out of bounds");
  const auto n = static_cast<std::size_t>(it - object_ids.begin());
  return ((n * static_cast<std::size_t>(workspace.grid_w) + static_cast<std::size_t>(a.x_idx)) *
              static_cast<std::size_t>(workspace.grid_h) +
          static_cast<std::size_t>(a.y_idx)) *
             static_cast<std::size_t>(workspace.rotation_bins) +
         static_cast<std::size_t>(a.rotation_bin);
}

ActionSpec PolicyDistribution::action_at(std::size_t index) const {
  if (index >= probabilities.size()) throw Error("action index out of range");
  const auto R = static_cast<std::size_t>(workspace.rotation_bins);
  const auto H = static_cast<std::size_t>(workspace.grid_h);
  const auto W = static_cast<std::size_t>(workspace.grid_w);
  ActionSpec a;
  a.rotation_bin = static_cast<int>(index % R);
  index /= R;
  a.y_idx = static_cast<int>(index % H);
  index /= H;
  a.x_idx = static_cast<int>(index % W);
  a.object_id = object_ids[index / W];
  return a;
}

double PolicyDistribution::probability(const ActionSpec& a) const {
  return probabilities[index_of(a)];
}

std::vector<std::uint8_t> feasibility_mask(const Scene& scene) {
  const auto& ws = scene.workspace;
  const std::size_t n = scene.objects.size();
  const std::size_t per = ws.action_count();
  const int R = ws.rotation_bins;
  const int distinct = distinct_bins(R);
  std::vector<std::uint8_t> mask(n * per, 0);
  const SceneGeometry geo = geometry_of(scene);

  for (std::size_t i = 0; i < n; ++i) {
    const ObjectInstance& obj = scene.objects[i];
    ObjectInstance cand = obj;
    for (int x = 0; x < ws.grid_w; ++x) {
      for (int y = 0; y < ws.grid_h; ++y) {
        for (int r = 0; r < distinct; ++r) {
          cand.pose = action_pose(ws, {obj.id, x, y, r});
          bool ok = footprint_in_bounds(ws, cand);
          if (ok) {
            const Body cb = Body::of(cand);
            for (std::size_t j = 0; j < n && ok; ++j) {
              if (j == i || aabb_separated(cb, geo.bodies[j])) continue;
              ok = !illegal_overlap(cand, scene.objects[j]);
            }
          }
          const std::size_t base =
              i * per + (static_cast<std::size_t>(x) * static_cast<std::size_t>(ws.grid_h) +
                         static_cast<std::size_t>(y)) *
                            static_cast<std::size_t>(R);
          mask[base + static_cast<std::size_t>(r)] = ok ? 1 : 0;
          if (distinct != R) mask[base + static_cast<std::size_t>(r + distinct)] = ok ? 1 : 0;
        }
      }
    }
  }
  return mask;
}

PolicyDistribution make_distribution(const Scene& scene, std::vector<double> logits,
                                     std::vector<std::uint8_t> mask) {
  const std::size_t total = scene.objects.size() * scene.workspace.action_count();
  if (logits.size() != total || mask.size() != total) {
    throw Error("distribution size mismatch");
  }
  PolicyDistribution d;
  d.workspace = scene.workspace;
  for (const auto& o : scene.objects) d.object_ids.push_back(o.id);
  const nn::Vector l = Eigen::Map<const nn::Vector>(logits.data(), static_cast<Eigen::Index>(total));
  const nn::Vector p = nn::masked_softmax(l, mask);
  d.probabilities.assign(p.data(), p.data() + p.size());
  d.logits = std::move(logits);
  d.mask = std::move(mask);
  return d;
}

PolicyDistribution make_distribution(const Scene& scene, std::vector<double> logits) {
  return make_distribution(scene, std::move(logits), feasibility_mask(scene));
}

PolicyDistribution uniform_distribution(const Scene& scene) {
  const std::size_t total = scene.objects.size() * scene.workspace.action_count();
  return make_distribution(scene, std::vector<double>(total, 0.0));
}

ActionSpec sample_action(const PolicyDistribution& dist, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = dist.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!dist.mask[i]) continue;
    acc += dist.probabilities[i];
    last = i;
    if (u < acc) return dist.action_at(i);
  }
  if (last == dist.size()) throw Error("no feasible action");
  return dist.action_at(last);
}

ActionSpec sample_action(const PolicyDistribution& dist, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_action(dist, rng);
}

std::vector<double> placement_features(const Scene& scene, std::size_t object_index,
                                       std::span<const std::uint8_t> mask) {
  const auto& ws = scene.workspace;
  const int R = ws.rotation_bins;
  const int distinct = distinct_bins(R);
  const std::size_t per = ws.action_count();
  const std::size_t k = placement::kSize;
  const SceneGeometry geo = geometry_of(scene);
  const ObjectInstance& obj = scene.objects.at(object_index);
  const auto current = ws.snap_cell(obj.center());
  std::vector<double> out(per * k, 0.0);
  std::vector<Body> bins;
  for (int r = 0; r < distinct; ++r) bins.push_back(candidate_body(obj, ws, 0, 0, r));

  for (int x = 0; x < ws.grid_w; ++x) {
    for (int y = 0; y < ws.grid_h; ++y) {
      const Vec2 c = ws.cell_center(x, y);
      const std::size_t cell =
          (static_cast<std::size_t>(x) * static_cast<std::size_t>(ws.grid_h) +
           static_cast<std::size_t>(y)) *
          static_cast<std::size_t>(R);
      for (int r = 0; r < distinct; ++r) {
        const std::size_t e = cell + static_cast<std::size_t>(r);
        const std::size_t twin = cell + static_cast<std::size_t>(r + distinct);
        const bool live = mask.empty() || mask[object_index * per + e] ||
                          (distinct != R && mask[object_index * per + twin]);
        if (!live) continue;
        Body b = bins[static_cast<std::size_t>(r)];
        b.center = c;
        fill_placement(scene, geo, object_index, b, current, {x, y}, &out[e * k]);
        if (distinct != R) std::copy_n(&out[e * k], k, &out[twin * k]);
      }
    }
  }
  return out;
}

std::vector<double> current_placement_features(const Scene& scene, std::size_t object_index) {
  const SceneGeometry geo = geometry_of(scene);
  const auto& obj = scene.objects.at(object_index);
  const auto cell = scene.workspace.snap_cell(obj.center());
  std::vector<double> out(placement::kSize, 0.0);
  fill_placement(scene, geo, object_index, geo.bodies[object_index], cell, cell, out.data());
  return out;
}

TidyingPolicy::TidyingPolicy(nn::Mlp head, nn::Mlp placement)
    : head_(std::move(head)), placement_(std::move(placement)) {
  if (head_.input_size() != policy_feature_size()) {
    throw Error("policy head has the wrong input size");
  }
  if (placement_.input_size() != 2 * placement::kSize || placement_.output_size() != 1) {
    throw Error("placement scorer has the wrong shape");
  }
}

std::vector<double> TidyingPolicy::logits(const Scene& scene,
                                          std::span<const std::uint8_t> mask) const {
  const auto& ws = scene.workspace;
  const std::size_t per = ws.action_count();
  if (head_.output_size() != per) throw Error("policy head does not match the workspace");
  const std::size_t n = scene.objects.size();
  const std::size_t k = placement::kSize;
  std::vector<double> out(n * per, 0.0);

  nn::Matrix inputs(static_cast<Eigen::Index>(policy_feature_size()), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = policy_features(scene, scene.objects[i].id);
    inputs.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const nn::Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
  }
  const nn::Matrix head_out = head_.forward_batch(inputs);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> live;
    for (std::size_t e = 0; e < per; ++e) {
      if (mask.empty() || mask[i * per + e]) live.push_back(e);
    }
    for (const std::size_t e : live) out[i * per + e] = head_out(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i));
    if (live.empty()) continue;
    const auto cand = placement_features(scene, i, mask);
    const auto cur = current_placement_features(scene, i);
    nn::Matrix x(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(live.size()));
    for (std::size_t c = 0; c < live.size(); ++c) {
      for (std::size_t f = 0; f < k; ++f) {
        x(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = cand[live[c] * k + f];
        x(static_cast<Eigen::Index>(k + f), static_cast<Eigen::Index>(c)) = cur[f];
      }
    }
    const nn::Matrix score = placement_.forward_batch(x);
    for (std::size_t c = 0; c < live.size(); ++c) {
      out[i * per + live[c]] += score(0, static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

PolicyDistribution TidyingPolicy::distribution(const Scene& scene) const {
  auto mask = feasibility_mask(scene);
  auto l = logits(scene, mask);
  return make_distribution(scene, std::move(l), std::move(mask));
}

nn::Checkpoint to_checkpoint(const TidyingPolicy& policy, nn::AdamState head_state) {
  nn::Checkpoint ckpt;
  ckpt.net = policy.head();
  ckpt.optimizer = std::move(head_state);
  nn::Checkpoint placement;
  placement.net = policy.placement();
  ckpt.meta = {{"kind", "policy"}, {"placement", nn::to_json(placement)}};
  return ckpt;
}

TidyingPolicy policy_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (!ckpt.meta.contains("placement")) throw Error("not a policy checkpoint");
  return TidyingPolicy(ckpt.net, nn::checkpoint_from_json(ckpt.meta.at("placement")).net);
}

TidyingPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_checkpoint(nn::load_checkpoint(path));
}

std::vector<double> q_features(const Scene& scene, const ActionSpec& action) {
  const auto& ws = scene.workspace;
  if (!action_in_bounds(ws, action)) throw Error("action out of bounds");
  auto f = policy_features(scene, action.object_id);
  f.push_back(static_cast<double>(action.x_idx) / ws.grid_w);
  f.push_back(static_cast<double>(action.y_idx) / ws.grid_h);
  f.push_back(static_cast<double>(action.rotation_bin) / ws.rotation_bins);
  return f;
}

double advantage_weight(double advantage, double beta, double clip) {
  return std::min(std::exp(beta * advantage), clip);
}

namespace {

nn::Mlp make_net(std::size_t in, const std::vector<int>& hidden, std::size_t out,
                 std::uint64_t seed) {
  std::vector<int> sizes{static_cast<int>(in)};
  std::vector<nn::Activation> acts;
  for (int h : hidden) {
    sizes.push_back(h);
    acts.push_back(nn::Activation::relu);
  }
  sizes.push_back(static_cast<int>(out));
  acts.push_back(nn::Activation::identity);
  return nn::Mlp(sizes, acts, seed);
}

nn::Matrix columns(const std::vector<std::vector<double>>& rows) {
  nn::Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const nn::Vector>(rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
  }
  return m;
}

struct PreparedTransition {
  const RLTransition* tr = nullptr;
  std::vector<double> v_state;
  std::vector<double> v_next;
  std::vector<double> q_input;
};

// One AWR term: forward both policy networks on a state, accumulate exact
// gradients of -weight * log p(action) scaled by inv_b. Returns the loss term,
// or a negative value when the action is masked out.
double awr_term(const TidyingPolicy& policy, const Scene& scene, const ActionSpec& action,
                double weight, double inv_b, nn::Gradients& g_head, nn::Gradients& g_place) {
  const auto& ws = scene.workspace;
  const std::size_t per = ws.action_count();
  const std::size_t n = scene.objects.size();
  const std::size_t k = placement::kSize;
  const auto mask = feasibility_mask(scene);

  PolicyDistribution probe;
  probe.workspace = ws;
  for (const auto& o : scene.objects) probe.object_ids.push_back(o.id);
  probe.probabilities.resize(n * per);
  const std::size_t target = probe.index_of(action);
  if (!mask[target]) return -1.0;

  nn::Matrix inputs(static_cast<Eigen::Index>(policy_feature_size()), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = policy_features(scene, scene.objects[i].id);
    inputs.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const nn::Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
  }
  nn::Mlp::Tape head_tape;
  const nn::Matrix head_out = policy.head().forward_tape(inputs, head_tape);

  std::vector<std::size_t> live;
  for (std::size_t e = 0; e < n * per; ++e) {
    if (mask[e]) live.push_back(e);
  }
  nn::Matrix x(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(live.size()));
  {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cand = placement_features(scene, i, mask);
      const auto cur = current_placement_features(scene, i);
      for (; c < live.size() && live[c] / per == i; ++c) {
        const std::size_t e = live[c] % per;
        for (std::size_t f = 0; f < k; ++f) {
          x(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = cand[e * k + f];
          x(static_cast<Eigen::Index>(k + f), static_cast<Eigen::Index>(c)) = cur[f];
        }
      }
    }
  }
  nn::Mlp::Tape place_tape;
  const nn::Matrix place_out = policy.placement().forward_tape(x, place_tape);

  nn::Vector logits(static_cast<Eigen::Index>(live.size()));
  std::size_t target_pos = live.size();
  for (std::size_t c = 0; c < live.size(); ++c) {
    const std::size_t i = live[c] / per;
    const std::size_t e = live[c] % per;
    logits(static_cast<Eigen::Index>(c)) =
        head_out(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) +
        place_out(0, static_cast<Eigen::Index>(c));
    if (live[c] == target) target_pos = c;
  }
  const nn::Vector p = nn::masked_softmax(logits, {});
  const double loss = -weight * std::log(p(static_cast<Eigen::Index>(target_pos)));

  nn::Vector dl = p * (weight * inv_b);
  dl(static_cast<Eigen::Index>(target_pos)) -= weight * inv_b;
  nn::Matrix d_head = nn::Matrix::Zero(head_out.rows(), head_out.cols());
  nn::Matrix d_place(1, static_cast<Eigen::Index>(live.size()));
  for (std::size_t c = 0; c < live.size(); ++c) {
    const std::size_t i = live[c] / per;
    const std::size_t e = live[c] % per;
    d_head(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) = dl(static_cast<Eigen::Index>(c));
    d_place(0, static_cast<Eigen::Index>(c)) = dl(static_cast<Eigen::Index>(c));
  }
  policy.head().backward(head_tape, d_head, g_head);
  policy.placement().backward(place_tape, d_place, g_place);
  return loss;
}

}  // namespace

IqlResult train_iql(const std::vector<RLRecord>& records, const IqlConfig& config) {
  std::vector<PreparedTransition> data;
  for (const auto& r : records) {
    if (r.split != Split::train) continue;
    PreparedTransition p;
    p.tr = &r.transition;
    data.push_back(std::move(p));
  }
  if (data.empty()) throw Error("empty training split");
  if (config.batch_size < 1 || config.steps < 0) throw Error("invalid training config");
  const Workspace ws = data.front().tr->state.workspace;
  for (auto& p : data) {
    if (!(p.tr->state.workspace == ws)) throw Error("mixed workspaces in dataset");
    p.v_state = featurize(p.tr->state);
    p.v_next = featurize(p.tr->next_state);
    p.q_input = q_features(p.tr->state, p.tr->action);
  }

  nn::Mlp v = make_net(features::size(), config.value_hidden, 1, derive_seed(config.seed, 1));
  nn::Mlp q = make_net(policy_feature_size() + 3, config.value_hidden, 1, derive_seed(config.seed, 2));
  nn::Mlp head = make_net(policy_feature_size(), config.head_hidden, ws.action_count(),
                          derive_seed(config.seed, 3));
  nn::Mlp place = make_net(2 * placement::kSize, config.placement_hidden, 1,
                           derive_seed(config.seed, 4));
  {
    std::vector<std::vector<double>> vs;
    std::vector<std::vector<double>> qs;
    std::vector<std::vector<double>> hs;
    std::vector<std::vector<double>> ps;
    for (const auto& p : data) {
      vs.push_back(p.v_state);
      qs.push_back(p.q_input);
    }
    const std::size_t probe = std::min<std::size_t>(data.size(), 64);
    for (std::size_t t = 0; t < probe; ++t) {
      const Scene& s = data[t * data.size() / probe].tr->state;
      const auto mask = feasibility_mask(s);
      for (std::size_t i = 0; i < s.objects.size(); ++i) {
        hs.push_back(policy_features(s, s.objects[i].id));
        const auto cand = placement_features(s, i, mask);
        const auto cur = current_placement_features(s, i);
        const std::size_t per = ws.action_count();
        for (std::size_t e = 0; e < per; e += 7) {
          if (!mask[i * per + e]) continue;
          std::vector<double> row(cand.begin() + static_cast<std::ptrdiff_t>(e * placement::kSize),
                                  cand.begin() + static_cast<std::ptrdiff_t>((e + 1) * placement::kSize));
          row.insert(row.end(), cur.begin(), cur.end());
          ps.push_back(std::move(row));
        }
      }
    }
    nn::fit_input_normalization(v, columns(vs));
    nn::fit_input_normalization(q, columns(qs));
    nn::fit_input_normalization(head, columns(hs));
    nn::fit_input_normalization(place, columns(ps));
  }
  nn::Mlp q_target = q;
  TidyingPolicy policy(std::move(head), std::move(place));

  nn::AdamState adam_v;
  nn::AdamState adam_q;
  nn::AdamState adam_head;
  nn::AdamState adam_place;
  Rng rng(derive_seed(config.seed, 0x1b1ULL));
  IqlResult result;
  const auto B = static_cast<std::size_t>(config.batch_size);
  const nn::LossConfig expectile{nn::LossKind::expectile, config.tau};
  const nn::LossConfig td{nn::LossKind::td, config.tau};

  std::vector<std::size_t> batch(B);
  std::vector<nn::LossSample> v_samples(B);
  std::vector<nn::LossSample> q_samples(B);
  for (int step = 0; step < config.steps; ++step) {
    for (auto& b : batch) b = static_cast<std::size_t>(rng.below(data.size()));
    const auto fail = [step] { return Error("divergence at step " + std::to_string(step)); };

    // Value: expectile regression toward the target critic.
    for (std::size_t i = 0; i < B; ++i) {
      const auto& p = data[batch[i]];
      v_samples[i].inputs = Eigen::Map<const nn::Vector>(p.v_state.data(), static_cast<Eigen::Index>(p.v_state.size()));
      v_samples[i].target = q_target.forward(p.q_input)(0);
    }
    nn::Gradients gv = v.zero_gradients();
    const double lv = nn::loss_and_gradients(v, expectile, v_samples, &gv);
    if (!std::isfinite(lv)) throw fail();
    try {
      nn::adam_step(v, gv, adam_v, config.lr_value);
    } catch (const Error&) {
      throw fail();
    }

    // Critic: TD regression with terminal bootstrap 0.
    for (std::size_t i = 0; i < B; ++i) {
      const auto& p = data[batch[i]];
      const double next = p.tr->terminal ? 0.0 : v.forward(p.v_next)(0);
      q_samples[i].inputs = Eigen::Map<const nn::Vector>(p.q_input.data(), static_cast<Eigen::Index>(p.q_input.size()));
      q_samples[i].target = p.tr->reward + config.gamma * next;
    }
    nn::Gradients gq = q.zero_gradients();
    const double lq = nn::loss_and_gradients(q, td, q_samples, &gq);
    if (!std::isfinite(lq)) throw fail();
    try {
      nn::adam_step(q, gq, adam_q, config.lr_value);
    } catch (const Error&) {
      throw fail();
    }
    nn::polyak_update(q_target, q, config.polyak);

    // Policy: advantage-weighted likelihood.
    nn::Gradients gh = policy.head().zero_gradients();
    nn::Gradients gp = policy.placement().zero_gradients();
    const double inv_b = 1.0 / static_cast<double>(B);
    double lp = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      const auto& p = data[batch[i]];
      const double adv = q_target.forward(p.q_input)(0) - v.forward(p.v_state)(0);
      const double w = advantage_weight(adv, config.beta, config.weight_clip);
      const double term = awr_term(policy, p.tr->state, p.tr->action, w, inv_b, gh, gp);
      if (term >= 0.0) lp += term * inv_b;
    }
    if (!std::isfinite(lp)) throw fail();
    try {
      nn::adam_step(policy.head(), gh, adam_head, config.lr_policy);
      nn::adam_step(policy.placement(), gp, adam_place, config.lr_policy);
    } catch (const Error&) {
      throw fail();
    }

    result.history.value_loss.push_back(lv);
    result.history.q_loss.push_back(lq);
    result.history.policy_loss.push_back(lp);
  }

  const Json meta_common = {{"tau", config.tau},       {"beta", config.beta},
                            {"gamma", config.gamma},   {"polyak", config.polyak},
                            {"steps", config.steps},   {"batch_size", config.batch_size}};
  result.v.net = std::move(v);
  result.v.optimizer = std::move(adam_v);
  result.v.rng_seed = config.seed;
  result.v.step = config.steps;
  result.v.meta = meta_common;
  result.v.meta["kind"] = "value";
  result.q.net = std::move(q);
  result.q.optimizer = std::move(adam_q);
  result.q.rng_seed = config.seed;
  result.q.step = config.steps;
  result.q.meta = meta_common;
  result.q.meta["kind"] = "critic";
  nn::Checkpoint target;
  target.net = std::move(q_target);
  result.q.meta["target"] = nn::to_json(target);
  result.policy = to_checkpoint(policy, std::move(adam_head));
  result.policy.rng_seed = config.seed;
  result.policy.step = config.steps;
  for (const auto& [key, value] : meta_common.items()) result.policy.meta[key] = value;
  return result;
}

}  // namespace tidy
