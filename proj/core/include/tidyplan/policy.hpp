#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tidyplan/dataset.hpp"
#include "tidyplan/nn.hpp"
#include "tidyplan/random.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

/// featurize(scene without the object) followed by the object descriptor
/// [category one-hot, half extents, x, y, theta]. A single-object scene uses
/// an all-zero scene part.
std::vector<double> policy_features(const Scene& scene, int object_id);
std::size_t policy_feature_size();

/// Categorical distribution over a = (object n, x, y, r). Entries are laid out
/// as ((n * grid_w + x) * grid_h + y) * R + r where n is the object's position
/// in the scene.
struct PolicyDistribution {
  Workspace workspace;
  std::vector<int> object_ids;
  std::vector<double> logits;
  std::vector<std::uint8_t> mask;
  std::vector<double> probabilities;

  std::size_t size() const { return probabilities.size(); }
  std::size_t index_of(const ActionSpec& a) const;
  ActionSpec action_at(std::size_t index) const;
  double probability(const ActionSpec& a) const;
};

/// 1 where moving the object there keeps the scene valid against all other
/// objects at their current poses, 0 otherwise.
std::vector<std::uint8_t> feasibility_mask(const Scene& scene);

/// Applies the feasibility mask and a joint softmax. Throws "no feasible action".
PolicyDistribution make_distribution(const Scene& scene, std::vector<double> logits);
/// Same, with a precomputed mask.
PolicyDistribution make_distribution(const Scene& scene, std::vector<double> logits,
                                     std::vector<std::uint8_t> mask);
/// Uniform over feasible placements.
PolicyDistribution uniform_distribution(const Scene& scene);

ActionSpec sample_action(const PolicyDistribution& dist, std::uint64_t rng_seed);
ActionSpec sample_action(const PolicyDistribution& dist, Rng& rng);

/// Geometry of one candidate placement relative to the rest of the scene:
///   [0..3)  nearest other object: center distance / diagonal, sector
///           residual, edge gap (scaled, clipped)
///   [3..6)  same for the second nearest
///   [6]     center lands on another object's support surface
///   [7]     a support candidate would carry another object's center
///   [8..10) offset from the other objects' centroid (x / width, y / depth)
///   [10..12) whole-scene centroid after the move, relative to the table center
///   [12]    candidate stays in the object's current cell
namespace placement {
inline constexpr std::size_t kSize = 13;
}

/// Placement features for every entry of one object, in (x, y, r) order.
/// Infeasible entries are left as zeros when a mask is supplied.
std::vector<double> placement_features(const Scene& scene, std::size_t object_index,
                                       std::span<const std::uint8_t> mask = {});
/// Placement features of the object at its current pose.
std::vector<double> current_placement_features(const Scene& scene, std::size_t object_index);

/// Tidying policy pi. Each object's logits are the sum of a dense head over
/// policy_features (H * W * R outputs) and a shared placement scorer over
/// [candidate placement features, current placement features].
class TidyingPolicy {
 public:
  TidyingPolicy() = default;
  TidyingPolicy(nn::Mlp head, nn::Mlp placement);

  PolicyDistribution distribution(const Scene& scene) const;
  /// Unnormalized logits in distribution layout (mask not applied).
  std::vector<double> logits(const Scene& scene, std::span<const std::uint8_t> mask) const;

  const nn::Mlp& head() const { return head_; }
  const nn::Mlp& placement() const { return placement_; }
  nn::Mlp& head() { return head_; }
  nn::Mlp& placement() { return placement_; }

 private:
  nn::Mlp head_;
  nn::Mlp placement_;
};

/// The policy checkpoint stores the head as the primary network and the
/// placement scorer under meta["placement"].
nn::Checkpoint to_checkpoint(const TidyingPolicy& policy, nn::AdamState head_state = {});
TidyingPolicy policy_from_checkpoint(const nn::Checkpoint& ckpt);
TidyingPolicy load_policy(const std::filesystem::path& path);

struct IqlConfig {
  double tau = 0.7;
  double beta = 3.0;
  double gamma = 0.95;
  double polyak = 0.005;
  double weight_clip = 100.0;
  int steps = 1500;
  int batch_size = 32;
  double lr_value = 1e-3;
  double lr_policy = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> value_hidden = {64, 64};
  std::vector<int> head_hidden = {128};
  std::vector<int> placement_hidden = {16};
};

struct IqlHistory {
  std::vector<double> value_loss;
  std::vector<double> q_loss;
  std::vector<double> policy_loss;
};

struct IqlResult {
  nn::Checkpoint q;
  nn::Checkpoint v;
  nn::Checkpoint policy;
  IqlHistory history;
};

/// Input of Q: policy_features(s, a.object) followed by (x / W, y / H, r / R).
std::vector<double> q_features(const Scene& scene, const ActionSpec& action);

/// Implicit Q-learning on the train split. Alternates expectile regression of
/// V toward the target Q, TD regression of Q toward r + gamma V(s'), and
/// advantage-weighted likelihood for the policy. Throws "divergence at step k".
IqlResult train_iql(const std::vector<RLRecord>& records, const IqlConfig& config);

/// exp(beta * advantage) clipped to [0, clip].
double advantage_weight(double advantage, double beta, double clip);

}  // namespace tidy
