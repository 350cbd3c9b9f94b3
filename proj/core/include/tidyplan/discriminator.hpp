#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tidyplan/dataset.hpp"
#include "tidyplan/nn.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

/// Fixed-length, permutation-invariant scene statistics. Layout:
///   [0..5)   pairwise sector-alignment residual: mean/min/max over pairs,
///            mean/max over nearest-neighbour pairs
///   [5..8)   orientation residual to the nearest table axis: mean/min/max
///   [8..11)  nearest-neighbour distance / diagonal: mean/variance/max
///   [11]     fraction of pairs with illegal overlap
///   [12]     out-of-bounds fraction
///   [13..16) centroid offset from workspace center (x, y), RMS spread
///   [16..16+V) category histogram (fractions), then N / 9
///   [last]   entropy of the relation-label histogram over ordered pairs
namespace features {
inline constexpr std::size_t kSectorBegin = 0;
inline constexpr std::size_t kOrientationBegin = 5;
inline constexpr std::size_t kGapBegin = 8;
inline constexpr std::size_t kOverlap = 11;
inline constexpr std::size_t kOutOfBounds = 12;
inline constexpr std::size_t kCentroidBegin = 13;
inline constexpr std::size_t kHistogramBegin = 16;
std::size_t size();
}  // namespace features

/// Residual of a center offset to its nearest 45 degree sector center, in [0, 1].
double sector_residual(Vec2 offset);
/// Residual of an orientation to the nearest table axis, in [0, 1].
double orientation_residual(double theta_deg);

/// Throws "no objects" for an empty scene.
std::vector<double> featurize(const Scene& scene);

struct DiscriminatorConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 64};
};

struct LossHistory {
  std::vector<double> train;
  std::vector<double> validation;  // empty when there is no validation data
};

/// Tidiness score function: featurize -> MLP -> sigmoid.
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(nn::Mlp net);

  /// Score in [0, 1].
  double score(const Scene& scene) const;
  double score_features(std::span<const double> f) const;
  const nn::Mlp& net() const { return net_; }

 private:
  nn::Mlp net_;
};

struct DiscriminatorTraining {
  nn::Checkpoint checkpoint;
  LossHistory history;
};

/// Minibatch Adam on mean squared error to the labels of the train split.
/// Throws "divergence" on a non-finite loss.
DiscriminatorTraining train_discriminator(const std::vector<DiscRecord>& records,
                                          const DiscriminatorConfig& config);

struct SweepRow {
  double threshold = 0.0;
  std::optional<double> precision;  // undefined without predicted positives
  double recall = 0.0;
  std::size_t predicted_positive = 0;
};

/// Positives are fully tidied scenes (label 1). A scene is predicted tidy
/// when its score >= threshold. Throws "degenerate sweep" without positives.
std::vector<SweepRow> threshold_sweep(const Discriminator& disc,
                                      std::span<const Scene> scenes,
                                      std::span<const double> labels,
                                      std::span<const double> thresholds);
/// Same sweep on precomputed scores.
std::vector<SweepRow> threshold_sweep_scores(std::span<const double> scores,
                                             std::span<const double> labels,
                                             std::span<const double> thresholds);

}  // namespace tidy
