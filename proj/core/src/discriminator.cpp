#include "tidyplan/discriminator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "tidyplan/random.hpp"
#include "tidyplan/templates.hpp"

namespace tidy {

namespace features {
std::size_t size() { return kHistogramBegin + category_catalog().size() + 2; }
}  // namespace features

double sector_residual(Vec2 offset) {
  double angle = std::atan2(offset.y, offset.x) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 360.0;
  const double d = std::fmod(angle, 45.0);
  return std::min(d, 45.0 - d) / 22.5;
}

double orientation_residual(double theta_deg) {
  const double d = std::fmod(wrap_degrees(theta_deg), 90.0);
  return std::min(d, 90.0 - d) / 45.0;
}

namespace {

struct Aggregate {
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double min() const { return n ? lo : 0.0; }
  double max() const { return n ? hi : 0.0; }
};

}  // namespace

std::vector<double> featurize(const Scene& scene) {
  const auto& objs = scene.objects;
  const std::size_t n = objs.size();
  if (n == 0) throw Error("no objects");
  const auto& ws = scene.workspace;
  const double diag = ws.diagonal();
  std::vector<double> f(features::size(), 0.0);

  Aggregate pair_sector;
  std::size_t overlaps = 0;
  std::size_t pairs = 0;
  std::vector<double> nn_dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> nn_index(n, 0);
  std::array<double, kRelationKindCount> relation_hist{};
  std::size_t relation_total = 0;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      const Vec2 off = objs[j].center() - objs[i].center();
      const double d = std::hypot(off.x, off.y);
      if (d < nn_dist[i]) {
        nn_dist[i] = d;
        nn_index[i] = j;
      }
      if (d < nn_dist[j]) {
        nn_dist[j] = d;
        nn_index[j] = i;
      }
      const bool on_pair = legal_on_placement(objs[i], objs[j]);
      if (!on_pair && d > 0.0) pair_sector.add(sector_residual(off));
      if (illegal_overlap(objs[i], objs[j])) ++overlaps;
      if (d > 0.0 || objs[i].is_support || objs[j].is_support) {
        relation_hist[static_cast<std::size_t>(classify_relation(objs[i], objs[j]))] += 1.0;
        relation_hist[static_cast<std::size_t>(classify_relation(objs[j], objs[i]))] += 1.0;
        relation_total += 2;
      }
    }
  }

  Aggregate nn_sector;
  Aggregate nn_gap;
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& other = objs[nn_index[i]];
      const Vec2 off = other.center() - objs[i].center();
      const bool on_pair = legal_on_placement(objs[i], other);
      nn_sector.add(on_pair || nn_dist[i] == 0.0 ? 0.0 : sector_residual(off));
      nn_gap.add(nn_dist[i] / diag);
    }
  }
  double gap_var = 0.0;
  if (nn_gap.n > 0) {
    const double m = nn_gap.mean();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = nn_dist[i] / diag - m;
      gap_var += g * g;
    }
    gap_var /= static_cast<double>(nn_gap.n);
  }

  Aggregate orient;
  Vec2 centroid{};
  std::size_t oob = 0;
  for (const auto& o : objs) {
    orient.add(orientation_residual(o.pose.theta));
    centroid = centroid + o.center();
    if (!footprint_in_bounds(ws, o)) ++oob;
  }
  centroid = centroid * (1.0 / static_cast<double>(n));
  double spread = 0.0;
  for (const auto& o : objs) {
    const Vec2 d = o.center() - centroid;
    spread += d.x * d.x + d.y * d.y;
  }
  spread = std::sqrt(spread / static_cast<double>(n)) / diag;

  using namespace features;
  f[kSectorBegin + 0] = pair_sector.mean();
  f[kSectorBegin + 1] = pair_sector.min();
  f[kSectorBegin + 2] = pair_sector.max();
  f[kSectorBegin + 3] = nn_sector.mean();
  f[kSectorBegin + 4] = nn_sector.max();
  f[kOrientationBegin + 0] = orient.mean();
  f[kOrientationBegin + 1] = orient.min();
  f[kOrientationBegin + 2] = orient.max();
  f[kGapBegin + 0] = nn_gap.mean();
  f[kGapBegin + 1] = gap_var;
  f[kGapBegin + 2] = nn_gap.max();
  f[kOverlap] = pairs ? static_cast<double>(overlaps) / static_cast<double>(pairs) : 0.0;
  f[kOutOfBounds] = static_cast<double>(oob) / static_cast<double>(n);
  f[kCentroidBegin + 0] = centroid.x / ws.width_m - 0.5;
  f[kCentroidBegin + 1] = centroid.y / ws.depth_m - 0.5;
  f[kCentroidBegin + 2] = spread;

  const std::size_t vocab = category_catalog().size();
  for (const auto& o : objs) {
    f[kHistogramBegin + category_index(o.category)] += 1.0 / static_cast<double>(n);
  }
  f[kHistogramBegin + vocab] = static_cast<double>(n) / 9.0;

  double entropy = 0.0;
  if (relation_total > 0) {
    for (const double c : relation_hist) {
      if (c > 0.0) {
        const double p = c / static_cast<double>(relation_total);
        entropy -= p * std::log(p);
      }
    }
    entropy /= std::log(static_cast<double>(kRelationKindCount));
  }
  f[kHistogramBegin + vocab + 1] = entropy;
  return f;
}

Discriminator::Discriminator(nn::Mlp net) : net_(std::move(net)) {
  if (net_.input_size() != features::size() || net_.output_size() != 1) {
    throw Error("discriminator network has the wrong shape");
  }
}

double Discriminator::score_features(std::span<const double> f) const {
  return net_.forward(f)(0);
}

double Discriminator::score(const Scene& scene) const {
  const auto f = featurize(scene);
  return score_features(f);
}

namespace {

nn::LossSample make_sample(const std::vector<double>& f, double label) {
  nn::LossSample s;
  s.inputs = Eigen::Map<const nn::Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
  s.target = label;
  return s;
}

}  // namespace

DiscriminatorTraining train_discriminator(const std::vector<DiscRecord>& records,
                                          const DiscriminatorConfig& config) {
  std::vector<nn::LossSample> train;
  std::vector<nn::LossSample> val;
  for (const auto& r : records) {
    (r.split == Split::train ? train : val).push_back(make_sample(featurize(r.scene), r.label));
  }
  if (train.empty()) throw Error("empty training split");
  if (config.batch_size < 1 || config.epochs < 0) throw Error("invalid training config");

  std::vector<int> sizes{static_cast<int>(features::size())};
  std::vector<nn::Activation> acts;
  for (int h : config.hidden) {
    sizes.push_back(h);
    acts.push_back(nn::Activation::relu);
  }
  sizes.push_back(1);
  acts.push_back(nn::Activation::sigmoid);
  nn::Mlp net(sizes, acts, derive_seed(config.seed, 0xd15cULL));

  nn::Matrix all(static_cast<Eigen::Index>(features::size()),
                 static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    all.col(static_cast<Eigen::Index>(i)) = train[i].inputs.col(0);
  }
  nn::fit_input_normalization(net, all);

  const nn::LossConfig loss{nn::LossKind::mse};
  nn::AdamState adam;
  Rng rng(derive_seed(config.seed, 0xba7c4ULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  DiscriminatorTraining out;
  std::vector<nn::LossSample> batch;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
      nn::Gradients grads = net.zero_gradients();
      const double l = nn::loss_and_gradients(net, loss, batch, &grads);
      if (!std::isfinite(l)) throw Error("divergence");
      epoch_loss += l * static_cast<double>(end - start);
      nn::adam_step(net, grads, adam, config.lr);
      ++step;
    }
    out.history.train.push_back(epoch_loss / static_cast<double>(train.size()));
    if (!val.empty()) {
      out.history.validation.push_back(nn::loss_and_gradients(net, loss, val, nullptr));
    }
  }
  out.checkpoint.net = std::move(net);
  out.checkpoint.optimizer = std::move(adam);
  out.checkpoint.rng_seed = config.seed;
  out.checkpoint.step = step;
  out.checkpoint.meta = {{"kind", "discriminator"},
                         {"epochs", config.epochs},
                         {"batch_size", config.batch_size},
                         {"lr", config.lr},
                         {"train_loss", out.history.train},
                         {"validation_loss", out.history.validation}};
  return out;
}

std::vector<SweepRow> threshold_sweep_scores(std::span<const double> scores,
                                             std::span<const double> labels,
                                             std::span<const double> thresholds) {
  if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
  std::size_t positives = 0;
  for (const double l : labels) positives += l >= 1.0 ? 1 : 0;
  if (positives == 0) throw Error("degenerate sweep");
  std::vector<SweepRow> rows;
  for (const double xi : thresholds) {
    std::size_t tp = 0;
    std::size_t pp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= xi) {
        ++pp;
        if (labels[i] >= 1.0) ++tp;
      }
    }
    SweepRow row;
    row.threshold = xi;
    row.predicted_positive = pp;
    row.recall = static_cast<double>(tp) / static_cast<double>(positives);
    if (pp > 0) row.precision = static_cast<double>(tp) / static_cast<double>(pp);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> threshold_sweep(const Discriminator& disc,
                                      std::span<const Scene> scenes,
                                      std::span<const double> labels,
                                      std::span<const double> thresholds) {
  std::vector<double> scores;
  scores.reserve(scenes.size());
  for (const auto& s : scenes) scores.push_back(disc.score(s));
  return threshold_sweep_scores(scores, labels, thresholds);
}

}  // namespace tidy
