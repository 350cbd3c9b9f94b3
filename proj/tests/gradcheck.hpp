#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tidyplan/nn.hpp"
#include "tidyplan/random.hpp"

namespace tidy::testing {

struct GradCase {
  nn::Mlp net;
  nn::LossConfig loss;
  std::vector<nn::LossSample> batch;
};

/// Small random network and batch for one loss kind. Hidden layers use tanh
/// so central differences never straddle an activation kink.
inline GradCase random_grad_case(nn::LossKind kind, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind)));
  const int in = 2 + static_cast<int>(rng.below(4));
  const int hidden = 3 + static_cast<int>(rng.below(5));
  const int out = kind == nn::LossKind::awr ? 2 + static_cast<int>(rng.below(4)) : 1;
  const nn::Activation head =
      kind == nn::LossKind::mse ? nn::Activation::sigmoid : nn::Activation::identity;
  GradCase c{nn::Mlp({in, hidden, hidden, out},
                     {nn::Activation::tanh, nn::Activation::tanh, head}, rng.next()),
             {kind, kind == nn::LossKind::expectile ? 0.7 : 0.5},
             {}};
  nn::Vector shift(in), scale(in);
  for (int i = 0; i < in; ++i) {
    shift(i) = rng.uniform(-0.5, 0.5);
    scale(i) = rng.uniform(0.5, 2.0);
  }
  c.net.set_input_normalization(shift, scale);
  const int n = 3 + static_cast<int>(rng.below(4));
  for (int b = 0; b < n; ++b) {
    nn::LossSample s;
    const int cols = kind == nn::LossKind::awr ? 1 + static_cast<int>(rng.below(3)) : 1;
    s.inputs.resize(in, cols);
    for (int i = 0; i < in; ++i) {
      for (int j = 0; j < cols; ++j) s.inputs(i, j) = rng.uniform(-1.0, 1.0);
    }
    switch (kind) {
      case nn::LossKind::mse: s.target = rng.uniform(); break;
      case nn::LossKind::expectile: s.target = rng.uniform(-1.0, 1.0); break;
      case nn::LossKind::td: {
        // r + gamma * V(s') with a frozen V(s').
        const double r = rng.bernoulli(0.3) ? 1.0 : 0.0;
        s.target = r + 0.95 * rng.uniform(-0.5, 1.0);
        break;
      }
      case nn::LossKind::awr: {
        const std::size_t k = static_cast<std::size_t>(out * cols);
        s.weight = std::min(100.0, std::exp(3.0 * rng.uniform(-0.5, 0.5)));
        s.mask.assign(k, 1);
        for (auto& m : s.mask) m = rng.bernoulli(0.8) ? 1 : 0;
        s.action = static_cast<std::size_t>(rng.below(k));
        s.mask[s.action] = 1;
        break;
      }
    }
    c.batch.push_back(std::move(s));
  }
  return c;
}

/// Largest elementwise relative error between analytic and central-difference
/// gradients, |a - n| / max(|a|, |n|, floor).
inline double max_gradient_error(const GradCase& c, double h = 1e-5, double floor = 1e-4) {
  nn::Gradients g = c.net.zero_gradients();
  nn::loss_and_gradients(c.net, c.loss, c.batch, &g);
  const std::vector<double> analytic = g.flatten();
  std::vector<double> params = c.net.flatten();
  nn::Mlp probe = c.net;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    probe.assign(params);
    const double up = nn::loss_and_gradients(probe, c.loss, c.batch, nullptr);
    params[i] = saved - h;
    probe.assign(params);
    const double down = nn::loss_and_gradients(probe, c.loss, c.batch, nullptr);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace tidy::testing
