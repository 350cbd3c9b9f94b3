#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tidyplan/serialization.hpp"

namespace tidy::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, tanh, sigmoid, identity, softmax };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;
};

/// Per-parameter gradients, shaped like the network's layers.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void add(const Gradients& other);
  void scale(double s);
  std::vector<double> flatten() const;
};

/// Fully connected network. Inputs are standardized with a fixed per-input
/// shift/scale (not trained) before the first layer. Batched calls take one
/// sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations,
      std::uint64_t seed);

  std::size_t input_size() const;
  std::size_t output_size() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::vector<int> layer_sizes() const;

  void set_input_normalization(Vector shift, Vector scale);
  const Vector& input_shift() const { return shift_; }
  const Vector& input_scale() const { return scale_; }

  Vector forward(const Vector& input) const;
  Vector forward(std::span<const double> input) const;
  Matrix forward_batch(const Matrix& inputs) const;

  /// Cached activations of one batched forward pass.
  struct Tape {
    std::vector<Matrix> values;  // values[0] = normalized input, values[i+1] = layer i output
  };
  Matrix forward_tape(const Matrix& inputs, Tape& tape) const;
  /// Accumulates dL/dparams into grads given dL/doutput (same shape as the
  /// tape's output). Returns dL/dinput (pre-normalization).
  Matrix backward(const Tape& tape, const Matrix& grad_output, Gradients& grads) const;

  Gradients zero_gradients() const;
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<Layer> layers_;
  Vector shift_;
  Vector scale_;
};

/// Asymmetric squared loss |tau - 1(u < 0)| u^2.
double expectile_loss(double u, double tau);
/// d/du of expectile_loss; zero at u = 0.
double expectile_loss_derivative(double u, double tau);

enum class LossKind {
  mse,        // (out - target)^2
  expectile,  // expectile_loss(target - out, tau)
  td,         // (target - out)^2, target = r + gamma V(s') precomputed
  awr,        // -weight * log softmax(logits)[action] over unmasked entries
};

LossKind parse_loss(std::string_view tag);
std::string_view to_string(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::mse;
  double tau = 0.7;
};

/// One training example. Scalar losses use a single input column; the AWR
/// loss takes one column per head evaluation (object) and scores the
/// concatenation of their outputs as a single categorical distribution.
struct LossSample {
  Matrix inputs;
  double target = 0.0;
  double weight = 1.0;
  std::size_t action = 0;
  std::vector<std::uint8_t> mask;  // AWR only; empty = all feasible
};

/// Mean loss over the batch; writes exact gradients into grads when non-null.
double loss_and_gradients(const Mlp& net, const LossConfig& loss,
                          std::span<const LossSample> batch, Gradients* grads);

/// Masked, numerically stable softmax over logits. Masked entries get 0.
/// Throws "no feasible action" when everything is masked.
Vector masked_softmax(const Vector& logits, std::span<const std::uint8_t> mask);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// In-place Adam step with bias correction. Throws "divergence" on
/// non-finite gradients.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& config = {});
/// Flat-vector form used by the network variant and by tests.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamConfig& config = {});

/// target <- (1 - rate) * target + rate * source
void polyak_update(Mlp& target, const Mlp& source, double rate);

struct Checkpoint {
  Mlp net;
  AdamState optimizer;
  std::uint64_t rng_seed = 0;
  std::int64_t step = 0;
  Json meta = Json::object();
};

Json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Per-input mean and inverse std over the columns of data; constant inputs
/// get scale 1.
void fit_input_normalization(Mlp& net, const Matrix& data);

}  // namespace tidy::nn
