#include "tidyplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tidyplan/random.hpp"
#include "tidyplan/world.hpp"

namespace tidy::nn {

namespace {

void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::sigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      break;
    case Activation::identity:
      break;
    case Activation::softmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double mx = z.col(c).maxCoeff();
        z.col(c) = (z.col(c).array() - mx).exp().matrix();
        z.col(c) /= z.col(c).sum();
      }
      break;
  }
}

// dL/dz from dL/da, given the activation output a.
Matrix activation_backward(const Matrix& a, const Matrix& grad, Activation act) {
  switch (act) {
    case Activation::relu:
      return (a.array() > 0.0).cast<double>().matrix().cwiseProduct(grad);
    case Activation::tanh:
      return ((1.0 - a.array().square()) * grad.array()).matrix();
    case Activation::sigmoid:
      return (a.array() * (1.0 - a.array()) * grad.array()).matrix();
    case Activation::identity:
      return grad;
    case Activation::softmax: {
      Matrix out(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double dot = a.col(c).dot(grad.col(c));
        out.col(c) = a.col(c).cwiseProduct((grad.col(c).array() - dot).matrix());
      }
      return out;
    }
  }
  return grad;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::tanh, Activation::sigmoid,
                 Activation::identity, Activation::softmax}) {
    if (to_string(a) == name) return a;
  }
  throw Error("unknown activation: " + std::string(name));
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
}

void Gradients::scale(double s) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] *= s;
    bias[i] *= s;
  }
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    // Row-major weights, then bias, per layer: matches Mlp::flatten.
    for (Eigen::Index r = 0; r < weight[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < weight[i].cols(); ++c) out.push_back(weight[i](r, c));
    }
    for (Eigen::Index r = 0; r < bias[i].size(); ++r) out.push_back(bias[i](r));
  }
  return out;
}

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations,
         std::uint64_t seed) {
  if (layer_sizes.size() < 2 || activations.size() != layer_sizes.size() - 1) {
    throw Error("layer sizes and activations are inconsistent");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw Error("layer sizes must be positive");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int fan_in = layer_sizes[i];
    const int fan_out = layer_sizes[i + 1];
    // He-uniform for ReLU, Glorot-uniform otherwise.
    const double limit = activations[i] == Activation::relu
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    Layer layer;
    layer.weight.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    layer.bias = Vector::Zero(fan_out);
    layer.activation = activations[i];
    layers_.push_back(std::move(layer));
  }
  shift_ = Vector::Zero(layer_sizes.front());
  scale_ = Vector::Ones(layer_sizes.front());
}

std::size_t Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<int> Mlp::layer_sizes() const {
  std::vector<int> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

void Mlp::set_input_normalization(Vector shift, Vector scale) {
  if (static_cast<std::size_t>(shift.size()) != input_size() ||
      static_cast<std::size_t>(scale.size()) != input_size()) {
    throw Error("input normalization size mismatch");
  }
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

void Mlp::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw Error("empty network");
  if (static_cast<std::size_t>(rows) != input_size()) {
    throw Error("dimension mismatch: expected " + std::to_string(input_size()) +
                " inputs, got " + std::to_string(rows));
  }
}

Vector Mlp::forward(const Vector& input) const {
  return forward_batch(input);
}

Vector Mlp::forward(std::span<const double> input) const {
  const Vector v = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(v);
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
  check_input(inputs.rows());
  Matrix a = ((inputs.colwise() - shift_).array().colwise() * scale_.array()).matrix();
  for (const auto& l : layers_) {
    Matrix z = l.weight * a;
    z.colwise() += l.bias;
    activate(z, l.activation);
    a = std::move(z);
  }
  return a;
}

Matrix Mlp::forward_tape(const Matrix& inputs, Tape& tape) const {
  check_input(inputs.rows());
  tape.values.clear();
  tape.values.push_back(((inputs.colwise() - shift_).array().colwise() * scale_.array()).matrix());
  for (const auto& l : layers_) {
    Matrix z = l.weight * tape.values.back();
    z.colwise() += l.bias;
    activate(z, l.activation);
    tape.values.push_back(std::move(z));
  }
  return tape.values.back();
}

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, Gradients& grads) const {
  Matrix grad = grad_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    const Matrix dz = activation_backward(tape.values[k + 1], grad, l.activation);
    grads.weight[k].noalias() += dz * tape.values[k].transpose();
    grads.bias[k] += dz.rowwise().sum();
    grad = l.weight.transpose() * dz;
  }
  return (grad.array().colwise() * scale_.array()).matrix();
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void Mlp::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error("parameter count mismatch");
  std::size_t i = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[i++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[i++];
  }
}

bool Mlp::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

double expectile_loss(double u, double tau) {
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return w * u * u;
}

double expectile_loss_derivative(double u, double tau) {
  if (u == 0.0) return 0.0;
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return 2.0 * w * u;
}

LossKind parse_loss(std::string_view tag) {
  for (auto k : {LossKind::mse, LossKind::expectile, LossKind::td, LossKind::awr}) {
    if (to_string(k) == tag) return k;
  }
  throw Error("unknown loss tag: " + std::string(tag));
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return "mse";
    case LossKind::expectile: return "expectile";
    case LossKind::td: return "td";
    case LossKind::awr: return "awr";
  }
  return "mse";
}

Vector masked_softmax(const Vector& logits, std::span<const std::uint8_t> mask) {
  const bool use_mask = !mask.empty();
  if (use_mask && mask.size() != static_cast<std::size_t>(logits.size())) {
    throw Error("mask size mismatch");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!use_mask || mask[static_cast<std::size_t>(i)]) mx = std::max(mx, logits(i));
  }
  if (mx == -std::numeric_limits<double>::infinity()) throw Error("no feasible action");
  Vector p = Vector::Zero(logits.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!use_mask || mask[static_cast<std::size_t>(i)]) {
      p(i) = std::exp(logits(i) - mx);
      total += p(i);
    }
  }
  p /= total;
  return p;
}

double loss_and_gradients(const Mlp& net, const LossConfig& loss,
                          std::span<const LossSample> batch, Gradients* grads) {
  if (batch.empty()) throw Error("empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  if (loss.kind != LossKind::awr) {
    if (net.output_size() != 1) throw Error("scalar loss needs a single output");
    Matrix inputs(static_cast<Eigen::Index>(net.input_size()),
                  static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].inputs.cols() != 1) throw Error("scalar loss takes one input column");
      inputs.col(static_cast<Eigen::Index>(i)) = batch[i].inputs.col(0);
    }
    Mlp::Tape tape;
    const Matrix out = net.forward_tape(inputs, tape);
    Matrix grad_out(1, out.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      const double o = out(0, c);
      const double t = batch[i].target;
      switch (loss.kind) {
        case LossKind::mse:
        case LossKind::td:
          total += (o - t) * (o - t);
          grad_out(0, c) = 2.0 * (o - t) * inv_b;
          break;
        case LossKind::expectile: {
          const double u = t - o;
          total += expectile_loss(u, loss.tau);
          grad_out(0, c) = -expectile_loss_derivative(u, loss.tau) * inv_b;
          break;
        }
        case LossKind::awr:
          break;
      }
    }
    if (grads != nullptr) net.backward(tape, grad_out, *grads);
    return total * inv_b;
  }

  // AWR: gather every head evaluation into one batched pass.
  Eigen::Index total_cols = 0;
  for (const auto& s : batch) total_cols += s.inputs.cols();
  Matrix inputs(static_cast<Eigen::Index>(net.input_size()), total_cols);
  Eigen::Index col = 0;
  for (const auto& s : batch) {
    inputs.middleCols(col, s.inputs.cols()) = s.inputs;
    col += s.inputs.cols();
  }
  Mlp::Tape tape;
  const Matrix out = net.forward_tape(inputs, tape);
  const Eigen::Index k = out.rows();
  Matrix grad_out = Matrix::Zero(out.rows(), out.cols());
  double total = 0.0;
  col = 0;
  for (const auto& s : batch) {
    const Eigen::Index n = s.inputs.cols();
    Vector logits(n * k);
    for (Eigen::Index j = 0; j < n; ++j) logits.segment(j * k, k) = out.col(col + j);
    const Vector p = masked_softmax(logits, s.mask);
    const auto a = static_cast<Eigen::Index>(s.action);
    if (a >= logits.size() || p(a) <= 0.0) throw Error("awr target action is masked");
    total += -s.weight * std::log(p(a));
    Vector g = p * s.weight;
    g(a) -= s.weight;
    for (Eigen::Index j = 0; j < n; ++j) grad_out.col(col + j) = g.segment(j * k, k) * inv_b;
    col += n;
  }
  if (grads != nullptr) net.backward(tape, grad_out, *grads);
  return total * inv_b;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamConfig& config) {
  if (params.size() != grads.size()) throw Error("gradient shape mismatch");
  for (const double g : grads) {
    if (!std::isfinite(g)) throw Error("divergence");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  if (state.m.size() != params.size()) throw Error("optimizer state shape mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& config) {
  std::vector<double> params = net.flatten();
  const std::vector<double> g = grads.flatten();
  adam_step(std::span<double>(params), std::span<const double>(g), state, lr, config);
  net.assign(params);
}

void polyak_update(Mlp& target, const Mlp& source, double rate) {
  auto& tl = target.layers();
  const auto& sl = source.layers();
  if (tl.size() != sl.size()) throw Error("polyak update shape mismatch");
  for (std::size_t i = 0; i < tl.size(); ++i) {
    tl[i].weight = (1.0 - rate) * tl[i].weight + rate * sl[i].weight;
    tl[i].bias = (1.0 - rate) * tl[i].bias + rate * sl[i].bias;
  }
}

Json to_json(const Checkpoint& ckpt) {
  const Mlp& net = ckpt.net;
  Json weights = Json::array();
  Json biases = Json::array();
  Json acts = Json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    weights.push_back(w);
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
    acts.push_back(std::string(to_string(l.activation)));
  }
  const auto& sh = net.input_shift();
  const auto& sc = net.input_scale();
  return Json{
      {"layer_sizes", net.layer_sizes()},
      {"activations", acts},
      {"weights", weights},
      {"biases", biases},
      {"input_normalization",
       {{"shift", std::vector<double>(sh.data(), sh.data() + sh.size())},
        {"scale", std::vector<double>(sc.data(), sc.data() + sc.size())}}},
      {"optimizer_state",
       {{"m", ckpt.optimizer.m}, {"v", ckpt.optimizer.v}, {"t", ckpt.optimizer.t}}},
      {"rng_seed", ckpt.rng_seed},
      {"step", ckpt.step},
      {"meta", ckpt.meta}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    std::vector<Activation> acts;
    for (const auto& a : j.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
    Checkpoint ckpt;
    ckpt.net = Mlp(sizes, acts, 0);
    auto& layers = ckpt.net.layers();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != layers.size() || biases.size() != layers.size()) {
      throw Error("checkpoint layer count mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto w = weights[i].get<std::vector<double>>();
      const auto b = biases[i].get<std::vector<double>>();
      auto& l = layers[i];
      if (w.size() != static_cast<std::size_t>(l.weight.size()) ||
          b.size() != static_cast<std::size_t>(l.bias.size())) {
        throw Error("checkpoint layer shape mismatch");
      }
      std::size_t idx = 0;
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = w[idx++];
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
    }
    if (j.contains("input_normalization")) {
      const auto sh = j["input_normalization"].at("shift").get<std::vector<double>>();
      const auto sc = j["input_normalization"].at("scale").get<std::vector<double>>();
      ckpt.net.set_input_normalization(
          Eigen::Map<const Vector>(sh.data(), static_cast<Eigen::Index>(sh.size())),
          Eigen::Map<const Vector>(sc.data(), static_cast<Eigen::Index>(sc.size())));
    }
    if (j.contains("optimizer_state")) {
      const auto& o = j["optimizer_state"];
      ckpt.optimizer.m = o.at("m").get<std::vector<double>>();
      ckpt.optimizer.v = o.at("v").get<std::vector<double>>();
      ckpt.optimizer.t = o.at("t").get<std::int64_t>();
    }
    ckpt.rng_seed = j.value("rng_seed", std::uint64_t{0});
    ckpt.step = j.value("step", std::int64_t{0});
    ckpt.meta = j.value("meta", Json::object());
    if (!ckpt.net.all_finite()) throw Error("checkpoint has non-finite parameters");
    return ckpt;
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_json_file(path, to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

void fit_input_normalization(Mlp& net, const Matrix& data) {
  const Eigen::Index d = data.rows();
  const double n = static_cast<double>(std::max<Eigen::Index>(data.cols(), 1));
  Vector mean = data.rowwise().sum() / n;
  Vector scale(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double var = (data.row(i).array() - mean(i)).square().sum() / n;
    scale(i) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  net.set_input_normalization(std::move(mean), std::move(scale));
}

}  // namespace tidy::nn
