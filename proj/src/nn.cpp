#include "imbal/nn.hpp"

#include <algorithm>
#include <cmath>

#include "imbal/error.hpp"
#include "imbal/kernels.hpp"

namespace imbal {

FeedForwardNet::FeedForwardNet(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw Error(ErrorKind::kInvalidArgument, "network needs at least 2 layer dims");
  for (std::size_t d : dims_)
    if (d == 0) throw Error(ErrorKind::kInvalidArgument, "layer dims must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    DenseLayer layer;
    layer.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims_[l + 1]),
                                          static_cast<Eigen::Index>(dims_[l]));
    layer.biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims_[l + 1]));
    layers_.push_back(std::move(layer));
  }
}

FeedForwardNet FeedForwardNet::initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  FeedForwardNet net(std::move(layer_dims));
  Rng rng(seed);
  for (DenseLayer& layer : net.layers_) {
    const double fan_in = static_cast<double>(layer.weights.cols());
    const double fan_out = static_cast<double>(layer.weights.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
  }
  return net;
}

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

Eigen::VectorXd FeedForwardNet::forward(std::span<const double> x) const {
  if (x.size() != input_dim())
    throw Error(ErrorKind::kDimensionMismatch, "input has " + std::to_string(x.size()) +
                                                   " features, network expects " +
                                                   std::to_string(input_dim()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * a + layers_[l].biases;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd FeedForwardNet::forward_batch(const Eigen::MatrixXd& inputs) const {
  return kernels::parallel::forward_batch(*this, inputs);
}

namespace {
template <typename Layers, typename F>
void visit_flat(Layers& layers, std::size_t index, F&& f) {
  for (auto& l : layers) {
    const auto nw = static_cast<std::size_t>(l.weights.size());
    if (index < nw) {
      const auto cols = static_cast<std::size_t>(l.weights.cols());
      f(l.weights(static_cast<Eigen::Index>(index / cols), static_cast<Eigen::Index>(index % cols)));
      return;
    }
    index -= nw;
    const auto nb = static_cast<std::size_t>(l.biases.size());
    if (index < nb) {
      f(l.biases(static_cast<Eigen::Index>(index)));
      return;
    }
    index -= nb;
  }
  throw Error(ErrorKind::kDimensionMismatch, "parameter index out of range");
}
}  // namespace

double& FeedForwardNet::parameter(std::size_t flat_index) {
  double* p = nullptr;
  visit_flat(layers_, flat_index, [&](double& v) { p = &v; });
  return *p;
}

double FeedForwardNet::parameter(std::size_t flat_index) const {
  double out = 0.0;
  visit_flat(layers_, flat_index, [&](const double& v) { out = v; });
  return out;
}

std::vector<double> FeedForwardNet::flat_parameters() const { return flatten(layers_); }

void FeedForwardNet::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw Error(ErrorKind::kLengthMismatch, "expected " + std::to_string(parameter_count()) +
                                                " parameters, got " + std::to_string(values.size()));
  std::size_t k = 0;
  for (DenseLayer& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = values[k++];
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases(r) = values[k++];
  }
}

bool FeedForwardNet::all_finite() const {
  for (const DenseLayer& l : layers_)
    if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
  return true;
}

bool operator==(const FeedForwardNet& a, const FeedForwardNet& b) {
  if (a.dims_ != b.dims_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l)
    if (a.layers_[l].weights != b.layers_[l].weights || a.layers_[l].biases != b.layers_[l].biases)
      return false;
  return true;
}

NetGradients zero_gradients(const FeedForwardNet& net) {
  NetGradients g;
  for (const DenseLayer& l : net.layers())
    g.push_back(DenseLayer{Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                           Eigen::VectorXd::Zero(l.biases.size())});
  return g;
}

void add_scaled(NetGradients& acc, const NetGradients& g, double scale) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    acc[l].weights += scale * g[l].weights;
    acc[l].biases += scale * g[l].biases;
  }
}

std::vector<double> flatten(const NetGradients& g) {
  std::vector<double> out;
  for (const DenseLayer& l : g) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) out.push_back(l.biases(r));
  }
  return out;
}

NetGradients backward(const FeedForwardNet& net, std::span<const double> x,
                      std::span<const double> upstream) {
  if (x.size() != net.input_dim() || upstream.size() != net.output_dim())
    throw Error(ErrorKind::kDimensionMismatch, "backward: input or upstream size mismatch");
  return kernels::serial::backward_sample(net, x, upstream);
}

AdamState AdamState::for_net(const FeedForwardNet& net, double learning_rate) {
  AdamState s;
  s.first_moment = zero_gradients(net);
  s.second_moment = zero_gradients(net);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(FeedForwardNet& net, const NetGradients& grads, AdamState& state) {
  if (state.first_moment.size() != grads.size()) {
    state.first_moment = zero_gradients(net);
    state.second_moment = zero_gradients(net);
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, lr = state.learning_rate, eps = state.epsilon;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads[l].weights, state.first_moment[l].weights,
           state.second_moment[l].weights);
    update(layers[l].biases, grads[l].biases, state.first_moment[l].biases,
           state.second_moment[l].biases);
  }
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidArgument, "temperature must be positive");
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> grad_p,
                                     double temperature) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * grad_p[i];
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (grad_p[i] - dot) / temperature;
  return g;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorKind::kDimensionMismatch, "kl: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double pi = std::max(p[i], kProbabilityFloor);
    const double qi = std::max(q[i], kProbabilityFloor);
    kl += p[i] * (std::log(pi) - std::log(qi));
  }
  return kl;
}

void kl_divergence_grad(std::span<const double> p, std::span<const double> q,
                        std::span<double> grad_p, std::span<double> grad_q) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::max(p[i], kProbabilityFloor);
    const double qi = std::max(q[i], kProbabilityFloor);
    // Right derivative at p = 0; the floor makes it finite.
    grad_p[i] = std::log(pi) - std::log(qi) + (p[i] > kProbabilityFloor ? 1.0 : 0.0);
    grad_q[i] = (p[i] > 0.0 && q[i] > kProbabilityFloor) ? -p[i] / q[i] : 0.0;
  }
}

}  // namespace imbal
