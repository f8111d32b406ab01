#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace imbal {

using Rng = std::mt19937_64;

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
};

/// Dense network with ReLU hidden layers and an identity output layer.
/// Flat parameter order: per layer, weights row-major then biases.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  /// All parameters zero.
  explicit FeedForwardNet(std::vector<std::size_t> layer_dims);
  /// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  static FeedForwardNet initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd forward(std::span<const double> x) const;
  /// Column-per-sample batch evaluation.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  double& parameter(std::size_t flat_index);
  double parameter(std::size_t flat_index) const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  bool all_finite() const;

  friend bool operator==(const FeedForwardNet& a, const FeedForwardNet& b);

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

/// Gradients share the parameter layout of the network they belong to.
using NetGradients = std::vector<DenseLayer>;

NetGradients zero_gradients(const FeedForwardNet& net);
void add_scaled(NetGradients& acc, const NetGradients& g, double scale);
std::vector<double> flatten(const NetGradients& g);

/// Single-sample reverse mode: gradients of dot(output, upstream).
NetGradients backward(const FeedForwardNet& net, std::span<const double> x,
                      std::span<const double> upstream);

struct AdamState {
  std::uint64_t step_count = 0;
  NetGradients first_moment;
  NetGradients second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_net(const FeedForwardNet& net, double learning_rate);
};

void adam_step(FeedForwardNet& net, const NetGradients& grads, AdamState& state);

inline constexpr double kProbabilityFloor = 1e-12;

std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);
/// Gradient w.r.t. logits given probabilities p and dL/dp.
std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> grad_p,
                                     double temperature = 1.0);
/// sum p ln(p/q) with both arguments floored at kProbabilityFloor; 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
/// Partial derivatives of kl_divergence w.r.t. p and q (floor-aware).
void kl_divergence_grad(std::span<const double> p, std::span<const double> q,
                        std::span<double> grad_p, std::span<double> grad_q);

}  // namespace imbal
