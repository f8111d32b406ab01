#include "imbal/kernels.hpp"

#include <algorithm>

#include "imbal/error.hpp"

namespace imbal::kernels {

namespace serial {

NetGradients backward_sample(const FeedForwardNet& net, std::span<const double> x,
                             std::span<const double> upstream) {
  const auto& layers = net.layers();
  const std::size_t n_layers = layers.size();
  // acts[l] is the input to layer l.
  std::vector<std::vector<double>> acts(n_layers + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& W = layers[l].weights;
    const auto& b = layers[l].biases;
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double s = b(r);
      for (Eigen::Index c = 0; c < W.cols(); ++c) s += W(r, c) * acts[l][static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = (l + 1 < n_layers) ? std::max(s, 0.0) : s;
    }
    acts[l + 1] = std::move(z);
  }
  NetGradients g = zero_gradients(net);
  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& W = layers[l].weights;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g[l].biases(r) = d;
      for (Eigen::Index c = 0; c < W.cols(); ++c) g[l].weights(r, c) = d * acts[l][static_cast<std::size_t>(c)];
    }
    if (l == 0) break;
    std::vector<double> prev(static_cast<std::size_t>(W.cols()), 0.0);
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      // ReLU derivative from the stored activation (0 where inactive).
      if (acts[l][static_cast<std::size_t>(c)] <= 0.0) continue;
      double s = 0.0;
      for (Eigen::Index r = 0; r < W.rows(); ++r) s += W(r, c) * delta[static_cast<std::size_t>(r)];
      prev[static_cast<std::size_t>(c)] = s;
    }
    delta = std::move(prev);
  }
  return g;
}

Eigen::MatrixXd forward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(net.output_dim()), inputs.cols());
  std::vector<double> x(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) x[static_cast<std::size_t>(i)] = inputs(i, j);
    out.col(j) = net.forward(x);
  }
  return out;
}

NetGradients backward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& upstream) {
  NetGradients acc = zero_gradients(net);
  std::vector<double> x(static_cast<std::size_t>(inputs.rows()));
  std::vector<double> u(static_cast<std::size_t>(upstream.rows()));
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) x[static_cast<std::size_t>(i)] = inputs(i, j);
    for (Eigen::Index i = 0; i < upstream.rows(); ++i) u[static_cast<std::size_t>(i)] = upstream(i, j);
    add_scaled(acc, backward_sample(net, x, u), 1.0);
  }
  return acc;
}

}  // namespace serial

namespace parallel {

namespace {
void check_inputs(const FeedForwardNet& net, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != net.input_dim())
    throw Error(ErrorKind::kDimensionMismatch, "batch has " + std::to_string(inputs.rows()) +
                                                   " feature rows, network expects " +
                                                   std::to_string(net.input_dim()));
}

Eigen::Index chunk_count(Eigen::Index cols) { return (cols + kChunkColumns - 1) / kChunkColumns; }
}  // namespace

ForwardCache forward_cached(const FeedForwardNet& net, const Eigen::MatrixXd& inputs) {
  check_inputs(net, inputs);
  const auto& layers = net.layers();
  const Eigen::Index cols = inputs.cols();
  ForwardCache cache;
  cache.activations.resize(layers.size() + 1);
  cache.activations[0] = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l)
    cache.activations[l + 1].resize(layers[l].weights.rows(), cols);
  const Eigen::Index chunks = chunk_count(cols);
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < chunks; ++k) {
    const Eigen::Index c0 = k * kChunkColumns;
    const Eigen::Index n = std::min(kChunkColumns, cols - c0);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto z = cache.activations[l + 1].middleCols(c0, n);
      z.noalias() = layers[l].weights * cache.activations[l].middleCols(c0, n);
      z.colwise() += layers[l].biases;
      if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    }
  }
  return cache;
}

Eigen::MatrixXd forward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs) {
  return forward_cached(net, inputs).activations.back();
}

NetGradients backward_batch(const FeedForwardNet& net, const ForwardCache& cache,
                            const Eigen::MatrixXd& upstream) {
  const auto& layers = net.layers();
  const Eigen::Index cols = upstream.cols();
  if (upstream.rows() != static_cast<Eigen::Index>(net.output_dim()) ||
      cache.activations.front().cols() != cols)
    throw Error(ErrorKind::kDimensionMismatch, "backward_batch: upstream shape mismatch");
  const Eigen::Index chunks = chunk_count(cols);
  std::vector<NetGradients> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < chunks; ++k) {
    const Eigen::Index c0 = k * kChunkColumns;
    const Eigen::Index n = std::min(kChunkColumns, cols - c0);
    NetGradients g = zero_gradients(net);
    Eigen::MatrixXd delta = upstream.middleCols(c0, n);
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto a_in = cache.activations[l].middleCols(c0, n);
      g[l].weights.noalias() = delta * a_in.transpose();
      g[l].biases = delta.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd prev = layers[l].weights.transpose() * delta;
      delta = (a_in.array() > 0.0).select(prev, 0.0);
    }
    partial[static_cast<std::size_t>(k)] = std::move(g);
  }
  NetGradients acc = zero_gradients(net);
  for (const NetGradients& g : partial) add_scaled(acc, g, 1.0);
  return acc;
}

}  // namespace parallel

}  // namespace imbal::kernels
