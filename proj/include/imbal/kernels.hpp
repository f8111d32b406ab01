#pragma once

// Batch kernels for the dense network. `serial` holds plain-loop reference
// implementations used as test oracles; `parallel` holds the GEMM-based
// OpenMP versions used in training. Parallel work is split into fixed-size
// column chunks reduced in chunk order, so results are identical for any
// thread count.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "imbal/nn.hpp"

namespace imbal {

enum class Exec { kSerial, kParallel };

namespace kernels {

inline constexpr Eigen::Index kChunkColumns = 64;

/// Pre-activations and activations per layer for a column batch.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = inputs, [L] = outputs
};

namespace serial {
NetGradients backward_sample(const FeedForwardNet& net, std::span<const double> x,
                             std::span<const double> upstream);
Eigen::MatrixXd forward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs);
/// Sum over columns of the per-sample gradients of dot(output, upstream).
NetGradients backward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& upstream);
}  // namespace serial

namespace parallel {
Eigen::MatrixXd forward_batch(const FeedForwardNet& net, const Eigen::MatrixXd& inputs);
ForwardCache forward_cached(const FeedForwardNet& net, const Eigen::MatrixXd& inputs);
NetGradients backward_batch(const FeedForwardNet& net, const ForwardCache& cache,
                            const Eigen::MatrixXd& upstream);
}  // namespace parallel

}  // namespace kernels
}  // namespace imbal
