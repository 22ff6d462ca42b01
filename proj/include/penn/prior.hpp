#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "penn/error.hpp"

namespace penn::prior {

// Weighting kernel over observations. Disjoint derives hard neighborhoods
// from complete-linkage clustering with resolution delta in [0, 1]; the
// compact-support kernels weight neighbors smoothly within a bandwidth.
struct KernelSpec {
    enum class Kind { Disjoint, Epanechnikov, Tricube };
    Kind kind = Kind::Disjoint;
    double delta = 0.2;      // Disjoint only
    double bandwidth = 1.0;  // compact kernels only

    static KernelSpec disjoint(double delta) {
        require(delta >= 0.0 && delta <= 1.0, "kernel: delta must lie in [0, 1]");
        return {Kind::Disjoint, delta, 1.0};
    }
    static KernelSpec epanechnikov(double bandwidth) {
        require(bandwidth > 0.0, "kernel: bandwidth must be positive");
        return {Kind::Epanechnikov, 0.0, bandwidth};
    }
    static KernelSpec tricube(double bandwidth) {
        require(bandwidth > 0.0, "kernel: bandwidth must be positive");
        return {Kind::Tricube, 0.0, bandwidth};
    }
};

// Row-stochastic N x N weighting matrix over observations.
struct KernelWeights {
    Eigen::MatrixXd pi;
    std::vector<int> cluster_labels;  // filled by the Disjoint variant
};

// Agglomerative complete-linkage clustering with Euclidean distances.
// Merging stops when exactly n_clusters remain. Returns contiguous labels
// (0-based, in order of first appearance) and the distance of the last
// accepted merge (0 when n_clusters == N). Equal merge distances are broken
// toward the lowest pair of cluster indices, so the result is deterministic.
std::pair<std::vector<int>, double> complete_linkage_clusters(const Eigen::MatrixXd& x,
                                                              int n_clusters);

// Resolution delta -> cluster count: round(1 + delta*(N-1)), clamped to [1, N].
int delta_to_n_clusters(double delta, int n);

KernelWeights build_kernel_weights(const Eigen::MatrixXd& x, const KernelSpec& spec);

// Conditional prior moments: mu_p = pi * mu_q, sigma_p = pi * sigma_q.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> prior_moments(const KernelWeights& kw,
                                                          const Eigen::MatrixXd& mu_q,
                                                          const Eigen::MatrixXd& sigma_q);

}  // namespace penn::prior
