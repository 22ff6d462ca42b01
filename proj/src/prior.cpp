#include "penn/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace penn::prior {

namespace {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd d(n, n);
    d.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = (x.row(i) - x.row(j)).norm();
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

}  // namespace

std::pair<std::vector<int>, double> complete_linkage_clusters(const Eigen::MatrixXd& x,
                                                              int n_clusters) {
    const int n = static_cast<int>(x.rows());
    require(n >= 1, "clustering: empty input");
    require(x.allFinite(), "clustering: non-finite input");
    require(n_clusters >= 1 && n_clusters <= n, "clustering: n_clusters out of [1, N]");

    // Cluster-to-cluster complete-linkage distances, updated in place. Slot i
    // stays the representative of every cluster merged into it.
    Eigen::MatrixXd dist = pairwise_distances(x);
    std::vector<std::uint8_t> active(static_cast<std::size_t>(n), 1);
    std::vector<int> slot_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) slot_of[static_cast<std::size_t>(i)] = i;

    int remaining = n;
    double last_merge_distance = 0.0;
    while (remaining > n_clusters) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (int j = i + 1; j < n; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        // Merge bj into bi; complete linkage takes the max of the two rows.
        for (int t = 0; t < n; ++t) {
            if (!active[static_cast<std::size_t>(t)] || t == bi || t == bj) continue;
            const double dmax = std::max(dist(bi, t), dist(bj, t));
            dist(bi, t) = dmax;
            dist(t, bi) = dmax;
        }
        active[static_cast<std::size_t>(bj)] = 0;
        for (int t = 0; t < n; ++t)
            if (slot_of[static_cast<std::size_t>(t)] == bj) slot_of[static_cast<std::size_t>(t)] = bi;
        last_merge_distance = best;
        --remaining;
    }

    // Relabel slots to contiguous ids in order of first appearance.
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::vector<int> slot_to_label(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int slot = slot_of[static_cast<std::size_t>(i)];
        if (slot_to_label[static_cast<std::size_t>(slot)] < 0)
            slot_to_label[static_cast<std::size_t>(slot)] = next++;
        labels[static_cast<std::size_t>(i)] = slot_to_label[static_cast<std::size_t>(slot)];
    }
    return {labels, last_merge_distance};
}

int delta_to_n_clusters(double delta, int n) {
    require(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
    require(n >= 1, "delta_to_n_clusters: N must be >= 1");
    const int k = static_cast<int>(std::llround(1.0 + delta * static_cast<double>(n - 1)));
    return std::clamp(k, 1, n);
}

KernelWeights build_kernel_weights(const Eigen::MatrixXd& x, const KernelSpec& spec) {
    const Eigen::Index n = x.rows();
    require(n >= 1, "kernel weights: empty input");
    require(x.allFinite(), "kernel weights: non-finite input");

    KernelWeights out;
    out.pi = Eigen::MatrixXd::Zero(n, n);

    if (spec.kind == KernelSpec::Kind::Disjoint) {
        const int k = delta_to_n_clusters(spec.delta, static_cast<int>(n));
        auto [labels, threshold] = complete_linkage_clusters(x, k);
        (void)threshold;
        std::vector<int> count(static_cast<std::size_t>(k), 0);
        for (int lab : labels) ++count[static_cast<std::size_t>(lab)];
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
                    out.pi(i, j) = 1.0 / count[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        out.cluster_labels = std::move(labels);
        return out;
    }

    const bool epa = spec.kind == KernelSpec::Kind::Epanechnikov;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = (x.row(i) - x.row(j)).norm() / spec.bandwidth;
            double h = 0.0;
            if (a < 1.0) h = epa ? 0.75 * (1.0 - a * a) : std::pow(1.0 - a * a * a, 3);
            out.pi(i, j) = h;
            row_sum += h;
        }
        // H(0) > 0 makes the self weight positive, so a zero row is impossible.
        require(row_sum > 0.0, "kernel weights: degenerate all-zero row");
        out.pi.row(i) /= row_sum;
    }
    return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> prior_moments(const KernelWeights& kw,
                                                          const Eigen::MatrixXd& mu_q,
                                                          const Eigen::MatrixXd& sigma_q) {
    require(kw.pi.rows() == mu_q.rows(), "prior_moments: pi rows != posterior rows");
    require(mu_q.rows() == sigma_q.rows() && mu_q.cols() == sigma_q.cols(),
            "prior_moments: posterior moment shapes differ");
    return {kw.pi * mu_q, kw.pi * sigma_q};
}

}  // namespace penn::prior
