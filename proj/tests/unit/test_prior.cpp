#include <doctest.h>

#include <Eigen/Dense>

#include "penn/prior.hpp"
#include "penn/rng.hpp"
#include "support/oracles.hpp"

using namespace penn;
using namespace penn::prior;

TEST_SUITE("prior") {

TEST_CASE("cluster count endpoints and arithmetic") {
    CHECK(delta_to_n_clusters(0.0, 57) == 1);
    CHECK(delta_to_n_clusters(1.0, 57) == 57);
    CHECK(delta_to_n_clusters(0.5, 101) == 51);
    CHECK(delta_to_n_clusters(0.5, 1) == 1);
    // Resolution is nondecreasing in delta.
    int prev = 0;
    for (double d = 0.0; d <= 1.0; d += 0.01) {
        const int k = delta_to_n_clusters(d, 200);
        CHECK(k >= prev);
        prev = k;
    }
}

TEST_CASE("complete linkage degenerate cluster counts") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 2);
    auto [all_own, d0] = complete_linkage_clusters(x, 9);
    CHECK(d0 == 0.0);
    for (int i = 0; i < 9; ++i)
        for (int j = i + 1; j < 9; ++j) CHECK(all_own[i] != all_own[j]);

    auto [one, d1] = complete_linkage_clusters(x, 1);
    for (int i = 0; i < 9; ++i) CHECK(one[i] == one[0]);
    CHECK(d1 > 0.0);

    CHECK_THROWS_AS(complete_linkage_clusters(x, 0), Error);
    CHECK_THROWS_AS(complete_linkage_clusters(x, 10), Error);
}

TEST_CASE("two line clusters recovered exactly") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 0.1, 5.0, 5.2;
    auto [labels, dist] = complete_linkage_clusters(x, 2);
    CHECK(labels[0] == labels[1]);
    CHECK(labels[2] == labels[3]);
    CHECK(labels[0] != labels[2]);
    CHECK(dist == doctest::Approx(0.2));

    const auto brute = oracles::brute_force_two_clusters(x);
    CHECK((brute[0] == brute[1] && brute[2] == brute[3] && brute[0] != brute[2]));
}

TEST_CASE("complete linkage agrees with brute force on separated blobs") {
    RngStream rng(88);
    for (int trial = 0; trial < 10; ++trial) {
        RngStream t = rng.derive(static_cast<std::uint64_t>(trial));
        Eigen::MatrixXd x(8, 2);
        Eigen::RowVector2d offset(6.0 + t.uniform(), -4.0 - t.uniform());
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 2; ++j) x(i, j) = 0.5 * t.normal();
            if (i % 2 == 1) x.row(i) += offset;
        }
        auto [labels, dist] = complete_linkage_clusters(x, 2);
        (void)dist;
        const auto brute = oracles::brute_force_two_clusters(x);
        // Same partition up to label swap.
        const bool same = [&] {
            for (int i = 0; i < 8; ++i)
                for (int j = i + 1; j < 8; ++j)
                    if ((labels[i] == labels[j]) != (brute[i] == brute[j])) return false;
            return true;
        }();
        CHECK(same);
    }
}

TEST_CASE("intra-cluster diameters stay below the next merge distance") {
    RngStream rng(51);
    Eigen::MatrixXd x(20, 3);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    for (int k : {2, 5, 12}) {
        auto [labels, accepted] = complete_linkage_clusters(x, k);
        auto [coarser, next_merge] = complete_linkage_clusters(x, k - 1);
        (void)coarser;
        CHECK(accepted <= next_merge);
        for (int i = 0; i < 20; ++i)
            for (int j = i + 1; j < 20; ++j)
                if (labels[i] == labels[j]) CHECK((x.row(i) - x.row(j)).norm() < next_merge);
    }
}

TEST_CASE("disjoint weights: identity at delta 1, cluster means otherwise") {
    RngStream rng(3);
    Eigen::MatrixXd x(6, 2);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();

    auto identity = build_kernel_weights(x, KernelSpec::disjoint(1.0));
    CHECK((identity.pi - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);

    // Two well separated blobs: the prior must equal the within-blob mean.
    Eigen::MatrixXd blobs(6, 1);
    blobs << 0.0, 0.05, 0.1, 9.0, 9.1, 9.05;
    auto kw = build_kernel_weights(blobs, KernelSpec::disjoint(0.2));  // 2 clusters
    Eigen::MatrixXd mu = Eigen::MatrixXd::Random(6, 2);
    Eigen::MatrixXd sd = Eigen::MatrixXd::Random(6, 2).cwiseAbs().array() + 0.1;
    auto [mu_p, sd_p] = prior_moments(kw, mu, sd);
    for (int i = 0; i < 3; ++i) {
        CHECK((mu_p.row(i) - mu.topRows(3).colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sd_p.row(i + 3) - sd.bottomRows(3).colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
    }
    // Positive entries within a row all equal 1/cluster size.
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (kw.pi(i, j) > 0.0) CHECK(kw.pi(i, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("compact kernels: unnormalized values and row-stochastic output") {
    // Epanechnikov at a = 0 is 0.75; tri-cube at a = 0.5 is (1 - 0.125)^3.
    Eigen::MatrixXd pair(2, 1);
    pair << 0.0, 0.5;
    auto epa = build_kernel_weights(pair, KernelSpec::epanechnikov(1.0));
    // Row 0: weights proportional to {0.75, 0.75*(1-0.25)}.
    CHECK(epa.pi(0, 0) == doctest::Approx(0.75 / (0.75 + 0.75 * 0.75)));

    auto tri = build_kernel_weights(pair, KernelSpec::tricube(1.0));
    const double t_half = std::pow(1.0 - 0.125, 3);
    CHECK(t_half == doctest::Approx(0.669921875));
    CHECK(tri.pi(0, 1) == doctest::Approx(t_half / (1.0 + t_half)));

    RngStream rng(42);
    Eigen::MatrixXd x(15, 3);
    for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    for (auto spec : {KernelSpec::disjoint(0.3), KernelSpec::epanechnikov(2.0),
                      KernelSpec::tricube(2.5)}) {
        auto kw = build_kernel_weights(x, spec);
        CHECK(kw.pi.minCoeff() >= 0.0);
        for (int i = 0; i < 15; ++i) CHECK(std::abs(kw.pi.row(i).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("bandwidth below the smallest gap yields the identity") {
    RngStream rng(64);
    Eigen::MatrixXd x(10, 2);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i)
        for (int j = i + 1; j < 10; ++j)
            min_gap = std::min(min_gap, (x.row(i) - x.row(j)).norm());
    for (auto spec : {KernelSpec::epanechnikov(0.5 * min_gap), KernelSpec::tricube(0.5 * min_gap)}) {
        auto kw = build_kernel_weights(x, spec);
        CHECK((kw.pi - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("uniform weighting averages the whole column") {
    KernelWeights kw;
    kw.pi = Eigen::MatrixXd::Constant(4, 4, 0.25);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd sd = Eigen::MatrixXd::Random(4, 3).cwiseAbs().array() + 0.1;
    auto [mu_p, sd_p] = prior_moments(kw, mu, sd);
    for (int i = 0; i < 4; ++i) {
        CHECK((mu_p.row(i) - mu.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sd_p.row(i) - sd.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(sd_p.minCoeff() > 0.0);
}

}  // TEST_SUITE
