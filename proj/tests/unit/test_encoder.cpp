#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

#include "penn/encoder.hpp"
#include "penn/rng.hpp"
#include "support/oracles.hpp"

using namespace penn;
using namespace penn::encoder;

namespace {

diffcore::NetworkTopology small_topo(int j, int k) {
    diffcore::NetworkTopology t;
    t.input_dim = j;
    t.hidden_dims = {6, 6};
    t.output_dim = k;
    t.static_mask = diffcore::no_static_mask(k);
    return t;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("identical rows produce identical posterior rows") {
    auto topo = small_topo(3, 2);
    RngStream rng(1);
    auto w = diffcore::NetworkWeights::glorot(topo, rng);
    Eigen::MatrixXd z(4, 3);
    z.row(0) << 0.3, -1.0, 2.0;
    z.row(1) = z.row(0);
    z.row(2) << 1.0, 1.0, 1.0;
    z.row(3) = z.row(0);
    auto post = infer_posterior(w, topo, z);
    CHECK((post.mu_q.row(0) - post.mu_q.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((post.sigma_q.row(0) - post.sigma_q.row(3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((post.mu_q.row(0) - post.mu_q.row(2)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("permuting input rows permutes posterior rows identically") {
    auto topo = small_topo(4, 3);
    RngStream rng(2);
    auto w = diffcore::NetworkWeights::glorot(topo, rng);
    Eigen::MatrixXd z = Eigen::MatrixXd::Random(9, 4);
    auto base = infer_posterior(w, topo, z);

    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[2], perm[5]);
    Eigen::MatrixXd zp(9, 4);
    for (int i = 0; i < 9; ++i) zp.row(i) = z.row(perm[i]);
    auto permuted = infer_posterior(w, topo, zp);
    for (int i = 0; i < 9; ++i) {
        CHECK((permuted.mu_q.row(i) - base.mu_q.row(perm[i])).cwiseAbs().maxCoeff() == 0.0);
        CHECK((permuted.sigma_q.row(i) - base.sigma_q.row(perm[i])).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("sampling is reproducible and degenerate at zero spread") {
    PosteriorParams post;
    post.mu_q = Eigen::MatrixXd::Random(5, 2);
    post.sigma_q = Eigen::MatrixXd::Zero(5, 2);
    RngStream rng(3);
    auto samples = sample_coefficients(post, 7, rng);
    for (int i = 0; i < 5; ++i)
        for (int m = 0; m < 7; ++m)
            for (int c = 0; c < 2; ++c) CHECK(samples(i, m, c) == post.mu_q(i, c));

    post.sigma_q = Eigen::MatrixXd::Constant(5, 2, 0.8);
    RngStream r1(17), r2(17);
    auto a = sample_coefficients(post, 11, r1);
    auto b = sample_coefficients(post, 11, r2);
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample moments converge to the posterior parameters") {
    PosteriorParams post;
    post.mu_q = Eigen::MatrixXd::Constant(1, 2, 1.5);
    post.mu_q(0, 1) = -0.7;
    post.sigma_q = Eigen::MatrixXd::Constant(1, 2, 0.6);
    post.sigma_q(0, 1) = 1.9;
    const int m = 100000;
    RngStream rng(5);
    auto samples = sample_coefficients(post, m, rng);
    for (int c = 0; c < 2; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int d = 0; d < m; ++d) {
            sum += samples(0, d, c);
            sq += samples(0, d, c) * samples(0, d, c);
        }
        const double mean = sum / m;
        const double var = sq / m - mean * mean;
        const double sd = post.sigma_q(0, c);
        CHECK(std::abs(mean - post.mu_q(0, c)) < 4.0 * sd / std::sqrt(static_cast<double>(m)));
        CHECK(std::abs(var - sd * sd) < 0.05 * sd * sd);
    }
}

TEST_CASE("prediction arithmetic") {
    CoefficientSamples s;
    s.n = 2;
    s.m = 2;
    s.k = 1;
    s.beta. resize(4);
    s.beta << 3.0, 4.0, 5.0, -1.0;
    Eigen::MatrixXd x(2, 1);
    x << 2.0, 0.0;
    auto [draws, mean] = predict(x, s);
    CHECK(draws(0, 0) == 6.0);  // K=1: x=2, beta=3
    CHECK(draws(0, 1) == 8.0);
    CHECK(mean(0) == 7.0);
    CHECK(draws(1, 0) == 0.0);  // zero row predicts zero for all draws
    CHECK(mean(1) == 0.0);
}

TEST_CASE("prediction mean approaches x . mu as draws grow") {
    PosteriorParams post;
    post.mu_q = Eigen::MatrixXd::Random(3, 2);
    post.sigma_q = Eigen::MatrixXd::Constant(3, 2, 0.5);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 2);
    RngStream rng(9);
    auto samples = sample_coefficients(post, 200000, rng);
    auto [draws, mean] = predict(x, samples);
    (void)draws;
    const Eigen::VectorXd exact = (x.array() * post.mu_q.array()).rowwise().sum();
    for (int i = 0; i < 3; ++i) CHECK(std::abs(mean(i) - exact(i)) < 0.01);
}

TEST_CASE("posterior bands") {
    PosteriorParams post;
    post.mu_q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    post.sigma_q = Eigen::MatrixXd::Constant(1, 1, 0.5);
    auto [lo, hi] = predict_posterior_bands(post, 2.0);
    CHECK(lo(0, 0) == doctest::Approx(0.0));
    CHECK(hi(0, 0) == doctest::Approx(2.0));
    post.sigma_q.setConstant(1e-300);
    auto [lo2, hi2] = predict_posterior_bands(post, 2.0);
    CHECK(lo2(0, 0) == doctest::Approx(1.0));
    CHECK(hi2(0, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(predict_posterior_bands(post, 0.0), Error);
}

// Product-rule decomposition of the mean prediction: for f(x) = x . mu(x),
// d f / d x_c = mu_c + (d mu / d x_c) . x. Holds for any weights when the
// encoder and decoder share inputs.
TEST_CASE("mean-prediction gradient decomposes into coefficient plus curvature") {
    auto topo = small_topo(3, 3);
    RngStream rng(12);
    auto w = diffcore::NetworkWeights::glorot(topo, rng);

    auto mu_of = [&](const Eigen::VectorXd& x) {
        return infer_posterior(w, topo, x.transpose()).mu_q.row(0).transpose().eval();
    };
    auto f_of = [&](const Eigen::VectorXd& x) { return mu_of(x).dot(x); };

    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd x(3);
        for (int c = 0; c < 3; ++c) x(c) = rng.normal();
        const Eigen::VectorXd fd_f = oracles::fd_gradient(f_of, x, 1e-5);
        const Eigen::VectorXd mu = mu_of(x);
        for (int c = 0; c < 3; ++c) {
            auto mu_component = [&](const Eigen::VectorXd& xi) { return mu_of(xi); };
            // Finite-difference Jacobian column d mu / d x_c.
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += 1e-5;
            xm(c) -= 1e-5;
            const Eigen::VectorXd jac_col = (mu_component(xp) - mu_component(xm)) / 2e-5;
            const double rhs = mu(c) + jac_col.dot(x);
            CHECK(std::abs(fd_f(c) - rhs) < 1e-4);
        }
    }
}

}  // TEST_SUITE
