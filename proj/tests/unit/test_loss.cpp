#include <doctest.h>

#include <Eigen/Dense>

#include "penn/diffcore.hpp"
#include "penn/loss.hpp"
#include "penn/prior.hpp"
#include "penn/rng.hpp"
#include "support/oracles.hpp"

using namespace penn;

TEST_SUITE("loss") {

TEST_CASE("monte carlo misfit arithmetic") {
    Eigen::VectorXd y(1);
    y << 0.0;
    Eigen::MatrixXd draws(1, 2);
    draws << 1.0, -1.0;
    CHECK(loss::mc_gaussian_nll(y, draws) == doctest::Approx(1.0));

    Eigen::VectorXd y2 = Eigen::VectorXd::Random(7);
    Eigen::MatrixXd perfect = y2.replicate(1, 4);
    CHECK(loss::mc_gaussian_nll(y2, perfect) == 0.0);
}

TEST_CASE("monte carlo misfit equals the naive two-loop sum") {
    RngStream rng(17);
    Eigen::VectorXd y(5);
    Eigen::MatrixXd draws(5, 3);
    for (int i = 0; i < 5; ++i) {
        y(i) = rng.normal();
        for (int m = 0; m < 3; ++m) draws(i, m) = rng.normal();
    }
    double naive = 0.0;
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 5; ++i) naive += (y(i) - draws(i, m)) * (y(i) - draws(i, m));
    naive /= 3.0;
    CHECK(std::abs(loss::mc_gaussian_nll(y, draws) - naive) < 1e-12);
}

TEST_CASE("closed-form divergence on textbook cases") {
    CHECK(loss::kl_gaussian(0.7, 1.3, 0.7, 1.3) == doctest::Approx(0.0));
    CHECK(loss::kl_gaussian(0.0, 1.0, 1.0, 1.0) == doctest::Approx(0.5));
    CHECK(loss::kl_gaussian(0.0, 2.0, 0.0, 1.0) ==
          doctest::Approx(std::log(0.5) + 2.0 - 0.5).epsilon(1e-12));
    CHECK_THROWS_AS(loss::kl_gaussian(0.0, -1.0, 0.0, 1.0), Error);
}

TEST_CASE("divergence is nonnegative and zero only at equality") {
    const double moments[] = {0.1, 0.5, 1.0, 2.0};
    for (double mq : moments)
        for (double sq : moments)
            for (double mp : moments)
                for (double sp : moments) {
                    const double kl = loss::kl_gaussian(mq, sq, mp, sp);
                    CHECK(kl >= -1e-12);
                    if (mq == mp && sq == sp)
                        CHECK(std::abs(kl) <= 1e-12);
                    else
                        CHECK(kl > 1e-12);
                }
}

TEST_CASE("closed form matches a Monte Carlo estimate") {
    RngStream rng(99);
    for (int trial = 0; trial < 4; ++trial) {
        RngStream t = rng.derive(static_cast<std::uint64_t>(trial));
        const double mq = 2.0 * t.normal();
        const double sq = 0.3 + std::abs(t.normal());
        const double mp = 2.0 * t.normal();
        const double sp = 0.3 + std::abs(t.normal());
        const double mc = oracles::mc_kl_gaussian(mq, sq, mp, sp, 1000000, t);
        CHECK(std::abs(loss::kl_gaussian(mq, sq, mp, sp) - mc) < 5e-3);
    }
}

TEST_CASE("kl_total sums positions and vanishes under the identity kernel") {
    Eigen::MatrixXd mu_q = Eigen::MatrixXd::Constant(3, 2, 0.0);
    Eigen::MatrixXd sigma_q = Eigen::MatrixXd::Constant(3, 2, 1.0);
    Eigen::MatrixXd mu_p = Eigen::MatrixXd::Constant(3, 2, 1.0);
    Eigen::MatrixXd sigma_p = Eigen::MatrixXd::Constant(3, 2, 1.0);
    CHECK(loss::kl_total(mu_q, sigma_q, mu_p, sigma_p) == doctest::Approx(3.0));

    // Identity weighting: prior equals posterior position by position.
    prior::KernelWeights kw;
    kw.pi = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd rnd_mu = Eigen::MatrixXd::Random(3, 2);
    Eigen::MatrixXd rnd_sd = Eigen::MatrixXd::Random(3, 2).cwiseAbs().array() + 0.2;
    auto [mp, sp] = prior::prior_moments(kw, rnd_mu, rnd_sd);
    CHECK(loss::kl_total(rnd_mu, rnd_sd, mp, sp) == doctest::Approx(0.0));
}

TEST_CASE("total is additive in lambda") {
    RngStream rng(7);
    const int n = 6, k = 2, m = 4;
    Eigen::VectorXd y(n);
    Eigen::MatrixXd yhat(n, m);
    Eigen::MatrixXd mu_q(n, k), sigma_q(n, k), mu_p(n, k), sigma_p(n, k);
    for (int i = 0; i < n; ++i) {
        y(i) = rng.normal();
        for (int j = 0; j < m; ++j) yhat(i, j) = rng.normal();
        for (int c = 0; c < k; ++c) {
            mu_q(i, c) = rng.normal();
            sigma_q(i, c) = 0.3 + std::abs(rng.normal());
            mu_p(i, c) = rng.normal();
            sigma_p(i, c) = 0.3 + std::abs(rng.normal());
        }
    }
    const auto l0 = loss::penn_loss(y, yhat, mu_q, sigma_q, mu_p, sigma_p, 0.0);
    const auto l1 = loss::penn_loss(y, yhat, mu_q, sigma_q, mu_p, sigma_p, 1.0);
    const auto l2 = loss::penn_loss(y, yhat, mu_q, sigma_q, mu_p, sigma_p, 2.0);
    CHECK(l0.total == l0.mc_mse);
    CHECK(l1.total == doctest::Approx(l1.mc_mse + l1.kl_total));
    CHECK(l2.total == doctest::Approx(l2.mc_mse + 2.0 * l2.kl_total));
    CHECK(l0.kl_total == doctest::Approx(l1.kl_total));
}

// Posterior / evidence identity on a one-dimensional conjugate toy problem,
// entirely by quadrature: log evidence minus the divergence from q to the
// exact posterior must equal the expected log-likelihood under q minus the
// divergence from q to the prior.
TEST_CASE("elbo identity holds on a quadrature toy problem") {
    const double x = 1.3, y = 0.9, sd_e = 0.7;
    const double mu_p = 0.4, sd_p = 1.1;
    const double mu_q = 0.8, sd_q = 0.5;

    auto likelihood = [&](double b) { return oracles::gaussian_pdf(y, x * b, sd_e); };
    auto prior_pdf = [&](double b) { return oracles::gaussian_pdf(b, mu_p, sd_p); };
    auto q_pdf = [&](double b) { return oracles::gaussian_pdf(b, mu_q, sd_q); };

    const double lo = -14.0, hi = 14.0;
    const int points = 2000001;

    const double evidence = oracles::trapezoid(
        [&](double b) { return likelihood(b) * prior_pdf(b); }, lo, hi, points);

    const double kl_q_posterior = oracles::trapezoid(
        [&](double b) {
            const double q = q_pdf(b);
            if (q <= 0.0) return 0.0;
            const double post = likelihood(b) * prior_pdf(b) / evidence;
            return q * std::log(q / post);
        },
        lo, hi, points);

    const double expected_loglik = oracles::trapezoid(
        [&](double b) { return q_pdf(b) * std::log(likelihood(b)); }, lo, hi, points);

    const double lhs = std::log(evidence) - kl_q_posterior;
    const double rhs = expected_loglik - loss::kl_gaussian(mu_q, sd_q, mu_p, sd_p);
    CHECK(std::abs(lhs - rhs) < 1e-4);
}

TEST_CASE("objective gradient survives finite differences end to end") {
    RngStream rng(2024);
    const int n = 12, k = 3, m = 6;
    diffcore::NetworkTopology topo;
    topo.input_dim = k;
    topo.hidden_dims = {5, 4};
    topo.output_dim = k;
    topo.static_mask = diffcore::no_static_mask(k);
    RngStream wr = rng.derive("weights");
    auto w = diffcore::NetworkWeights::glorot(topo, wr);

    Eigen::MatrixXd z(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) z(i, c) = rng.normal();
        y(i) = rng.normal();
    }
    Eigen::VectorXd noise(n * m * k);
    for (int i = 0; i < noise.size(); ++i) noise(i) = rng.normal();

    const auto kw = prior::build_kernel_weights(z, prior::KernelSpec::disjoint(0.4));
    const double lambda = 0.7;

    auto loss_of = [&](const diffcore::NetworkWeights& wi) {
        auto f = diffcore::forward(wi, topo, z);
        return loss::objective_with_gradient(y, z, f.mu, f.sigma, noise, m, kw.pi, lambda)
            .value.total;
    };

    auto fwd = diffcore::forward(w, topo, z);
    auto obj = loss::objective_with_gradient(y, z, fwd.mu, fwd.sigma, noise, m, kw.pi, lambda);
    auto analytic = diffcore::backward(w, topo, fwd.tape, obj.d_mu_q, obj.d_sigma_q);
    CHECK(diffcore::finite_difference_check(loss_of, w, topo, analytic, 1e-5) < 1e-5);

    // Frozen prior moments change the gradient but not the value.
    auto frozen =
        loss::objective_with_gradient(y, z, fwd.mu, fwd.sigma, noise, m, kw.pi, lambda, true);
    CHECK(frozen.value.total == doctest::Approx(obj.value.total));
    CHECK((frozen.d_mu_q - obj.d_mu_q).cwiseAbs().maxCoeff() > 0.0);
}

}  // TEST_SUITE
