#include "penn/loss.hpp"

#include <cmath>

namespace penn::loss {

double mc_gaussian_nll(const Eigen::VectorXd& y, const Eigen::MatrixXd& yhat_draws) {
    require(yhat_draws.rows() == y.size(), "mc_gaussian_nll: draw rows != y length");
    require(yhat_draws.cols() >= 1, "mc_gaussian_nll: need at least one draw");
    require(yhat_draws.allFinite(), "mc_gaussian_nll: non-finite predictions");
    const double m = static_cast<double>(yhat_draws.cols());
    return (yhat_draws.colwise() - y).array().square().sum() / m;
}

double kl_gaussian(double mu_q, double sigma_q, double mu_p, double sigma_p) {
    require(sigma_q > 0.0 && sigma_p > 0.0, "kl_gaussian: standard deviations must be positive");
    const double dm = mu_q - mu_p;
    return std::log(sigma_p / sigma_q) +
           (sigma_q * sigma_q + dm * dm) / (2.0 * sigma_p * sigma_p) - 0.5;
}

double kl_total(const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                const Eigen::MatrixXd& mu_p, const Eigen::MatrixXd& sigma_p) {
    require(mu_q.rows() == mu_p.rows() && mu_q.cols() == mu_p.cols(), "kl_total: shape mismatch");
    require(mu_q.rows() == sigma_q.rows() && mu_q.cols() == sigma_q.cols(),
            "kl_total: shape mismatch");
    require(mu_q.rows() == sigma_p.rows() && mu_q.cols() == sigma_p.cols(),
            "kl_total: shape mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu_q.rows(); ++i)
        for (Eigen::Index k = 0; k < mu_q.cols(); ++k)
            total += kl_gaussian(mu_q(i, k), sigma_q(i, k), mu_p(i, k), sigma_p(i, k));
    return total;
}

LossBreakdown penn_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& yhat_draws,
                        const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                        const Eigen::MatrixXd& mu_p, const Eigen::MatrixXd& sigma_p,
                        double lambda) {
    require(lambda >= 0.0, "penn_loss: lambda must be nonnegative");
    LossBreakdown out;
    out.lambda = lambda;
    out.mc_mse = mc_gaussian_nll(y, yhat_draws);
    out.kl_total = kl_total(mu_q, sigma_q, mu_p, sigma_p);
    out.total = out.mc_mse + lambda * out.kl_total;
    require(std::isfinite(out.total), "penn_loss: non-finite total loss");
    return out;
}

ObjectiveGrad objective_with_gradient(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                                      const Eigen::VectorXd& noise, int monte_carlo_draws,
                                      const Eigen::MatrixXd& pi, double lambda,
                                      bool freeze_prior) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    const Eigen::Index m = monte_carlo_draws;
    require(m >= 1, "objective: monte_carlo_draws must be >= 1");
    require(y.size() == n, "objective: y length mismatch");
    require(mu_q.rows() == n && mu_q.cols() == k, "objective: mu_q shape mismatch");
    require(sigma_q.rows() == n && sigma_q.cols() == k, "objective: sigma_q shape mismatch");
    require(noise.size() == n * m * k, "objective: noise tensor size mismatch");
    require(pi.rows() == n && pi.cols() == n, "objective: pi shape mismatch");
    require(lambda >= 0.0, "objective: lambda must be nonnegative");

    ObjectiveGrad out;
    out.d_mu_q = Eigen::MatrixXd::Zero(n, k);
    out.d_sigma_q = Eigen::MatrixXd::Zero(n, k);

    // Monte Carlo term. Residual sums are accumulated per observation so the
    // draws never need to be materialized outside this loop.
    double mc = 0.0;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* s_row = noise.data() + i * m * k;
        double err_sum = 0.0;
        for (Eigen::Index d = 0; d < m; ++d) {
            const double* s = s_row + d * k;
            double yhat = 0.0;
            for (Eigen::Index c = 0; c < k; ++c)
                yhat += x(i, c) * (mu_q(i, c) + sigma_q(i, c) * s[c]);
            const double e = y(i) - yhat;
            mc += e * e;
            err_sum += e;
            for (Eigen::Index c = 0; c < k; ++c)
                out.d_sigma_q(i, c) -= 2.0 * inv_m * e * x(i, c) * s[c];
        }
        for (Eigen::Index c = 0; c < k; ++c) out.d_mu_q(i, c) -= 2.0 * inv_m * err_sum * x(i, c);
    }
    mc *= inv_m;

    // KL term with prior moments mu_p = pi*mu_q, sigma_p = pi*sigma_q.
    const Eigen::MatrixXd mu_p = pi * mu_q;
    const Eigen::MatrixXd sigma_p = pi * sigma_q;

    double kl = 0.0;
    Eigen::MatrixXd d_mu_p = Eigen::MatrixXd::Zero(n, k);
    Eigen::MatrixXd d_sigma_p = Eigen::MatrixXd::Zero(n, k);
    Eigen::MatrixXd d_mu_direct = Eigen::MatrixXd::Zero(n, k);
    Eigen::MatrixXd d_sigma_direct = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < k; ++c) {
            const double sq = sigma_q(i, c);
            const double sp = sigma_p(i, c);
            require(sq > 0.0 && sp > 0.0, "objective: non-positive standard deviation");
            const double dm = mu_q(i, c) - mu_p(i, c);
            const double sp2 = sp * sp;
            kl += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp2) - 0.5;
            d_mu_direct(i, c) = dm / sp2;
            d_mu_p(i, c) = -dm / sp2;
            d_sigma_direct(i, c) = -1.0 / sq + sq / sp2;
            d_sigma_p(i, c) = 1.0 / sp - (sq * sq + dm * dm) / (sp2 * sp);
        }
    }

    if (lambda > 0.0) {
        if (freeze_prior) {
            out.d_mu_q += lambda * d_mu_direct;
            out.d_sigma_q += lambda * d_sigma_direct;
        } else {
            out.d_mu_q += lambda * (d_mu_direct + pi.transpose() * d_mu_p);
            out.d_sigma_q += lambda * (d_sigma_direct + pi.transpose() * d_sigma_p);
        }
    }

    out.value.mc_mse = mc;
    out.value.kl_total = kl;
    out.value.lambda = lambda;
    out.value.total = mc + lambda * kl;
    require(std::isfinite(out.value.total), "objective: non-finite total loss");
    return out;
}

}  // namespace penn::loss
