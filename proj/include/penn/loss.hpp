#pragma once

#include <Eigen/Dense>

#include "penn/error.hpp"

namespace penn::loss {

// Objective decomposition: total = mc_mse + lambda * kl_total. The KL term
// enters as a penalty with positive sign; kl_total is nonnegative up to
// roundoff.
struct LossBreakdown {
    double mc_mse = 0.0;
    double kl_total = 0.0;
    double lambda = 0.0;
    double total = 0.0;
};

// Monte Carlo Gaussian misfit: (1/M) * sum_m sum_i (y_i - yhat_i^m)^2.
double mc_gaussian_nll(const Eigen::VectorXd& y, const Eigen::MatrixXd& yhat_draws);

// Closed-form divergence between the univariate Gaussians N(mu_q, sigma_q^2)
// and N(mu_p, sigma_p^2):
//   log(sigma_p/sigma_q) + (sigma_q^2 + (mu_q - mu_p)^2) / (2 sigma_p^2) - 1/2.
double kl_gaussian(double mu_q, double sigma_q, double mu_p, double sigma_p);

// Sum of kl_gaussian over all (i, k) positions.
double kl_total(const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                const Eigen::MatrixXd& mu_p, const Eigen::MatrixXd& sigma_p);

LossBreakdown penn_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& yhat_draws,
                        const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                        const Eigen::MatrixXd& mu_p, const Eigen::MatrixXd& sigma_p,
                        double lambda);

// Value and exact gradient of the full objective with respect to the
// posterior parameterization, for fixed noise draws and weighting matrix.
//
// noise is laid out draw-major per observation: noise[(i*M + m)*K + k].
// The prior moments mu_p = pi*mu_q and sigma_p = pi*sigma_q are recomputed
// internally; unless freeze_prior is set, the gradient includes the chain
// through them (a pi^T product on the prior-side partials).
struct ObjectiveGrad {
    LossBreakdown value;
    Eigen::MatrixXd d_mu_q;     // N x K
    Eigen::MatrixXd d_sigma_q;  // N x K
};

ObjectiveGrad objective_with_gradient(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& mu_q, const Eigen::MatrixXd& sigma_q,
                                      const Eigen::VectorXd& noise, int monte_carlo_draws,
                                      const Eigen::MatrixXd& pi, double lambda,
                                      bool freeze_prior = false);

}  // namespace penn::loss
