#pragma once

#include <Eigen/Dense>
#include <utility>

#include "penn/diffcore.hpp"
#include "penn/rng.hpp"

namespace penn::encoder {

// Per-observation Gaussian posterior parameterization of the local
// regression coefficients.
struct PosteriorParams {
    Eigen::MatrixXd mu_q;     // N x K
    Eigen::MatrixXd sigma_q;  // N x K, strictly positive
};

// Reparameterized draws beta[i][m][k] = mu_q[i][k] + sigma_q[i][k]*s, stored
// flat with index (i*M + m)*K + k.
struct CoefficientSamples {
    Eigen::VectorXd beta;
    Eigen::Index n = 0, m = 0, k = 0;

    double operator()(Eigen::Index i, Eigen::Index draw, Eigen::Index coef) const {
        return beta[(i * m + draw) * k + coef];
    }
};

// Single deterministic forward pass; z_std must already be standardized with
// the statistics the weights were trained under.
PosteriorParams infer_posterior(const diffcore::NetworkWeights& weights,
                                const diffcore::NetworkTopology& topology,
                                const Eigen::MatrixXd& z_std);

CoefficientSamples sample_coefficients(const PosteriorParams& post, int monte_carlo_draws,
                                       RngStream& rng);

// yhat_draws[i][m] = x_i . beta_i^m; yhat_mean averages over draws.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> predict(const Eigen::MatrixXd& x,
                                                    const CoefficientSamples& samples);

// Symmetric posterior bands mu_q +- width_sd * sigma_q.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predict_posterior_bands(const PosteriorParams& post,
                                                                    double width_sd);

}  // namespace penn::encoder
