#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "penn/error.hpp"
#include "penn/rng.hpp"

namespace penn::explain {

// Batched model evaluation: rows in, one prediction per row out.
using PredictFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

// Centered per-feature contribution shares. Row sums reproduce
// yhat_i - E[yhat] when the phi stem from local linear coefficients.
struct ContributionMatrix {
    Eigen::MatrixXd phi;       // N x K
    double baseline_mean = 0;  // E[raw per-feature products] summed, i.e. E[yhat] less intercept
};

// phi_ik = beta_ik * x_ik - mean_i(beta_ik * x_ik).
ContributionMatrix contributions(const Eigen::MatrixXd& beta_mean, const Eigen::MatrixXd& x);

// Mean absolute error between contribution matrices, averaged over N*K.
double mae_phi(const Eigen::MatrixXd& phi_hat, const Eigen::MatrixXd& phi_true);

// Monte Carlo permutation estimate of Shapley values for observation i,
// with the data matrix itself as the background distribution. Per draw, one
// permutation and one background row are sampled and the telescoping chain
// from all-background to all-x_i is evaluated.
Eigen::VectorXd sampled_shapley(const PredictFn& predict, const Eigen::MatrixXd& x,
                                Eigen::Index i, int n_draws, RngStream& rng);

struct LimeConfig {
    double sigma_z = 0.1;        // local sampling scale around x_i
    int n_samples = 500;
    double kernel_width = 0.0;   // <= 0: use 0.75 * sigma_z * sqrt(K)

    double effective_width(Eigen::Index k) const {
        return kernel_width > 0.0 ? kernel_width
                                  : 0.75 * sigma_z * std::sqrt(static_cast<double>(k));
    }
};

// Local surrogate: draw z ~ N(x_i, sigma_z^2 I), weight by a Gaussian
// proximity kernel and fit a weighted least-squares line with intercept.
std::pair<Eigen::VectorXd, double> lime_local(const PredictFn& predict,
                                              const Eigen::VectorXd& x_i, const LimeConfig& cfg,
                                              RngStream& rng);

// Closed-form least squares through a rank-revealing QR factorization.
Eigen::VectorXd static_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Trailing-window least squares; row r holds the fit over rows
// [r, r+window-1] of the input, indexed by window end. Windows with a
// rank-deficient design yield NaN rows.
Eigen::MatrixXd rolling_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int window);

}  // namespace penn::explain
