#include "penn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace penn::explain {

ContributionMatrix contributions(const Eigen::MatrixXd& beta_mean, const Eigen::MatrixXd& x) {
    require(beta_mean.rows() == x.rows() && beta_mean.cols() == x.cols(),
            "contributions: beta and x shapes differ");
    ContributionMatrix out;
    Eigen::MatrixXd prod = beta_mean.array() * x.array();
    const Eigen::RowVectorXd col_means = prod.colwise().mean();
    out.phi = prod.rowwise() - col_means;
    out.baseline_mean = col_means.sum();
    return out;
}

double mae_phi(const Eigen::MatrixXd& phi_hat, const Eigen::MatrixXd& phi_true) {
    require(phi_hat.rows() == phi_true.rows() && phi_hat.cols() == phi_true.cols(),
            "mae_phi: shapes differ");
    return (phi_true - phi_hat).array().abs().mean();
}

Eigen::VectorXd sampled_shapley(const PredictFn& predict, const Eigen::MatrixXd& x,
                                Eigen::Index i, int n_draws, RngStream& rng) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    require(n_draws >= 1, "sampled_shapley: n_draws must be >= 1");
    require(i >= 0 && i < n, "sampled_shapley: row index out of range");

    // All evaluation points for all draws are batched into one predict call:
    // per draw, the chain row_0 = background, row_j = row_{j-1} with the
    // j-th permuted feature switched to x_i.
    Eigen::MatrixXd eval(static_cast<Eigen::Index>(n_draws) * (k + 1), k);
    std::vector<std::vector<Eigen::Index>> perms(static_cast<std::size_t>(n_draws));
    Eigen::Index row = 0;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(k));
    for (int d = 0; d < n_draws; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        for (Eigen::Index j = k - 1; j > 0; --j)
            std::swap(perm[static_cast<std::size_t>(j)],
                      perm[rng.uniform_index(static_cast<std::size_t>(j + 1))]);
        perms[static_cast<std::size_t>(d)] = perm;

        const Eigen::Index b = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
        Eigen::RowVectorXd current = x.row(b);
        eval.row(row++) = current;
        for (Eigen::Index j = 0; j < k; ++j) {
            current(perm[static_cast<std::size_t>(j)]) = x(i, perm[static_cast<std::size_t>(j)]);
            eval.row(row++) = current;
        }
    }

    const Eigen::VectorXd preds = predict(eval);
    require(preds.size() == eval.rows(), "sampled_shapley: predict_fn returned wrong length");

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(k);
    row = 0;
    for (int d = 0; d < n_draws; ++d) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index feat = perms[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
            phi(feat) += preds(row + j + 1) - preds(row + j);
        }
        row += k + 1;
    }
    return phi / static_cast<double>(n_draws);
}

std::pair<Eigen::VectorXd, double> lime_local(const PredictFn& predict,
                                              const Eigen::VectorXd& x_i, const LimeConfig& cfg,
                                              RngStream& rng) {
    const Eigen::Index k = x_i.size();
    require(cfg.sigma_z > 0.0, "lime_local: sigma_z must be positive");
    require(cfg.n_samples > static_cast<int>(k) + 1, "lime_local: n_samples must exceed K+1");

    const double width = cfg.effective_width(k);
    Eigen::MatrixXd z(cfg.n_samples, k);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < k; ++c) z(r, c) = x_i(c) + cfg.sigma_z * rng.normal();

    const Eigen::VectorXd f = predict(z);
    require(f.size() == z.rows(), "lime_local: predict_fn returned wrong length");

    Eigen::VectorXd sqrt_w(z.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double d2 = (z.row(r).transpose() - x_i).squaredNorm();
        sqrt_w(r) = std::exp(-d2 / (4.0 * width * width));  // sqrt of exp(-d2/(2 w^2))
    }

    Eigen::MatrixXd design(z.rows(), k + 1);
    design.col(0).setOnes();
    design.rightCols(k) = z;
    design.array().colwise() *= sqrt_w.array();
    const Eigen::VectorXd target = f.array() * sqrt_w.array();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k + 1)
        throw Error("lime_local: weighted design is singular; raise n_samples or sigma_z");
    const Eigen::VectorXd coef = qr.solve(target);
    return {coef.tail(k), coef(0)};
}

Eigen::VectorXd static_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    require(x.rows() == y.size(), "static_ols: row count mismatch");
    require(x.rows() >= x.cols(), "static_ols: fewer rows than coefficients");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw Error("static_ols: rank-deficient design");
    return qr.solve(y);
}

Eigen::MatrixXd rolling_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int window) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    require(window >= static_cast<int>(k) + 1, "rolling_ols: window must be >= K+1");
    require(n >= window, "rolling_ols: sample shorter than window");

    Eigen::MatrixXd out(n - window + 1, k);
    for (Eigen::Index end = window - 1; end < n; ++end) {
        const Eigen::Index start = end - window + 1;
        try {
            out.row(start) =
                static_ols(x.middleRows(start, window), y.segment(start, window)).transpose();
        } catch (const Error&) {
            out.row(start).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

}  // namespace penn::explain
