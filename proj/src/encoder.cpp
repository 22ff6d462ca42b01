#include "penn/encoder.hpp"

namespace penn::encoder {

PosteriorParams infer_posterior(const diffcore::NetworkWeights& weights,
                                const diffcore::NetworkTopology& topology,
                                const Eigen::MatrixXd& z_std) {
    auto fwd = diffcore::forward(weights, topology, z_std);
    return {std::move(fwd.mu), std::move(fwd.sigma)};
}

CoefficientSamples sample_coefficients(const PosteriorParams& post, int monte_carlo_draws,
                                       RngStream& rng) {
    require(monte_carlo_draws >= 1, "sample_coefficients: M must be >= 1");
    const Eigen::Index n = post.mu_q.rows();
    const Eigen::Index k = post.mu_q.cols();
    require(post.sigma_q.rows() == n && post.sigma_q.cols() == k,
            "sample_coefficients: posterior shape mismatch");

    CoefficientSamples out;
    out.n = n;
    out.m = monte_carlo_draws;
    out.k = k;
    out.beta.resize(n * monte_carlo_draws * k);
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index m = 0; m < monte_carlo_draws; ++m)
            for (Eigen::Index c = 0; c < k; ++c, ++pos)
                out.beta[pos] = post.mu_q(i, c) + post.sigma_q(i, c) * rng.normal();
    return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> predict(const Eigen::MatrixXd& x,
                                                    const CoefficientSamples& samples) {
    require(x.rows() == samples.n, "predict: row count mismatch");
    require(x.cols() == samples.k, "predict: coefficient count mismatch");
    Eigen::MatrixXd draws(samples.n, samples.m);
    for (Eigen::Index i = 0; i < samples.n; ++i) {
        for (Eigen::Index m = 0; m < samples.m; ++m) {
            double acc = 0.0;
            for (Eigen::Index c = 0; c < samples.k; ++c) acc += x(i, c) * samples(i, m, c);
            draws(i, m) = acc;
        }
    }
    return {draws, draws.rowwise().mean()};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predict_posterior_bands(const PosteriorParams& post,
                                                                    double width_sd) {
    require(width_sd > 0.0, "predict_posterior_bands: width must be positive");
    return {post.mu_q - width_sd * post.sigma_q, post.mu_q + width_sd * post.sigma_q};
}

}  // namespace penn::encoder
