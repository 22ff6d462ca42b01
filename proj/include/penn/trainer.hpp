#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "penn/dataset.hpp"
#include "penn/diffcore.hpp"
#include "penn/encoder.hpp"
#include "penn/loss.hpp"
#include "penn/prior.hpp"

namespace penn::trainer {

struct OptimizerConfig {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 1.0;   // threshold for the global l2 norm
    double clip_value = 0.5;  // threshold for each scalar gradient
    int epochs = 500;
    std::uint64_t rng_seed = 0;

    void validate() const {
        require(learning_rate > 0.0, "optimizer: learning_rate must be positive");
        require(beta1 >= 0.0 && beta1 < 1.0, "optimizer: beta1 must lie in [0, 1)");
        require(beta2 >= 0.0 && beta2 < 1.0, "optimizer: beta2 must lie in [0, 1)");
        require(clip_norm > 0.0 && clip_value > 0.0, "optimizer: clip thresholds must be positive");
        require(epochs >= 1, "optimizer: epochs must be >= 1");
    }
};

// Model-level settings: regularization, kernel, topology and sampling.
struct PennConfig {
    double lambda = 0.1;
    prior::KernelSpec kernel = prior::KernelSpec::disjoint(0.2);
    std::vector<int> hidden_dims{16, 16};
    int monte_carlo_draws = 100;
    diffcore::Activation activation = diffcore::Activation::Sigmoid;
    std::vector<std::uint8_t> static_mask;  // size K or empty (= none static)
    bool freeze_prior_in_gradient = false;
    OptimizerConfig optimizer;

    void validate() const {
        require(lambda >= 0.0, "config: lambda must be nonnegative");
        require(monte_carlo_draws >= 1, "config: monte_carlo_draws must be >= 1");
        require(!hidden_dims.empty(), "config: hidden_dims must be nonempty");
        optimizer.validate();
    }
};

struct TrainedModel {
    diffcore::NetworkTopology topology;
    diffcore::NetworkWeights weights;
    PennConfig config;
    Standardization encoder_stats;
    std::vector<loss::LossBreakdown> loss_trace;

    // Posterior parameters for raw (unstandardized) encoder inputs.
    encoder::PosteriorParams infer(const Eigen::MatrixXd& z_raw) const {
        return encoder::infer_posterior(weights, topology, encoder_stats.apply(z_raw));
    }

    // Posterior-mean predictions yhat_i = x_i . mu_q(z_i).
    Eigen::VectorXd predict_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z_raw) const {
        const auto post = infer(z_raw);
        return (x.array() * post.mu_q.array()).rowwise().sum();
    }

    Eigen::VectorXd predict_mean(const Dataset& data) const {
        return predict_mean(data.x, data.encoder_input());
    }
};

// Scalar clamp to [-clip_value, clip_value] first, then a global rescale if
// the l2 norm of the whole bundle still exceeds clip_norm.
diffcore::GradientBundle clip_gradients(diffcore::GradientBundle g, double clip_value,
                                        double clip_norm);

struct AdamState {
    diffcore::NetworkWeights m;
    diffcore::NetworkWeights v;
    long t = 0;

    static AdamState init(const diffcore::NetworkTopology& topo) {
        return {diffcore::NetworkWeights::zeros(topo), diffcore::NetworkWeights::zeros(topo), 0};
    }
};

void adam_step(diffcore::NetworkWeights& weights, const diffcore::GradientBundle& g,
               AdamState& state, const OptimizerConfig& cfg,
               const diffcore::NetworkTopology& topo);

using ProgressHook = std::function<void(int epoch, const loss::LossBreakdown&)>;

// Full-batch training: standardize encoder inputs, build the weighting
// matrix once, then iterate resample / forward / loss / backward / clip /
// Adam for cfg.optimizer.epochs epochs. Deterministic under a fixed seed.
TrainedModel train(const Dataset& data, const PennConfig& cfg, ProgressHook progress = nullptr);

}  // namespace penn::trainer
