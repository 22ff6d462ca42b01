#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "penn/error.hpp"
#include "penn/rng.hpp"

namespace penn::diffcore {

enum class Activation { Sigmoid, Tanh };

// Feed-forward inference network: a stack of dense hidden layers feeding two
// output heads. The mean head is affine, the deviation head applies exp so
// its output is strictly positive. Entries of static_mask flag outputs whose
// head rows carry no hidden-layer connections (only the bias remains), which
// pins that posterior parameter to a single value across all inputs.
struct NetworkTopology {
    int input_dim = 0;                       // J
    std::vector<int> hidden_dims;            // nonempty
    int output_dim = 0;                      // K
    std::vector<std::uint8_t> static_mask;   // size K, 1 = static
    Activation activation = Activation::Sigmoid;

    void validate() const {
        require(input_dim >= 1, "topology: input_dim must be >= 1");
        require(output_dim >= 1, "topology: output_dim must be >= 1");
        require(!hidden_dims.empty(), "topology: hidden_dims must be nonempty");
        for (int h : hidden_dims) require(h >= 1, "topology: hidden layer size must be >= 1");
        require(static_mask.size() == static_cast<std::size_t>(output_dim),
                "topology: static_mask length != output_dim");
    }

    bool any_static() const {
        for (auto m : static_mask)
            if (m) return true;
        return false;
    }
};

inline std::vector<std::uint8_t> no_static_mask(int k) {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(k), 0);
}

// Weight matrices are stored (out x in); biases are column vectors.
struct NetworkWeights {
    std::vector<Eigen::MatrixXd> hidden_w;
    std::vector<Eigen::VectorXd> hidden_b;
    Eigen::MatrixXd mean_w;    // K x H_last
    Eigen::VectorXd mean_b;    // K
    Eigen::MatrixXd sigma_w;   // K x H_last
    Eigen::VectorXd sigma_b;   // K

    static NetworkWeights zeros(const NetworkTopology& topo);

    // Glorot-uniform weights (+- sqrt(6/(fan_in+fan_out))), zero biases,
    // masked head rows zeroed.
    static NetworkWeights glorot(const NetworkTopology& topo, RngStream& rng);

    void apply_static_mask(const NetworkTopology& topo) {
        for (int k = 0; k < topo.output_dim; ++k) {
            if (topo.static_mask[static_cast<std::size_t>(k)]) {
                mean_w.row(k).setZero();
                sigma_w.row(k).setZero();
            }
        }
    }

    // Visits every scalar in a fixed order (hidden stack, mean head, sigma
    // head). Masked head rows are included; they stay zero by invariant.
    template <typename F>
    void for_each(F&& f) {
        for (auto& w : hidden_w) f(w.data(), w.size());
        for (auto& b : hidden_b) f(b.data(), b.size());
        f(mean_w.data(), mean_w.size());
        f(mean_b.data(), mean_b.size());
        f(sigma_w.data(), sigma_w.size());
        f(sigma_b.data(), sigma_b.size());
    }

    template <typename F>
    void for_each(F&& f) const {
        for (const auto& w : hidden_w) f(w.data(), w.size());
        for (const auto& b : hidden_b) f(b.data(), b.size());
        f(mean_w.data(), mean_w.size());
        f(mean_b.data(), mean_b.size());
        f(sigma_w.data(), sigma_w.size());
        f(sigma_b.data(), sigma_b.size());
    }

    Eigen::Index scalar_count() const {
        Eigen::Index n = 0;
        for_each([&](const double*, Eigen::Index len) { n += len; });
        return n;
    }
};

// Gradients share the exact shape of the weights they differentiate.
using GradientBundle = NetworkWeights;

// Activation record from a forward pass; sufficient for one backward pass.
struct ForwardTape {
    Eigen::MatrixXd input;                  // N x J
    std::vector<Eigen::MatrixXd> hidden;    // activations, N x hidden_dims[l]
    Eigen::MatrixXd mu;                     // N x K
    Eigen::MatrixXd sigma;                  // N x K, strictly positive
};

struct ForwardResult {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd sigma;
    ForwardTape tape;
};

ForwardResult forward(const NetworkWeights& w, const NetworkTopology& topo,
                      const Eigen::MatrixXd& z_batch);

// Exact reverse-mode gradients of a scalar loss given dL/dmu and dL/dsigma.
// Masked head rows receive exactly zero gradient.
GradientBundle backward(const NetworkWeights& w, const NetworkTopology& topo,
                        const ForwardTape& tape, const Eigen::MatrixXd& d_mu,
                        const Eigen::MatrixXd& d_sigma);

// Central-difference audit of an analytic gradient. Perturbs every free
// scalar weight by +-step (masked head rows are fixed at zero and skipped)
// and returns the worst relative error, with denominator
// max(|analytic|, |numeric|, 1e-12).
double finite_difference_check(const std::function<double(const NetworkWeights&)>& loss_fn,
                               const NetworkWeights& weights, const NetworkTopology& topo,
                               const GradientBundle& analytic, double step);

}  // namespace penn::diffcore
