#include "penn/trainer.hpp"

#include <cmath>
#include <string>

namespace penn::trainer {

diffcore::GradientBundle clip_gradients(diffcore::GradientBundle g, double clip_value,
                                        double clip_norm) {
    require(clip_value > 0.0 && clip_norm > 0.0, "clip_gradients: thresholds must be positive");
    double sq_sum = 0.0;
    g.for_each([&](double* p, Eigen::Index len) {
        for (Eigen::Index i = 0; i < len; ++i) {
            p[i] = std::clamp(p[i], -clip_value, clip_value);
            sq_sum += p[i] * p[i];
        }
    });
    const double norm = std::sqrt(sq_sum);
    if (norm > clip_norm) {
        const double scale = clip_norm / norm;
        g.for_each([&](double* p, Eigen::Index len) {
            for (Eigen::Index i = 0; i < len; ++i) p[i] *= scale;
        });
    }
    return g;
}

void adam_step(diffcore::NetworkWeights& weights, const diffcore::GradientBundle& g,
               AdamState& state, const OptimizerConfig& cfg,
               const diffcore::NetworkTopology& topo) {
    cfg.validate();
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    auto update = [&](double* w, const double* grad, double* m, double* v, Eigen::Index len) {
        for (Eigen::Index i = 0; i < len; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    };

    for (std::size_t l = 0; l < weights.hidden_w.size(); ++l) {
        update(weights.hidden_w[l].data(), g.hidden_w[l].data(), state.m.hidden_w[l].data(),
               state.v.hidden_w[l].data(), weights.hidden_w[l].size());
        update(weights.hidden_b[l].data(), g.hidden_b[l].data(), state.m.hidden_b[l].data(),
               state.v.hidden_b[l].data(), weights.hidden_b[l].size());
    }
    update(weights.mean_w.data(), g.mean_w.data(), state.m.mean_w.data(), state.v.mean_w.data(),
           weights.mean_w.size());
    update(weights.mean_b.data(), g.mean_b.data(), state.m.mean_b.data(), state.v.mean_b.data(),
           weights.mean_b.size());
    update(weights.sigma_w.data(), g.sigma_w.data(), state.m.sigma_w.data(),
           state.v.sigma_w.data(), weights.sigma_w.size());
    update(weights.sigma_b.data(), g.sigma_b.data(), state.m.sigma_b.data(),
           state.v.sigma_b.data(), weights.sigma_b.size());

    weights.apply_static_mask(topo);
}

TrainedModel train(const Dataset& data, const PennConfig& cfg, ProgressHook progress) {
    data.validate();
    cfg.validate();

    const Eigen::Index n = data.n();
    const Eigen::Index k = data.k();
    const Eigen::MatrixXd& enc_raw = data.encoder_input();

    TrainedModel model;
    model.config = cfg;

    // Encoder inputs are standardized with statistics kept for inference
    // time; a shared constant intercept column passes through unchanged.
    const int passthrough = (data.encoder_shares_x() && data.intercept) ? 0 : -1;
    model.encoder_stats = Standardization::fit(enc_raw, passthrough);
    const Eigen::MatrixXd enc = model.encoder_stats.apply(enc_raw);

    model.topology.input_dim = static_cast<int>(enc.cols());
    model.topology.hidden_dims = cfg.hidden_dims;
    model.topology.output_dim = static_cast<int>(k);
    model.topology.activation = cfg.activation;
    model.topology.static_mask =
        cfg.static_mask.empty() ? diffcore::no_static_mask(static_cast<int>(k)) : cfg.static_mask;
    model.topology.validate();

    // The weighting matrix is a function of the data only; it is built once
    // and treated as a constant during differentiation. Distances are taken
    // over standardized encoder inputs with the intercept column excluded.
    Eigen::MatrixXd dist_input = enc;
    if (passthrough == 0) dist_input = enc.rightCols(enc.cols() - 1);
    const prior::KernelWeights kw = prior::build_kernel_weights(dist_input, cfg.kernel);

    RngStream root(cfg.optimizer.rng_seed);
    RngStream init_rng = root.derive("init");
    RngStream noise_rng = root.derive("noise");

    model.weights = diffcore::NetworkWeights::glorot(model.topology, init_rng);
    AdamState adam = AdamState::init(model.topology);

    const Eigen::Index m = cfg.monte_carlo_draws;
    Eigen::VectorXd noise(n * m * k);
    model.loss_trace.reserve(static_cast<std::size_t>(cfg.optimizer.epochs));

    for (int epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = noise_rng.normal();

        auto fwd = diffcore::forward(model.weights, model.topology, enc);
        loss::ObjectiveGrad obj;
        try {
            obj = loss::objective_with_gradient(data.y, data.x, fwd.mu, fwd.sigma, noise,
                                                static_cast<int>(m), kw.pi, cfg.lambda,
                                                cfg.freeze_prior_in_gradient);
        } catch (const Error& e) {
            throw Error("train: epoch " + std::to_string(epoch) + ": " + e.what());
        }

        auto grads = diffcore::backward(model.weights, model.topology, fwd.tape, obj.d_mu_q,
                                        obj.d_sigma_q);
        grads = clip_gradients(std::move(grads), cfg.optimizer.clip_value, cfg.optimizer.clip_norm);
        adam_step(model.weights, grads, adam, cfg.optimizer, model.topology);

        model.loss_trace.push_back(obj.value);
        if (progress) progress(epoch, obj.value);
    }
    return model;
}

}  // namespace penn::trainer
