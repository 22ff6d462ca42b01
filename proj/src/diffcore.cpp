#include "penn/diffcore.hpp"

#include <cmath>

namespace penn::diffcore {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::Sigmoid)
        return 1.0 / (1.0 + (-a.array()).exp());
    return a.array().tanh();
}

// Derivative expressed through the activation value itself.
Eigen::ArrayXXd activate_grad(const Eigen::MatrixXd& h, Activation act) {
    if (act == Activation::Sigmoid)
        return h.array() * (1.0 - h.array());
    return 1.0 - h.array().square();
}

}  // namespace

NetworkWeights NetworkWeights::zeros(const NetworkTopology& topo) {
    topo.validate();
    NetworkWeights w;
    int fan_in = topo.input_dim;
    for (int h : topo.hidden_dims) {
        w.hidden_w.emplace_back(Eigen::MatrixXd::Zero(h, fan_in));
        w.hidden_b.emplace_back(Eigen::VectorXd::Zero(h));
        fan_in = h;
    }
    w.mean_w = Eigen::MatrixXd::Zero(topo.output_dim, fan_in);
    w.mean_b = Eigen::VectorXd::Zero(topo.output_dim);
    w.sigma_w = Eigen::MatrixXd::Zero(topo.output_dim, fan_in);
    w.sigma_b = Eigen::VectorXd::Zero(topo.output_dim);
    return w;
}

NetworkWeights NetworkWeights::glorot(const NetworkTopology& topo, RngStream& rng) {
    NetworkWeights w = zeros(topo);
    auto fill = [&](Eigen::MatrixXd& m) {
        const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                m(i, j) = limit * (2.0 * rng.uniform_co() - 1.0);
    };
    for (auto& hw : w.hidden_w) fill(hw);
    fill(w.mean_w);
    fill(w.sigma_w);
    w.apply_static_mask(topo);
    return w;
}

ForwardResult forward(const NetworkWeights& w, const NetworkTopology& topo,
                      const Eigen::MatrixXd& z_batch) {
    topo.validate();
    require(z_batch.allFinite(), "forward: non-finite encoder input");
    require(z_batch.cols() == topo.input_dim,
            "forward: input has " + std::to_string(z_batch.cols()) + " columns, topology expects " +
                std::to_string(topo.input_dim));
    require(w.hidden_w.size() == topo.hidden_dims.size(), "forward: hidden layer count mismatch");

    ForwardResult out;
    out.tape.input = z_batch;
    Eigen::MatrixXd h = z_batch;
    for (std::size_t l = 0; l < w.hidden_w.size(); ++l) {
        const auto& wl = w.hidden_w[l];
        require(wl.cols() == h.cols(),
                "forward: hidden layer " + std::to_string(l) + " expects " + std::to_string(wl.cols()) +
                    " inputs, got " + std::to_string(h.cols()));
        Eigen::MatrixXd a = (h * wl.transpose()).rowwise() + w.hidden_b[l].transpose();
        h = activate(a, topo.activation);
        out.tape.hidden.push_back(h);
    }
    require(w.mean_w.cols() == h.cols(), "forward: mean head width mismatch");
    require(w.sigma_w.cols() == h.cols(), "forward: sigma head width mismatch");
    out.mu = (h * w.mean_w.transpose()).rowwise() + w.mean_b.transpose();
    out.sigma = ((h * w.sigma_w.transpose()).rowwise() + w.sigma_b.transpose()).array().exp();
    out.tape.mu = out.mu;
    out.tape.sigma = out.sigma;
    return out;
}

GradientBundle backward(const NetworkWeights& w, const NetworkTopology& topo,
                        const ForwardTape& tape, const Eigen::MatrixXd& d_mu,
                        const Eigen::MatrixXd& d_sigma) {
    require(d_mu.rows() == tape.input.rows() && d_mu.cols() == topo.output_dim,
            "backward: d_mu shape mismatch");
    require(d_sigma.rows() == tape.input.rows() && d_sigma.cols() == topo.output_dim,
            "backward: d_sigma shape mismatch");
    require(tape.hidden.size() == w.hidden_w.size(), "backward: tape does not match weights");

    GradientBundle g = NetworkWeights::zeros(topo);
    const Eigen::MatrixXd& h_last = tape.hidden.back();

    // sigma = exp(pre-activation), so d(pre) = d(sigma) * sigma.
    Eigen::MatrixXd d_pre_sigma = d_sigma.array() * tape.sigma.array();
    Eigen::MatrixXd d_pre_mu = d_mu;

    g.mean_w = d_pre_mu.transpose() * h_last;
    g.mean_b = d_pre_mu.colwise().sum().transpose();
    g.sigma_w = d_pre_sigma.transpose() * h_last;
    g.sigma_b = d_pre_sigma.colwise().sum().transpose();
    g.apply_static_mask(topo);

    // Masked head rows are structurally zero in w, so their upstream terms
    // vanish in the product below without special handling.
    Eigen::MatrixXd d_h = d_pre_mu * w.mean_w + d_pre_sigma * w.sigma_w;

    for (int l = static_cast<int>(w.hidden_w.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd& h_in =
            (l == 0) ? tape.input : tape.hidden[static_cast<std::size_t>(l - 1)];
        Eigen::MatrixXd d_a =
            d_h.array() * activate_grad(tape.hidden[static_cast<std::size_t>(l)], topo.activation);
        g.hidden_w[static_cast<std::size_t>(l)] = d_a.transpose() * h_in;
        g.hidden_b[static_cast<std::size_t>(l)] = d_a.colwise().sum().transpose();
        if (l > 0) d_h = d_a * w.hidden_w[static_cast<std::size_t>(l)];
    }
    return g;
}

double finite_difference_check(const std::function<double(const NetworkWeights&)>& loss_fn,
                               const NetworkWeights& weights, const NetworkTopology& topo,
                               const GradientBundle& analytic, double step) {
    require(step > 0.0, "finite_difference_check: step must be positive");

    NetworkWeights probe = weights;
    double worst = 0.0;

    auto check_block = [&](double* p, const double* a, Eigen::Index len) {
        for (Eigen::Index i = 0; i < len; ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            const double up = loss_fn(probe);
            p[i] = saved - step;
            const double down = loss_fn(probe);
            p[i] = saved;
            require(std::isfinite(up) && std::isfinite(down),
                    "finite_difference_check: non-finite loss during perturbation");
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-12});
            worst = std::max(worst, std::abs(numeric - a[i]) / denom);
        }
    };

    for (std::size_t l = 0; l < probe.hidden_w.size(); ++l) {
        check_block(probe.hidden_w[l].data(), analytic.hidden_w[l].data(), probe.hidden_w[l].size());
        check_block(probe.hidden_b[l].data(), analytic.hidden_b[l].data(), probe.hidden_b[l].size());
    }
    // Head matrices: skip masked rows, they are not free parameters.
    auto check_head = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& a) {
        for (Eigen::Index k = 0; k < m.rows(); ++k) {
            if (topo.static_mask[static_cast<std::size_t>(k)]) continue;
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double saved = m(k, j);
                m(k, j) = saved + step;
                const double up = loss_fn(probe);
                m(k, j) = saved - step;
                const double down = loss_fn(probe);
                m(k, j) = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double denom = std::max({std::abs(a(k, j)), std::abs(numeric), 1e-12});
                worst = std::max(worst, std::abs(numeric - a(k, j)) / denom);
            }
        }
    };
    check_head(probe.mean_w, analytic.mean_w);
    check_block(probe.mean_b.data(), analytic.mean_b.data(), probe.mean_b.size());
    check_head(probe.sigma_w, analytic.sigma_w);
    check_block(probe.sigma_b.data(), analytic.sigma_b.data(), probe.sigma_b.size());
    return worst;
}

}  // namespace penn::diffcore
