#include "penn/simlab.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <limits>

#include "penn/explain.hpp"

namespace penn::simlab {

double threshold_tau(double x2) {
    if (x2 > 0.5) return 5.0;
    if (x2 < -0.5) return -5.0;
    return 0.0;
}

namespace {

Eigen::MatrixXd equicorrelated_normal(int n, int dim, double rho, RngStream& rng) {
    require(rho > -1.0 / (dim - 1.0) && rho < 1.0,
            "generate_dgp: equicorrelation matrix is not positive definite");
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(dim, dim, rho);
    cov.diagonal().setOnes();
    const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    Eigen::MatrixXd raw(n, dim);
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
        for (Eigen::Index j = 0; j < raw.cols(); ++j) raw(i, j) = rng.normal();
    return raw * chol.transpose();
}

}  // namespace

DgpSample generate_dgp(int n, double rho, double sigma_eps, std::uint64_t seed) {
    require(n >= 1, "generate_dgp: n must be >= 1");
    require(sigma_eps > 0.0, "generate_dgp: sigma_eps must be positive");

    RngStream root(seed);
    RngStream x_rng = root.derive("x");
    RngStream eps_rng = root.derive("eps");

    DgpSample out;
    out.rho = rho;
    out.sigma_eps = sigma_eps;
    out.seed = seed;
    out.x = equicorrelated_normal(n, 3, rho, x_rng);

    out.beta_true.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        out.beta_true(i, 0) = 5.0 * std::sin(out.x(i, 0));
        out.beta_true(i, 1) = 0.0;
        out.beta_true(i, 2) = threshold_tau(out.x(i, 1));
    }
    out.y = (out.x.array() * out.beta_true.array()).rowwise().sum();
    for (int i = 0; i < n; ++i) out.y(i) += sigma_eps * eps_rng.normal();
    out.phi_true = explain::contributions(out.beta_true, out.x).phi;
    return out;
}

DgpSample generate_sine_dgp(int n, double sigma_eps, std::uint64_t seed) {
    require(n >= 1, "generate_sine_dgp: n must be >= 1");
    require(sigma_eps > 0.0, "generate_sine_dgp: sigma_eps must be positive");

    RngStream root(seed);
    RngStream x_rng = root.derive("x");
    RngStream eps_rng = root.derive("eps");

    DgpSample out;
    out.sigma_eps = sigma_eps;
    out.seed = seed;
    out.x.resize(n, 1);
    out.beta_true.resize(n, 1);
    out.y.resize(n);
    for (int i = 0; i < n; ++i) {
        out.x(i, 0) = x_rng.normal();
        out.beta_true(i, 0) = 5.0 * std::sin(out.x(i, 0));
        out.y(i) = out.beta_true(i, 0) * out.x(i, 0) + sigma_eps * eps_rng.normal();
    }
    out.phi_true = explain::contributions(out.beta_true, out.x).phi;
    return out;
}

Eigen::MatrixXd interaction_feature_augment(const Eigen::MatrixXd& x) {
    require(x.cols() == 3, "interaction_feature_augment: expects exactly 3 columns");
    Eigen::MatrixXd out(x.rows(), 4);
    out.leftCols(3) = x;
    out.col(3) = x.col(1).array() * x.col(2).array();
    return out;
}

namespace {

Dataset to_dataset(const DgpSample& s) {
    Dataset d;
    d.x = s.x;
    d.y = s.y;
    return d;
}

// Local surrogate coefficients per observation, optionally with the x2*x3
// product given to the surrogate; its coefficient folds into the effective
// x3 slope since the product enters the process through x3.
Eigen::MatrixXd lime_beta_matrix(const trainer::TrainedModel& model, const Eigen::MatrixXd& x,
                                 const explain::LimeConfig& cfg, bool with_interaction,
                                 RngStream& rng) {
    const Eigen::Index k = x.cols();
    Eigen::MatrixXd beta(x.rows(), k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        RngStream row_rng = rng.derive(static_cast<std::uint64_t>(i));
        if (!with_interaction) {
            explain::PredictFn f = [&](const Eigen::MatrixXd& rows) {
                return model.predict_mean(rows, rows);
            };
            beta.row(i) = explain::lime_local(f, x.row(i).transpose(), cfg, row_rng).first.transpose();
        } else {
            explain::PredictFn f = [&](const Eigen::MatrixXd& rows) {
                const Eigen::MatrixXd base = rows.leftCols(3);
                return model.predict_mean(base, base);
            };
            Eigen::VectorXd xi(4);
            xi.head(3) = x.row(i).transpose();
            xi(3) = x(i, 1) * x(i, 2);
            const Eigen::VectorXd coefs = explain::lime_local(f, xi, cfg, row_rng).first;
            beta(i, 0) = coefs(0);
            beta(i, 1) = coefs(1);
            beta(i, 2) = coefs(2) + coefs(3) * x(i, 1);
        }
    }
    return beta;
}

Eigen::MatrixXd shapley_phi_matrix(const trainer::TrainedModel& model, const Eigen::MatrixXd& x,
                                   int n_draws, RngStream& rng) {
    explain::PredictFn f = [&](const Eigen::MatrixXd& rows) {
        return model.predict_mean(rows, rows);
    };
    Eigen::MatrixXd phi(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        RngStream row_rng = rng.derive(static_cast<std::uint64_t>(i));
        phi.row(i) = explain::sampled_shapley(f, x, i, n_draws, row_rng).transpose();
    }
    return phi;
}

struct CellTask {
    int n;
    double rho;
    double sigma;
    std::uint64_t seed;
};

std::vector<ScenarioRow> run_one(const CellTask& t, const ScenarioGrid& grid,
                                 const ScenarioMethodConfig& cfg) {
    std::vector<ScenarioRow> rows;
    auto emit = [&](const std::string& method, const std::string& metric, double value) {
        rows.push_back({t.n, t.rho, t.sigma, t.seed, method, metric, value});
    };

    try {
        RngStream run_rng(t.seed);
        const DgpSample train = generate_dgp(t.n, t.rho, t.sigma, run_rng.derive("train").seed());
        const DgpSample val =
            generate_dgp(cfg.validation_n, t.rho, t.sigma, run_rng.derive("val").seed());
        const DgpSample test =
            generate_dgp(cfg.test_n, t.rho, t.sigma, run_rng.derive("test").seed());

        trainer::PennConfig penn_cfg = cfg.penn;
        penn_cfg.optimizer.rng_seed = run_rng.derive("fit").seed();

        const bool tune = !cfg.tune_lambdas.empty() && !cfg.tune_deltas.empty();
        trainer::TrainedModel model;
        if (tune) {
            double best_mse = std::numeric_limits<double>::infinity();
            for (double lam : cfg.tune_lambdas) {
                for (double del : cfg.tune_deltas) {
                    trainer::PennConfig c = penn_cfg;
                    c.lambda = lam;
                    c.kernel = prior::KernelSpec::disjoint(del);
                    auto candidate = trainer::train(to_dataset(train), c);
                    const Eigen::VectorXd pred = candidate.predict_mean(val.x, val.x);
                    const double mse = (val.y - pred).squaredNorm() / val.y.size();
                    if (mse < best_mse) {
                        best_mse = mse;
                        model = std::move(candidate);
                    }
                }
            }
        } else {
            model = trainer::train(to_dataset(train), penn_cfg);
        }

        const Eigen::VectorXd test_pred = model.predict_mean(test.x, test.x);
        const double rmse = std::sqrt((test.y - test_pred).squaredNorm() / test.y.size());

        for (const std::string& method : grid.methods) {
            if (method == "penn") {
                const auto post = model.infer(train.x);
                const auto contrib = explain::contributions(post.mu_q, train.x);
                emit("penn", "mae_phi", explain::mae_phi(contrib.phi, train.phi_true));
                emit("penn", "rmse", rmse);
            } else if (method == "lime" || method == "lime_interaction") {
                RngStream lime_rng = run_rng.derive(method);
                const Eigen::MatrixXd beta = lime_beta_matrix(model, train.x, cfg.lime,
                                                              method == "lime_interaction", lime_rng);
                const auto contrib = explain::contributions(beta, train.x);
                emit(method, "mae_phi", explain::mae_phi(contrib.phi, train.phi_true));
            } else if (method == "shapley") {
                RngStream shap_rng = run_rng.derive("shapley");
                const Eigen::MatrixXd phi =
                    shapley_phi_matrix(model, train.x, cfg.shapley_draws, shap_rng);
                emit("shapley", "mae_phi", explain::mae_phi(phi, train.phi_true));
            } else {
                throw Error("scenario grid: unknown method '" + method + "'");
            }
        }
    } catch (const std::exception& e) {
        rows.push_back({t.n, t.rho, t.sigma, t.seed, "all", "error",
                        std::numeric_limits<double>::quiet_NaN()});
        (void)e;
    }
    return rows;
}

}  // namespace

std::vector<ScenarioRow> run_scenario_grid(const ScenarioGrid& grid,
                                           const ScenarioMethodConfig& cfg,
                                           std::uint64_t base_seed, int jobs) {
    grid.validate();
    require(jobs >= 1, "scenario grid: jobs must be >= 1");

    std::vector<CellTask> tasks;
    RngStream root(base_seed);
    std::uint64_t cell_index = 0;
    for (int n : grid.n_values)
        for (double rho : grid.rho_values)
            for (double sigma : grid.sigma_values) {
                RngStream cell_rng = root.derive(cell_index++);
                for (int s = 0; s < grid.seeds_per_cell; ++s)
                    tasks.push_back(
                        {n, rho, sigma, cell_rng.derive(static_cast<std::uint64_t>(s)).seed()});
            }

    std::vector<std::vector<ScenarioRow>> partial(tasks.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) partial[i] = run_one(tasks[i], grid, cfg);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                partial[i] = run_one(tasks[i], grid, cfg);
            }
        };
        std::vector<std::future<void>> pool;
        for (int j = 0; j < jobs; ++j) pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    std::vector<ScenarioRow> rows;
    for (auto& p : partial) rows.insert(rows.end(), p.begin(), p.end());
    return rows;
}

}  // namespace penn::simlab
