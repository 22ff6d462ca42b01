#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "penn/error.hpp"
#include "penn/explain.hpp"
#include "penn/trainer.hpp"

namespace penn::simlab {

// One draw of the three-covariate benchmark process
//   y = b1(x1)*x1 + 0*x2 + b3(x2)*x3 + eps,
// with b1(x1) = 5 sin(x1) and b3 the threshold function below, and x drawn
// from an equicorrelated Gaussian with off-diagonal rho.
struct DgpSample {
    Eigen::MatrixXd x;          // N x 3
    Eigen::VectorXd y;          // N
    Eigen::MatrixXd beta_true;  // N x 3 (column for x2 identically zero)
    Eigen::MatrixXd phi_true;   // N x 3, empirically centered
    double rho = 0.0;
    double sigma_eps = 1.0;
    std::uint64_t seed = 0;
};

// 5 above 0.5, 0 inside [-0.5, 0.5], -5 below -0.5.
double threshold_tau(double x2);

DgpSample generate_dgp(int n, double rho, double sigma_eps, std::uint64_t seed);

// Single-covariate variant y = 5 sin(x1) * x1 + eps, used to study the
// regularization profile in isolation.
DgpSample generate_sine_dgp(int n, double sigma_eps, std::uint64_t seed);

// Appends the x2*x3 product column for benchmark modes that receive the
// interaction as prior knowledge.
Eigen::MatrixXd interaction_feature_augment(const Eigen::MatrixXd& x);

struct ScenarioGrid {
    std::vector<int> n_values{1000};
    std::vector<double> rho_values{0.0};
    std::vector<double> sigma_values{1.0};
    int seeds_per_cell = 10;
    std::vector<std::string> methods{"penn", "lime", "shapley"};

    void validate() const {
        require(!n_values.empty(), "scenario grid: n_values is empty");
        require(!rho_values.empty(), "scenario grid: rho_values is empty");
        require(!sigma_values.empty(), "scenario grid: sigma_values is empty");
        require(!methods.empty(), "scenario grid: methods is empty");
        require(seeds_per_cell >= 1, "scenario grid: seeds_per_cell must be >= 1");
    }
};

struct ScenarioMethodConfig {
    trainer::PennConfig penn;       // training settings for the fitted model
    int shapley_draws = 60;
    explain::LimeConfig lime;
    int validation_n = 1000;
    int test_n = 1000;
    // When both grids are nonempty, (lambda, delta) are tuned per run by
    // validation MSE on the holdout sample instead of taken from `penn`.
    std::vector<double> tune_lambdas;
    std::vector<double> tune_deltas;
};

struct ScenarioRow {
    int n = 0;
    double rho = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::string method;
    std::string metric;  // "mae_phi" or "rmse"
    double value = 0.0;
};

// Runs every cell x seed: generate train/validation/test samples, fit the
// model, compute explanation accuracy per requested method plus the
// out-of-sample RMSE of the fitted model. Failures are recorded as rows with
// metric "error" (value NaN) and do not abort the grid.
std::vector<ScenarioRow> run_scenario_grid(const ScenarioGrid& grid,
                                           const ScenarioMethodConfig& cfg,
                                           std::uint64_t base_seed, int jobs = 1);

}  // namespace penn::simlab
