#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "penn/error.hpp"
#include "penn/trainer.hpp"

namespace penn::capm {

// Aligned return series in percent per period. Dates are ISO-8601 strings,
// strictly increasing.
struct ReturnsPanel {
    std::vector<std::string> dates;
    Eigen::VectorXd risk_free;
    Eigen::VectorXd market;
    std::vector<std::string> sector_names;
    Eigen::MatrixXd sectors;  // T x n_sectors

    Eigen::Index size() const { return risk_free.size(); }
    int sector_index(const std::string& name) const;
};

struct MacroPanel {
    std::vector<std::string> dates;
    std::vector<std::string> series_names;
    Eigen::MatrixXd values;  // T x J

    Eigen::Index size() const { return values.rows(); }
};

// Model-ready arrays for one sector. Row t explains the excess sector
// return at date `dates[t]` through the decoder input [1, excess market
// return at t], with the encoder consuming macro state differences dated
// t-1 (one-period lag).
struct CapmFeatures {
    std::vector<std::string> dates;
    Eigen::MatrixXd z_lagged;   // T_eff x J, year-on-year differences, standardized
    Eigen::MatrixXd x_decoder;  // T_eff x 2: [1, excess market]
    Eigen::VectorXd y;          // T_eff excess sector returns

    Dataset to_dataset() const {
        Dataset d;
        d.x = x_decoder;
        d.y = y;
        d.z = z_lagged;
        d.intercept = true;
        d.feature_names = {"alpha", "beta"};
        return d;
    }
};

struct CapmFit {
    std::vector<std::string> dates;
    Eigen::VectorXd alpha_mean, alpha_sd;
    Eigen::VectorXd beta_mean, beta_sd;
    Eigen::VectorXd alpha_lower, alpha_upper;  // two posterior standard deviations
    Eigen::VectorXd beta_lower, beta_upper;
    trainer::TrainedModel model;
};

// Joins the panels on shared dates (rows with non-finite fields are dropped
// beforehand), forms excess returns, year-on-year differences the macro
// series over `yoy_window` observations, standardizes them and applies the
// one-period encoder lag.
CapmFeatures build_features(const ReturnsPanel& returns, const MacroPanel& macro,
                            const std::string& sector, int yoy_window);

CapmFit fit_conditional_capm(const CapmFeatures& features, const trainer::PennConfig& cfg);

struct RealtimeForecast {
    std::vector<std::string> dates;  // forecast target dates
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
};

// Expanding-window out-of-sample parameter forecasts: retrain on rows
// [0, t] every `retrain_every` steps, predict (alpha, beta) for t+1 from the
// encoder input dated t. No row later than t enters any training set.
RealtimeForecast realtime_forecast(const CapmFeatures& features, const trainer::PennConfig& cfg,
                                   int start_index, int retrain_every);

// Rolling least squares of excess sector returns on [1, excess market].
// Row r covers the window ending at features row r + window - 1.
Eigen::MatrixXd rolling_capm_baseline(const CapmFeatures& features, int window);

// Synthetic two-regime fixture mimicking the documented CSV layout: the
// market and one sector, six macro series, and a regime-dependent beta that
// switches between beta_low and beta_high on the sign of the first macro
// series' lagged year-on-year difference. true_beta[t] matches the feature
// row that build_features(yoy_window) produces for the same date.
struct SyntheticCapm {
    ReturnsPanel returns;
    MacroPanel macro;
    std::vector<std::string> truth_dates;
    Eigen::VectorXd true_beta;
    double true_alpha = 0.0;
};

struct SyntheticCapmConfig {
    int periods = 480;
    int yoy_window = 12;
    double beta_low = 0.5;
    double beta_high = 1.5;
    double alpha = 0.0;
    double noise_sd = 0.5;
    double switch_prob = 1.0 / 80.0;  // per-period regime switch probability
    std::uint64_t seed = 7;
};

SyntheticCapm make_synthetic_fixture(const SyntheticCapmConfig& cfg);

}  // namespace penn::capm
