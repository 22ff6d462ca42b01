#include "penn/capm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "penn/explain.hpp"

namespace penn::capm {

int ReturnsPanel::sector_index(const std::string& name) const {
    for (std::size_t i = 0; i < sector_names.size(); ++i)
        if (sector_names[i] == name) return static_cast<int>(i);
    throw Error("returns panel: unknown sector '" + name + "'");
}

namespace {

void check_dates_increasing(const std::vector<std::string>& dates, const std::string& what) {
    for (std::size_t i = 1; i < dates.size(); ++i)
        require(dates[i - 1] < dates[i], what + ": dates not strictly increasing at row " +
                                             std::to_string(i) + " (" + dates[i] + ")");
}

}  // namespace

CapmFeatures build_features(const ReturnsPanel& returns, const MacroPanel& macro,
                            const std::string& sector, int yoy_window) {
    require(yoy_window >= 1, "build_features: yoy_window must be >= 1");
    check_dates_increasing(returns.dates, "returns panel");
    check_dates_increasing(macro.dates, "macro panel");
    const int sec = returns.sector_index(sector);

    // Inner join on dates, keeping only rows where every field is finite.
    std::unordered_map<std::string, Eigen::Index> macro_row;
    for (Eigen::Index i = 0; i < macro.size(); ++i) macro_row[macro.dates[i]] = i;

    std::vector<std::string> dates;
    std::vector<double> rf, rm, rk;
    std::vector<Eigen::RowVectorXd> mrows;
    Eigen::Index dropped = 0;
    for (Eigen::Index i = 0; i < returns.size(); ++i) {
        auto it = macro_row.find(returns.dates[i]);
        if (it == macro_row.end()) {
            ++dropped;
            continue;
        }
        const Eigen::Index j = it->second;
        const bool finite = std::isfinite(returns.risk_free(i)) && std::isfinite(returns.market(i)) &&
                            std::isfinite(returns.sectors(i, sec)) && macro.values.row(j).allFinite();
        if (!finite) {
            ++dropped;
            continue;
        }
        dates.push_back(returns.dates[i]);
        rf.push_back(returns.risk_free(i));
        rm.push_back(returns.market(i));
        rk.push_back(returns.sectors(i, sec));
        mrows.push_back(macro.values.row(j));
    }
    const Eigen::Index t_total = static_cast<Eigen::Index>(dates.size());
    require(t_total > yoy_window + 2, "build_features: insufficient overlapping history for the "
                                      "year-on-year window");
    if (dropped > 0)
        std::fprintf(stderr, "build_features: dropped %lld rows (missing values or unmatched dates)\n",
                     static_cast<long long>(dropped));

    const Eigen::Index j_dim = macro.values.cols();
    Eigen::MatrixXd m(t_total, j_dim);
    for (Eigen::Index i = 0; i < t_total; ++i) m.row(i) = mrows[static_cast<std::size_t>(i)];

    // Year-on-year differences over `yoy_window` observations.
    const Eigen::Index t_diff = t_total - yoy_window;
    Eigen::MatrixXd diff = m.bottomRows(t_diff) - m.topRows(t_diff);
    const Standardization stats = Standardization::fit(diff);
    for (Eigen::Index c = 0; c < j_dim; ++c)
        if (stats.zero_variance[static_cast<std::size_t>(c)])
            std::fprintf(stderr,
                         "build_features: macro series '%s' has zero variance after differencing; "
                         "column standardizes to zeros\n",
                         macro.series_names[static_cast<std::size_t>(c)].c_str());
    diff = stats.apply(diff);

    // Target row for date t uses the macro difference dated t-1. diff row r
    // corresponds to panel date r + yoy_window.
    CapmFeatures out;
    const Eigen::Index t_eff = t_total - yoy_window - 1;
    out.z_lagged.resize(t_eff, j_dim);
    out.x_decoder.resize(t_eff, 2);
    out.y.resize(t_eff);
    for (Eigen::Index r = 0; r < t_eff; ++r) {
        const Eigen::Index t = r + yoy_window + 1;  // panel index of the target date
        out.dates.push_back(dates[static_cast<std::size_t>(t)]);
        out.z_lagged.row(r) = diff.row(t - 1 - yoy_window);
        out.x_decoder(r, 0) = 1.0;
        out.x_decoder(r, 1) = rm[static_cast<std::size_t>(t)] - rf[static_cast<std::size_t>(t)];
        out.y(r) = rk[static_cast<std::size_t>(t)] - rf[static_cast<std::size_t>(t)];
    }
    return out;
}

CapmFit fit_conditional_capm(const CapmFeatures& features, const trainer::PennConfig& cfg) {
    require(features.x_decoder.cols() == 2, "fit_conditional_capm: decoder must be [1, market]");
    const Dataset data = features.to_dataset();
    CapmFit fit;
    fit.model = trainer::train(data, cfg);
    fit.dates = features.dates;

    const auto post = fit.model.infer(features.z_lagged);
    fit.alpha_mean = post.mu_q.col(0);
    fit.beta_mean = post.mu_q.col(1);
    fit.alpha_sd = post.sigma_q.col(0);
    fit.beta_sd = post.sigma_q.col(1);
    const auto [lower, upper] = encoder::predict_posterior_bands(post, 2.0);
    fit.alpha_lower = lower.col(0);
    fit.beta_lower = lower.col(1);
    fit.alpha_upper = upper.col(0);
    fit.beta_upper = upper.col(1);
    return fit;
}

RealtimeForecast realtime_forecast(const CapmFeatures& features, const trainer::PennConfig& cfg,
                                   int start_index, int retrain_every) {
    const Eigen::Index t_eff = features.y.size();
    require(retrain_every >= 1, "realtime_forecast: retrain_every must be >= 1");
    require(start_index >= 10, "realtime_forecast: start_index leaves too little history");
    require(start_index < t_eff - 1, "realtime_forecast: start_index leaves no forecast periods");

    const Dataset full = features.to_dataset();
    RealtimeForecast out;
    const Eigen::Index n_forecasts = t_eff - 1 - start_index;
    out.alpha.resize(n_forecasts);
    out.beta.resize(n_forecasts);
    trainer::TrainedModel model;
    bool have_model = false;

    for (Eigen::Index t = start_index; t + 1 < t_eff; ++t) {
        if (!have_model || (t - start_index) % retrain_every == 0) {
            std::vector<int> idx(static_cast<std::size_t>(t + 1));
            for (Eigen::Index i = 0; i <= t; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
            model = trainer::train(full.rows(idx), cfg);
            have_model = true;
        }
        // Encoder input of feature row t+1 is dated t; nothing later than t
        // is touched.
        const auto post = model.infer(features.z_lagged.row(t + 1));
        const Eigen::Index r = t - start_index;
        out.dates.push_back(features.dates[static_cast<std::size_t>(t + 1)]);
        out.alpha(r) = post.mu_q(0, 0);
        out.beta(r) = post.mu_q(0, 1);
    }
    return out;
}

Eigen::MatrixXd rolling_capm_baseline(const CapmFeatures& features, int window) {
    require(window >= 3, "rolling_capm_baseline: window must be >= 3");
    return explain::rolling_ols(features.x_decoder, features.y, window);
}

SyntheticCapm make_synthetic_fixture(const SyntheticCapmConfig& cfg) {
    require(cfg.periods > cfg.yoy_window + 30, "synthetic fixture: too few periods");
    RngStream root(cfg.seed);
    RngStream macro_rng = root.derive("macro");
    RngStream ret_rng = root.derive("returns");

    const int t_total = cfg.periods;
    const int j_dim = 6;

    SyntheticCapm out;
    out.macro.series_names = {"short_rate", "term_premium", "default_premium",
                              "dividend_yield", "real_yield", "breakeven_inflation"};
    out.macro.values.resize(t_total, j_dim);
    Eigen::RowVectorXd level = Eigen::RowVectorXd::Zero(j_dim);
    // Series 0 drives the regime: its innovations carry a persistent sign so
    // the year-on-year difference is clearly positive or negative except
    // around regime switches. The remaining series are plain random walks.
    double regime_sign = 1.0;
    for (int t = 0; t < t_total; ++t) {
        if (macro_rng.uniform() < cfg.switch_prob) regime_sign = -regime_sign;
        level(0) += 0.15 * regime_sign + 0.15 * macro_rng.normal();
        for (int j = 1; j < j_dim; ++j) level(j) += 0.3 * macro_rng.normal();
        out.macro.values.row(t) = level;
    }

    // Monthly ISO dates starting 2000-01.
    auto date_of = [](int t) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-01", 2000 + t / 12, t % 12 + 1);
        return std::string(buf);
    };
    for (int t = 0; t < t_total; ++t) {
        out.macro.dates.push_back(date_of(t));
        out.returns.dates.push_back(date_of(t));
    }

    // The regime driver is the raw year-on-year difference of series 0 dated
    // t-1, exactly the quantity (up to an affine map) that the encoder sees.
    auto regime_beta = [&](int t) {
        const double d = out.macro.values(t - 1, 0) - out.macro.values(t - 1 - cfg.yoy_window, 0);
        return d > 0.0 ? cfg.beta_low : cfg.beta_high;
    };

    out.returns.sector_names = {"SYN"};
    out.returns.risk_free.resize(t_total);
    out.returns.market.resize(t_total);
    out.returns.sectors.resize(t_total, 1);
    for (int t = 0; t < t_total; ++t) {
        out.returns.risk_free(t) = 0.1;
        const double excess_market = 0.5 + 2.0 * ret_rng.normal();
        out.returns.market(t) = out.returns.risk_free(t) + excess_market;
        double beta = cfg.beta_high;
        if (t > cfg.yoy_window) beta = regime_beta(t);
        const double excess_sector =
            cfg.alpha + beta * excess_market + cfg.noise_sd * ret_rng.normal();
        out.returns.sectors(t, 0) = out.returns.risk_free(t) + excess_sector;
        if (t > cfg.yoy_window) {
            out.truth_dates.push_back(date_of(t));
            out.true_beta.conservativeResize(out.true_beta.size() + 1);
            out.true_beta(out.true_beta.size() - 1) = beta;
        }
    }
    out.true_alpha = cfg.alpha;
    return out;
}

}  // namespace penn::capm
