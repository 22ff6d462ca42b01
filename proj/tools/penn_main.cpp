// penn: command line workbench around the penn_core library.
//
// Commands: simulate, train, explain, cv, capm, gradcheck. Every run writes
// its artifacts plus one manifest.json into --out; a manifest is sufficient
// to reproduce the run byte for byte via --from-manifest.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "penn/capm.hpp"
#include "penn/explain.hpp"
#include "penn/io.hpp"
#include "penn/modelsel.hpp"
#include "penn/simlab.hpp"
#include "penn/trainer.hpp"

namespace fs = std::filesystem;
using penn::Error;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

using ConfigMap = std::map<std::string, std::string>;

std::string join(const std::vector<std::string>& items, const std::string& sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(penn::io::parse_cell(item));
    if (out.empty()) throw Error(what + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (double v : parse_double_list(s, what)) out.push_back(static_cast<int>(std::llround(v)));
    return out;
}

// Resolved settings with helpers; everything that reaches execution lives in
// a flat string map so manifests can reproduce it exactly.
struct Settings {
    ConfigMap values;

    bool has(const std::string& k) const { return values.count(k) > 0; }
    std::string str(const std::string& k) const {
        auto it = values.find(k);
        if (it == values.end()) throw Error("missing required setting '" + k + "'");
        return it->second;
    }
    std::string str_or(const std::string& k, const std::string& d) const {
        auto it = values.find(k);
        return it == values.end() ? d : it->second;
    }
    double num(const std::string& k, double d) const {
        auto it = values.find(k);
        return it == values.end() ? d : penn::io::parse_cell(it->second);
    }
    int integer(const std::string& k, int d) const {
        return static_cast<int>(std::llround(num(k, d)));
    }
    bool flag(const std::string& k, bool d) const {
        auto it = values.find(k);
        if (it == values.end()) return d;
        return it->second == "true" || it->second == "1" || it->second == "yes";
    }
    std::uint64_t seed() const {
        return static_cast<std::uint64_t>(std::strtoull(str_or("seed", "0").c_str(), nullptr, 10));
    }
};

void merge_config_file(Settings& s, const std::string& path) {
    const auto cfg = penn::io::KeyValueConfig::parse_file(path);
    for (const auto& [k, v] : cfg.values())
        if (!s.values.count(k)) s.values[k] = v;  // explicit flags win
}

penn::trainer::PennConfig penn_config_from(const Settings& s) {
    penn::trainer::PennConfig cfg;
    cfg.lambda = s.num("lambda", 0.1);
    const std::string kernel = s.str_or("kernel", "disjoint");
    if (kernel == "disjoint")
        cfg.kernel = penn::prior::KernelSpec::disjoint(s.num("delta", 0.2));
    else if (kernel == "epanechnikov")
        cfg.kernel = penn::prior::KernelSpec::epanechnikov(s.num("bandwidth", 1.0));
    else if (kernel == "tricube")
        cfg.kernel = penn::prior::KernelSpec::tricube(s.num("bandwidth", 1.0));
    else
        throw Error("unknown kernel '" + kernel + "' (disjoint|epanechnikov|tricube)");
    if (s.has("hidden")) cfg.hidden_dims = parse_int_list(s.str("hidden"), "hidden");
    cfg.monte_carlo_draws = s.integer("draws", 100);
    cfg.activation = s.str_or("activation", "sigmoid") == "tanh"
                         ? penn::diffcore::Activation::Tanh
                         : penn::diffcore::Activation::Sigmoid;
    if (s.has("static_mask")) {
        cfg.static_mask.clear();
        for (int v : parse_int_list(s.str("static_mask"), "static_mask"))
            cfg.static_mask.push_back(v != 0);
    }
    cfg.freeze_prior_in_gradient = s.flag("freeze_prior", false);
    cfg.optimizer.learning_rate = s.num("learning_rate", 0.05);
    cfg.optimizer.beta1 = s.num("beta1", 0.9);
    cfg.optimizer.beta2 = s.num("beta2", 0.999);
    cfg.optimizer.epsilon = s.num("epsilon", 1e-8);
    cfg.optimizer.clip_norm = s.num("clip_norm", 1.0);
    cfg.optimizer.clip_value = s.num("clip_value", 0.5);
    cfg.optimizer.epochs = s.integer("epochs", 500);
    cfg.optimizer.rng_seed = s.seed();
    return cfg;
}

penn::Dataset load_dataset(const Settings& s) {
    const auto table = penn::io::read_csv(s.str("data"));
    const auto x_cols = split_list(s.str("x_cols"));
    const std::string y_col = s.str("y_col");
    const auto z_cols = s.has("z_cols") ? split_list(s.str("z_cols")) : std::vector<std::string>{};
    const bool intercept = s.flag("intercept", false);
    if (x_cols.empty()) throw Error("x_cols: empty list");

    penn::Dataset d;
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    if (n == 0) throw Error("dataset: no rows in " + s.str("data"));
    const int extra = intercept ? 1 : 0;
    d.x.resize(n, static_cast<Eigen::Index>(x_cols.size()) + extra);
    d.y.resize(n);
    if (intercept) {
        d.x.col(0).setOnes();
        d.feature_names.push_back("const");
    }
    d.intercept = intercept;
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
        const int col = table.column(x_cols[c]);
        for (Eigen::Index i = 0; i < n; ++i)
            d.x(i, static_cast<Eigen::Index>(c) + extra) = penn::io::parse_cell(
                table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)]);
        d.feature_names.push_back(x_cols[c]);
    }
    const int ycol = table.column(y_col);
    for (Eigen::Index i = 0; i < n; ++i)
        d.y(i) = penn::io::parse_cell(
            table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(ycol)]);
    if (!z_cols.empty()) {
        Eigen::MatrixXd z(n, static_cast<Eigen::Index>(z_cols.size()));
        for (std::size_t c = 0; c < z_cols.size(); ++c) {
            const int col = table.column(z_cols[c]);
            for (Eigen::Index i = 0; i < n; ++i)
                z(i, static_cast<Eigen::Index>(c)) = penn::io::parse_cell(
                    table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)]);
        }
        d.z = std::move(z);
    }
    d.validate();
    return d;
}

struct RunContext {
    fs::path out_dir;
    penn::io::RunManifest manifest;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void note_input(const std::string& path) {
        manifest.input_hashes[path] = penn::io::fnv1a_file_hex(path);
    }
    fs::path artifact(const std::string& name) {
        manifest.artifacts.push_back(name);
        return out_dir / name;
    }
    void finish() {
        manifest.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        manifest.write(out_dir / "manifest.json");
    }
};

RunContext make_context(const std::string& command, const Settings& s, const std::string& out) {
    RunContext ctx;
    ctx.out_dir = out;
    fs::create_directories(ctx.out_dir);
    ctx.manifest.command = command;
    ctx.manifest.config = s.values;
    ctx.manifest.seed = s.seed();
    return ctx;
}

std::string fmt(double v) { return penn::io::format_double(v); }

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void run_train(const Settings& s, const std::string& out, bool verbose) {
    auto ctx = make_context("train", s, out);
    ctx.note_input(s.str("data"));

    const auto data = load_dataset(s);
    auto cfg = penn_config_from(s);
    penn::trainer::ProgressHook hook;
    if (verbose) {
        hook = [](int epoch, const penn::loss::LossBreakdown& lb) {
            if (epoch % 50 == 0)
                std::fprintf(stderr, "epoch %d: total=%g mc=%g kl=%g\n", epoch, lb.total, lb.mc_mse,
                             lb.kl_total);
        };
    }
    const auto model = penn::trainer::train(data, cfg, hook);

    const auto x_cols = split_list(s.str("x_cols"));
    const auto z_cols = s.has("z_cols") ? split_list(s.str("z_cols")) : std::vector<std::string>{};
    penn::io::save_model(model, ctx.artifact("model.json"), x_cols, s.str("y_col"), z_cols,
                         s.flag("intercept", false));

    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < model.loss_trace.size(); ++e) {
        const auto& lb = model.loss_trace[e];
        rows.push_back({std::to_string(e), fmt(lb.mc_mse), fmt(lb.kl_total), fmt(lb.total)});
    }
    penn::io::write_csv(ctx.artifact("loss_trace.csv"), {"epoch", "mc_mse", "kl_total", "total"},
                        rows);
    ctx.finish();
    std::printf("trained %d epochs, final loss %s\n", cfg.optimizer.epochs,
                fmt(model.loss_trace.back().total).c_str());
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

void run_explain(const Settings& s, const std::string& out) {
    auto ctx = make_context("explain", s, out);
    ctx.note_input(s.str("model"));
    ctx.note_input(s.str("data"));

    const auto loaded = penn::io::load_model(s.str("model"));
    Settings data_settings = s;
    data_settings.values["x_cols"] = join(loaded.x_cols);
    data_settings.values["y_col"] = loaded.y_col;
    if (!loaded.z_cols.empty()) data_settings.values["z_cols"] = join(loaded.z_cols);
    if (loaded.intercept) data_settings.values["intercept"] = "true";
    const auto data = load_dataset(data_settings);

    const auto methods = split_list(s.str_or("methods", "penn"));
    if (methods.empty()) throw Error("methods: empty list");

    const auto& model = loaded.model;
    const Eigen::MatrixXd& enc = data.encoder_input();
    penn::explain::PredictFn f = [&](const Eigen::MatrixXd& rows) {
        // Post-hoc explainers perturb decoder inputs; with shared inputs the
        // encoder sees the same perturbed rows.
        return model.predict_mean(rows, rows);
    };

    std::vector<std::string> header{"row"};
    for (Eigen::Index c = 0; c < data.k(); ++c)
        header.push_back("phi_" + (data.feature_names.empty()
                                       ? "x" + std::to_string(c)
                                       : data.feature_names[static_cast<std::size_t>(c)]));

    penn::RngStream root(s.seed());
    for (const auto& method : methods) {
        Eigen::MatrixXd phi;
        if (method == "penn") {
            const auto post = model.infer(enc);
            phi = penn::explain::contributions(post.mu_q, data.x).phi;
        } else if (method == "lime") {
            if (data.z)
                throw Error(
                    "lime explains shared-input models only (model has distinct encoder inputs)");
            penn::explain::LimeConfig lime;
            lime.sigma_z = s.num("lime_sigma_z", 0.1);
            lime.n_samples = s.integer("lime_samples", 500);
            lime.kernel_width = s.num("lime_width", 0.0);
            Eigen::MatrixXd beta(data.n(), data.k());
            penn::RngStream lime_rng = root.derive("lime");
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                penn::RngStream row_rng = lime_rng.derive(static_cast<std::uint64_t>(i));
                beta.row(i) = penn::explain::lime_local(f, data.x.row(i).transpose(), lime, row_rng)
                                  .first.transpose();
            }
            phi = penn::explain::contributions(beta, data.x).phi;
        } else if (method == "shapley") {
            if (data.z)
                throw Error(
                    "shapley explains shared-input models only (model has distinct encoder "
                    "inputs)");
            const int draws = s.integer("shapley_draws", 200);
            penn::RngStream shap_rng = root.derive("shapley");
            phi.resize(data.n(), data.k());
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                penn::RngStream row_rng = shap_rng.derive(static_cast<std::uint64_t>(i));
                phi.row(i) =
                    penn::explain::sampled_shapley(f, data.x, i, draws, row_rng).transpose();
            }
        } else {
            throw Error("unknown method '" + method + "' (penn|lime|shapley)");
        }

        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index i = 0; i < phi.rows(); ++i) {
            std::vector<std::string> row{std::to_string(i)};
            for (Eigen::Index c = 0; c < phi.cols(); ++c) row.push_back(fmt(phi(i, c)));
            rows.push_back(std::move(row));
        }
        penn::io::write_csv(ctx.artifact("contributions_" + method + ".csv"), header, rows);
    }
    ctx.finish();
    std::printf("explained %lld rows with %zu method(s)\n", static_cast<long long>(data.n()),
                methods.size());
}

// ---------------------------------------------------------------------------
// cv
// ---------------------------------------------------------------------------

void run_cv(const Settings& s, const std::string& out, int jobs) {
    auto ctx = make_context("cv", s, out);
    ctx.note_input(s.str("data"));

    const auto data = load_dataset(s);
    const auto lambda_grid =
        parse_double_list(s.str_or("lambda_grid", "0,0.1,1,10,100"), "lambda_grid");
    const auto delta_grid = parse_double_list(s.str_or("delta_grid", "0,0.2,0.5,1"), "delta_grid");
    penn::modelsel::HvBlockSpec spec;
    spec.v = s.integer("v", 10);
    spec.h = s.integer("h", 10);

    auto base_cfg = penn_config_from(s);
    penn::modelsel::TrainEvalFn train_eval = [&](const penn::Dataset& train,
                                                 const penn::Dataset& val, double lambda,
                                                 double delta) {
        auto cfg = base_cfg;
        cfg.lambda = lambda;
        cfg.kernel = penn::prior::KernelSpec::disjoint(delta);
        const auto model = penn::trainer::train(train, cfg);
        const Eigen::VectorXd pred = model.predict_mean(val);
        return (val.y - pred).squaredNorm() / static_cast<double>(val.y.size());
    };

    const auto result = penn::modelsel::grid_search(data, lambda_grid, delta_grid, spec, train_eval,
                                                    !s.flag("no_endpoint_check", false), jobs);

    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : result.cells)
        rows.push_back({fmt(cell.lambda), fmt(cell.delta),
                        cell.valid ? fmt(cell.mean_val_mse) : "",
                        cell.valid ? "ok" : ("failed: " + cell.error)});
    penn::io::write_csv(ctx.artifact("grid.csv"), {"lambda", "delta", "mean_val_mse", "status"},
                        rows);

    std::vector<std::vector<std::string>> best{
        {fmt(result.best_lambda), fmt(result.best_delta), fmt(result.best_mse)}};
    penn::io::write_csv(ctx.artifact("chosen.csv"), {"lambda", "delta", "mean_val_mse"}, best);
    ctx.finish();
    std::printf("best cell: lambda=%s delta=%s (validation mse %s)\n",
                fmt(result.best_lambda).c_str(), fmt(result.best_delta).c_str(),
                fmt(result.best_mse).c_str());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void run_simulate(const Settings& s, const std::string& out, int jobs) {
    auto ctx = make_context("simulate", s, out);

    penn::simlab::ScenarioGrid grid;
    if (s.has("n")) grid.n_values = parse_int_list(s.str("n"), "n");
    if (s.has("rho")) grid.rho_values = parse_double_list(s.str("rho"), "rho");
    if (s.has("sigma")) grid.sigma_values = parse_double_list(s.str("sigma"), "sigma");
    grid.seeds_per_cell = s.integer("seeds", 10);
    if (s.has("methods")) grid.methods = split_list(s.str("methods"));
    grid.validate();

    penn::simlab::ScenarioMethodConfig cfg;
    cfg.penn = penn_config_from(s);
    cfg.shapley_draws = s.integer("shapley_draws", 60);
    cfg.lime.sigma_z = s.num("lime_sigma_z", 0.1);
    cfg.lime.n_samples = s.integer("lime_samples", 500);
    cfg.lime.kernel_width = s.num("lime_width", 0.0);
    cfg.validation_n = s.integer("validation_n", 1000);
    cfg.test_n = s.integer("test_n", 1000);
    if (s.has("tune_lambdas"))
        cfg.tune_lambdas = parse_double_list(s.str("tune_lambdas"), "tune_lambdas");
    if (s.has("tune_deltas"))
        cfg.tune_deltas = parse_double_list(s.str("tune_deltas"), "tune_deltas");

    const auto rows = penn::simlab::run_scenario_grid(grid, cfg, s.seed(), jobs);

    std::vector<std::vector<std::string>> csv;
    for (const auto& r : rows)
        csv.push_back({std::to_string(r.n), fmt(r.rho), fmt(r.sigma), std::to_string(r.seed),
                       r.method, r.metric, fmt(r.value)});
    penn::io::write_csv(ctx.artifact("results.csv"),
                        {"n", "rho", "sigma", "seed", "method", "metric", "value"}, csv);
    ctx.finish();
    std::printf("simulated %zu result rows\n", rows.size());
}

// ---------------------------------------------------------------------------
// capm
// ---------------------------------------------------------------------------

void run_capm(const Settings& s, const std::string& out) {
    auto ctx = make_context("capm", s, out);

    if (s.flag("make_fixture", false)) {
        penn::capm::SyntheticCapmConfig scfg;
        scfg.periods = s.integer("fixture_periods", 480);
        scfg.yoy_window = s.integer("yoy_window", 12);
        scfg.noise_sd = s.num("fixture_noise_sd", 0.5);
        scfg.switch_prob = s.num("fixture_switch_prob", 1.0 / 80.0);
        scfg.seed = s.seed();
        const auto fixture = penn::capm::make_synthetic_fixture(scfg);
        penn::io::write_returns_csv(fixture.returns, ctx.artifact("returns.csv"));
        penn::io::write_macro_csv(fixture.macro, ctx.artifact("macro.csv"));
        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index t = 0; t < fixture.true_beta.size(); ++t)
            rows.push_back({fixture.truth_dates[static_cast<std::size_t>(t)],
                            fmt(fixture.true_beta(t)), fmt(fixture.true_alpha)});
        penn::io::write_csv(ctx.artifact("true_params.csv"), {"date", "beta", "alpha"}, rows);
        ctx.finish();
        std::printf("fixture written to %s\n", out.c_str());
        return;
    }

    ctx.note_input(s.str("returns"));
    ctx.note_input(s.str("macro"));
    const auto returns = penn::io::load_returns_csv(s.str("returns"));
    const auto macro = penn::io::load_macro_csv(s.str("macro"));
    const int yoy_window = s.integer("yoy_window", 12);

    std::vector<std::string> sectors;
    const std::string requested = s.str_or("sector", "all");
    if (requested == "all")
        sectors = returns.sector_names;
    else
        sectors = split_list(requested);

    auto cfg = penn_config_from(s);
    if (!s.has("epochs")) cfg.optimizer.epochs = 200;  // empirical default
    if (s.flag("static_alpha", false)) cfg.static_mask = {1, 0};

    for (const auto& sector : sectors) {
        const auto feats = penn::capm::build_features(returns, macro, sector, yoy_window);
        const auto fit = penn::capm::fit_conditional_capm(feats, cfg);

        std::vector<std::vector<std::string>> rows;
        for (std::size_t t = 0; t < fit.dates.size(); ++t) {
            const auto i = static_cast<Eigen::Index>(t);
            rows.push_back({fit.dates[t], fmt(fit.alpha_mean(i)), fmt(fit.alpha_sd(i)),
                            fmt(fit.beta_mean(i)), fmt(fit.beta_sd(i))});
        }
        penn::io::write_csv(ctx.artifact("fit_" + sector + ".csv"),
                            {"date", "alpha_mean", "alpha_sd", "beta_mean", "beta_sd"}, rows);

        if (s.flag("realtime", false)) {
            const int start = s.integer("start_index", static_cast<int>(feats.y.size()) / 2);
            const int every = s.integer("retrain_every", 21);
            const auto fc = penn::capm::realtime_forecast(feats, cfg, start, every);
            std::vector<std::vector<std::string>> frows;
            for (std::size_t t = 0; t < fc.dates.size(); ++t) {
                const auto i = static_cast<Eigen::Index>(t);
                frows.push_back({fc.dates[t], fmt(fc.alpha(i)), fmt(fc.beta(i))});
            }
            penn::io::write_csv(ctx.artifact("forecast_" + sector + ".csv"),
                                {"date", "alpha_forecast", "beta_forecast"}, frows);
        }
    }
    ctx.finish();
    std::printf("fitted %zu sector(s)\n", sectors.size());
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int run_gradcheck(const Settings& s, const std::string& out) {
    auto ctx = make_context("gradcheck", s, out);
    const int instances = s.integer("instances", 20);
    const double threshold = s.num("threshold", 1e-5);
    penn::RngStream root(s.seed());

    double worst = 0.0;
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < instances; ++k) {
        penn::RngStream inst = root.derive(static_cast<std::uint64_t>(k));
        const int n = 10 + static_cast<int>(inst.uniform_index(41));  // <= 50
        const int dim = 1 + static_cast<int>(inst.uniform_index(4));  // <= 4
        const int h1 = 2 + static_cast<int>(inst.uniform_index(7));   // <= 8
        const int h2 = 2 + static_cast<int>(inst.uniform_index(7));
        const int draws = 1 + static_cast<int>(inst.uniform_index(8));
        const double lambda = inst.uniform() * 2.0;
        const double delta = inst.uniform_co();

        penn::diffcore::NetworkTopology topo;
        topo.input_dim = dim;
        topo.hidden_dims = {h1, h2};
        topo.output_dim = dim;
        topo.static_mask = penn::diffcore::no_static_mask(dim);
        penn::RngStream wrng = inst.derive("weights");
        auto w = penn::diffcore::NetworkWeights::glorot(topo, wrng);

        Eigen::MatrixXd z(n, dim);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < dim; ++c) z(i, c) = inst.normal();
            y(i) = inst.normal();
        }
        Eigen::VectorXd noise(static_cast<Eigen::Index>(n) * draws * dim);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = inst.normal();
        const auto kw =
            penn::prior::build_kernel_weights(z, penn::prior::KernelSpec::disjoint(delta));

        auto loss_of = [&](const penn::diffcore::NetworkWeights& wi) {
            auto fwd = penn::diffcore::forward(wi, topo, z);
            return penn::loss::objective_with_gradient(y, z, fwd.mu, fwd.sigma, noise, draws,
                                                       kw.pi, lambda)
                .value.total;
        };
        auto fwd = penn::diffcore::forward(w, topo, z);
        auto obj =
            penn::loss::objective_with_gradient(y, z, fwd.mu, fwd.sigma, noise, draws, kw.pi, lambda);
        auto analytic = penn::diffcore::backward(w, topo, fwd.tape, obj.d_mu_q, obj.d_sigma_q);
        const double err =
            penn::diffcore::finite_difference_check(loss_of, w, topo, analytic, 1e-5);
        worst = std::max(worst, err);
        rows.push_back({std::to_string(k), std::to_string(n), std::to_string(dim),
                        std::to_string(h1) + "x" + std::to_string(h2), fmt(lambda), fmt(delta),
                        fmt(err)});
    }
    penn::io::write_csv(ctx.artifact("gradcheck.csv"),
                        {"instance", "n", "k", "hidden", "lambda", "delta", "max_rel_error"}, rows);
    ctx.finish();
    std::printf("gradcheck: %d instances, worst relative error %s (threshold %s)\n", instances,
                fmt(worst).c_str(), fmt(threshold).c_str());
    return worst < threshold ? kExitOk : kExitRuntime;
}

int dispatch(const std::string& command, const Settings& s, const std::string& out, int jobs,
             bool verbose) {
    if (command == "train") {
        run_train(s, out, verbose);
        return kExitOk;
    }
    if (command == "explain") {
        run_explain(s, out);
        return kExitOk;
    }
    if (command == "cv") {
        run_cv(s, out, jobs);
        return kExitOk;
    }
    if (command == "simulate") {
        run_simulate(s, out, jobs);
        return kExitOk;
    }
    if (command == "capm") {
        run_capm(s, out);
        return kExitOk;
    }
    if (command == "gradcheck") return run_gradcheck(s, out);
    throw Error("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameter encoder network workbench"};
    app.require_subcommand(0, 1);

    std::string out_dir = "penn_out";
    std::string config_path;
    std::string from_manifest;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool verbose = false;

    app.add_option("--from-manifest", from_manifest,
                   "re-run a previous command from its manifest.json");
    app.add_option("--out", out_dir, "output directory (created if missing)");

    // Each subcommand collects its settings into the shared map.
    Settings settings;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option_function<std::string>(
            "--seed", [&](const std::string& v) { settings.values["seed"] = v; },
            "root random seed");
        cmd->add_option("--jobs", jobs, "parallel workers for grid/seed loops");
        cmd->add_option("--config", config_path, "key = value config file (flags win)");
        cmd->add_flag("--verbose", verbose, "progress output to stderr");
    };
    auto opt = [&](CLI::App* cmd, const std::string& name) {
        std::string spelling = "--" + name;
        if (name.find('_') != std::string::npos) {
            std::string hyphens = name;
            for (auto& c : hyphens)
                if (c == '_') c = '-';
            spelling += ",--" + hyphens;
        }
        cmd->add_option_function<std::string>(
            spelling, [&settings, name](const std::string& v) { settings.values[name] = v; },
            name);
    };
    auto flg = [&](CLI::App* cmd, const std::string& name, const std::string& help) {
        std::string spelling = "--" + name;
        if (name.find('_') != std::string::npos) {
            std::string hyphens = name;
            for (auto& c : hyphens)
                if (c == '_') c = '-';
            spelling += ",--" + hyphens;
        }
        cmd->add_flag_callback(
            spelling, [&settings, name]() { settings.values[name] = "true"; }, help);
    };

    auto* train = app.add_subcommand("train", "fit a model on a CSV dataset");
    add_common(train);
    for (const char* k : {"data", "y_col", "x_cols", "z_cols", "lambda", "delta", "kernel",
                          "bandwidth", "hidden", "draws", "activation", "static_mask", "epochs",
                          "learning_rate", "beta1", "beta2", "epsilon", "clip_value", "clip_norm"})
        opt(train, k);
    flg(train, "intercept", "prepend a constant-one decoder column");
    flg(train, "freeze_prior", "hold prior moments fixed inside each gradient step");

    auto* explain = app.add_subcommand("explain", "contribution matrices for a trained model");
    add_common(explain);
    for (const char* k :
         {"model", "data", "methods", "shapley_draws", "lime_sigma_z", "lime_samples", "lime_width"})
        opt(explain, k);

    auto* cv = app.add_subcommand("cv", "hv-block cross-validated grid search");
    add_common(cv);
    for (const char* k : {"data", "y_col", "x_cols", "z_cols", "lambda_grid", "delta_grid",
                          "hidden", "draws", "epochs", "learning_rate"})
        opt(cv, k);
    cv->add_option_function<std::string>(
        "--v-blocks", [&settings](const std::string& v) { settings.values["v"] = v; },
        "number of validation blocks");
    cv->add_option_function<std::string>(
        "--h-margin", [&settings](const std::string& v) { settings.values["h"] = v; },
        "masked margin around each block");
    flg(cv, "intercept", "prepend a constant-one decoder column");
    flg(cv, "no_endpoint_check", "allow grids without the static/unregularized extremes");

    auto* simulate = app.add_subcommand("simulate", "scenario grid on the synthetic benchmark");
    add_common(simulate);
    for (const char* k : {"n", "rho", "sigma", "seeds", "methods", "lambda", "delta", "hidden",
                          "draws", "epochs", "learning_rate", "shapley_draws", "lime_sigma_z",
                          "lime_samples", "validation_n", "test_n", "tune_lambdas", "tune_deltas"})
        opt(simulate, k);

    auto* capm = app.add_subcommand("capm", "conditional asset pricing pipeline");
    add_common(capm);
    for (const char* k : {"returns", "macro", "sector", "yoy_window", "lambda", "delta", "hidden",
                          "draws", "epochs", "learning_rate", "start_index", "retrain_every",
                          "fixture_periods", "fixture_noise_sd", "fixture_switch_prob"})
        opt(capm, k);
    flg(capm, "static_alpha", "pin the intercept across dates");
    flg(capm, "realtime", "also emit expanding-window forecasts");
    flg(capm, "make_fixture", "write the synthetic fixture CSVs and exit");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of the objective");
    add_common(gradcheck);
    for (const char* k : {"instances", "threshold"}) opt(gradcheck, k);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!from_manifest.empty()) {
            const auto manifest = penn::io::RunManifest::load(from_manifest);
            Settings replay;
            replay.values = manifest.config;
            return dispatch(manifest.command, replay, out_dir, jobs, verbose);
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help() << std::flush;
            return kExitUsage;
        }
        auto* cmd = app.get_subcommands().front();
        if (!config_path.empty()) merge_config_file(settings, config_path);
        return dispatch(cmd->get_name(), settings, out_dir, jobs, verbose);
    } catch (const Error& e) {
        // Missing/invalid settings are usage errors; anything that happens
        // mid-run is a runtime failure.
        const std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        const bool usage = msg.find("missing required setting") != std::string::npos ||
                           msg.find("empty list") != std::string::npos ||
                           msg.find("unknown command") != std::string::npos ||
                           msg.find("unknown method") != std::string::npos ||
                           msg.find("unknown kernel") != std::string::npos ||
                           msg.find("config:") != std::string::npos;
        return usage ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
