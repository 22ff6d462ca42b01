#include "penn/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace penn::io {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    require(rows > 0, "model file: empty matrix");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        require(static_cast<Eigen::Index>(j[i].size()) == cols, "model file: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw Error("csv: no column named '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "csv: cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line, ',');
        for (auto& c : cells) c = trim(c);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            require(cells.size() == table.header.size(),
                    "csv: row with " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(table.header.size()) + " in " + path.string());
            table.rows.push_back(std::move(cells));
        }
    }
    require(!table.header.empty(), "csv: missing header in " + path.string());
    return table;
}

std::string format_double(double v) {
    char buf[40];
    // 17 significant digits round-trip any IEEE double; trim to the shortest
    // representation that still parses back exactly.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v || (std::isnan(back) && std::isnan(v))) return buf;
    }
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    require(out.good(), "csv: cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "");
    out << "\n";
    for (const auto& row : rows) {
        require(row.size() == header.size(), "csv: row width mismatch while writing");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "");
        out << "\n";
    }
    require(out.good(), "csv: write failed for " + path.string());
}

double parse_cell(const std::string& cell) {
    if (cell.empty() || cell == "NA" || cell == "na" || cell == "nan" || cell == "NaN")
        return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    require(end == cell.c_str() + cell.size(), "csv: cell '" + cell + "' is not numeric");
    return v;
}

void save_model(const trainer::TrainedModel& model, const std::filesystem::path& path,
                const std::vector<std::string>& x_cols, const std::string& y_col,
                const std::vector<std::string>& z_cols, bool intercept) {
    json j;
    j["format"] = "penn-model";
    j["format_version"] = kModelFormatVersion;

    json topo;
    topo["input_dim"] = model.topology.input_dim;
    topo["hidden_dims"] = model.topology.hidden_dims;
    topo["output_dim"] = model.topology.output_dim;
    topo["static_mask"] = model.topology.static_mask;
    topo["activation"] =
        model.topology.activation == diffcore::Activation::Sigmoid ? "sigmoid" : "tanh";
    j["topology"] = topo;

    json w;
    w["hidden_w"] = json::array();
    w["hidden_b"] = json::array();
    for (const auto& hw : model.weights.hidden_w) w["hidden_w"].push_back(matrix_to_json(hw));
    for (const auto& hb : model.weights.hidden_b) w["hidden_b"].push_back(vector_to_json(hb));
    w["mean_w"] = matrix_to_json(model.weights.mean_w);
    w["mean_b"] = vector_to_json(model.weights.mean_b);
    w["sigma_w"] = matrix_to_json(model.weights.sigma_w);
    w["sigma_b"] = vector_to_json(model.weights.sigma_b);
    j["weights"] = w;

    json cfg;
    cfg["lambda"] = model.config.lambda;
    switch (model.config.kernel.kind) {
        case prior::KernelSpec::Kind::Disjoint:
            cfg["kernel"] = "disjoint";
            cfg["delta"] = model.config.kernel.delta;
            break;
        case prior::KernelSpec::Kind::Epanechnikov:
            cfg["kernel"] = "epanechnikov";
            cfg["bandwidth"] = model.config.kernel.bandwidth;
            break;
        case prior::KernelSpec::Kind::Tricube:
            cfg["kernel"] = "tricube";
            cfg["bandwidth"] = model.config.kernel.bandwidth;
            break;
    }
    cfg["monte_carlo_draws"] = model.config.monte_carlo_draws;
    cfg["freeze_prior_in_gradient"] = model.config.freeze_prior_in_gradient;
    cfg["learning_rate"] = model.config.optimizer.learning_rate;
    cfg["beta1"] = model.config.optimizer.beta1;
    cfg["beta2"] = model.config.optimizer.beta2;
    cfg["epsilon"] = model.config.optimizer.epsilon;
    cfg["clip_norm"] = model.config.optimizer.clip_norm;
    cfg["clip_value"] = model.config.optimizer.clip_value;
    cfg["epochs"] = model.config.optimizer.epochs;
    cfg["rng_seed"] = model.config.optimizer.rng_seed;
    j["config"] = cfg;

    json stats;
    stats["mean"] = vector_to_json(model.encoder_stats.mean);
    stats["sd"] = vector_to_json(model.encoder_stats.sd);
    stats["zero_variance"] = model.encoder_stats.zero_variance;
    j["standardization"] = stats;

    json trace = json::array();
    for (const auto& lb : model.loss_trace)
        trace.push_back({{"mc_mse", lb.mc_mse}, {"kl_total", lb.kl_total}, {"total", lb.total}});
    j["loss_trace"] = trace;

    json cols;
    cols["x_cols"] = x_cols;
    cols["y_col"] = y_col;
    cols["z_cols"] = z_cols;
    cols["intercept"] = intercept;
    j["columns"] = cols;

    std::ofstream out(path);
    require(out.good(), "model file: cannot write " + path.string());
    out << j.dump(2) << "\n";
    require(out.good(), "model file: write failed for " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "model file: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("model file: invalid JSON in " + path.string() + ": " + e.what());
    }
    require(j.value("format", "") == "penn-model", "model file: unrecognized format");
    require(j.value("format_version", -1) == kModelFormatVersion,
            "model file: unsupported format version");

    LoadedModel out;
    trainer::TrainedModel& m = out.model;
    const json& topo = j.at("topology");
    m.topology.input_dim = topo.at("input_dim").get<int>();
    m.topology.hidden_dims = topo.at("hidden_dims").get<std::vector<int>>();
    m.topology.output_dim = topo.at("output_dim").get<int>();
    m.topology.static_mask = topo.at("static_mask").get<std::vector<std::uint8_t>>();
    m.topology.activation = topo.at("activation").get<std::string>() == "tanh"
                                ? diffcore::Activation::Tanh
                                : diffcore::Activation::Sigmoid;
    m.topology.validate();

    const json& w = j.at("weights");
    for (const auto& hw : w.at("hidden_w")) m.weights.hidden_w.push_back(matrix_from_json(hw));
    for (const auto& hb : w.at("hidden_b")) m.weights.hidden_b.push_back(vector_from_json(hb));
    m.weights.mean_w = matrix_from_json(w.at("mean_w"));
    m.weights.mean_b = vector_from_json(w.at("mean_b"));
    m.weights.sigma_w = matrix_from_json(w.at("sigma_w"));
    m.weights.sigma_b = vector_from_json(w.at("sigma_b"));

    const json& cfg = j.at("config");
    m.config.lambda = cfg.at("lambda").get<double>();
    const std::string kernel = cfg.at("kernel").get<std::string>();
    if (kernel == "disjoint")
        m.config.kernel = prior::KernelSpec::disjoint(cfg.at("delta").get<double>());
    else if (kernel == "epanechnikov")
        m.config.kernel = prior::KernelSpec::epanechnikov(cfg.at("bandwidth").get<double>());
    else if (kernel == "tricube")
        m.config.kernel = prior::KernelSpec::tricube(cfg.at("bandwidth").get<double>());
    else
        throw Error("model file: unknown kernel '" + kernel + "'");
    m.config.hidden_dims = m.topology.hidden_dims;
    m.config.static_mask = m.topology.static_mask;
    m.config.activation = m.topology.activation;
    m.config.monte_carlo_draws = cfg.at("monte_carlo_draws").get<int>();
    m.config.freeze_prior_in_gradient = cfg.at("freeze_prior_in_gradient").get<bool>();
    m.config.optimizer.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.optimizer.beta1 = cfg.at("beta1").get<double>();
    m.config.optimizer.beta2 = cfg.at("beta2").get<double>();
    m.config.optimizer.epsilon = cfg.at("epsilon").get<double>();
    m.config.optimizer.clip_norm = cfg.at("clip_norm").get<double>();
    m.config.optimizer.clip_value = cfg.at("clip_value").get<double>();
    m.config.optimizer.epochs = cfg.at("epochs").get<int>();
    m.config.optimizer.rng_seed = cfg.at("rng_seed").get<std::uint64_t>();

    const json& stats = j.at("standardization");
    m.encoder_stats.mean = vector_from_json(stats.at("mean"));
    m.encoder_stats.sd = vector_from_json(stats.at("sd"));
    m.encoder_stats.zero_variance = stats.at("zero_variance").get<std::vector<std::uint8_t>>();

    for (const auto& lb : j.at("loss_trace")) {
        loss::LossBreakdown b;
        b.mc_mse = lb.at("mc_mse").get<double>();
        b.kl_total = lb.at("kl_total").get<double>();
        b.total = lb.at("total").get<double>();
        b.lambda = m.config.lambda;
        m.loss_trace.push_back(b);
    }

    const json& cols = j.at("columns");
    out.x_cols = cols.at("x_cols").get<std::vector<std::string>>();
    out.y_col = cols.at("y_col").get<std::string>();
    out.z_cols = cols.at("z_cols").get<std::vector<std::string>>();
    out.intercept = cols.at("intercept").get<bool>();
    return out;
}

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos,
                "config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        require(!key.empty(), "config: empty key on line " + std::to_string(lineno));
        cfg.values_[key] = value;
    }
    return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    require(it != values_.end(), "config: missing required key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_cell(it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return static_cast<int>(std::llround(parse_cell(it->second)));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: key '" + key + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_string_list(key)) out.push_back(parse_cell(item));
    return out;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : get_string_list(key))
        out.push_back(static_cast<int>(std::llround(parse_cell(item))));
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    for (auto& item : split(it->second, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void RunManifest::write(const std::filesystem::path& path) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["input_hashes"] = input_hashes;
    j["artifacts"] = artifacts;
    j["elapsed_seconds"] = elapsed_seconds;
    std::ofstream out(path);
    require(out.good(), "manifest: cannot write " + path.string());
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "manifest: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("manifest: invalid JSON in " + path.string() + ": " + e.what());
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    m.elapsed_seconds = j.value("elapsed_seconds", 0.0);
    return m;
}

std::string fnv1a_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "hash: cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]));
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

capm::ReturnsPanel load_returns_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    require(table.header.size() >= 4,
            "returns csv: need columns date, r_f, r_m and at least one sector");
    require(table.header[0] == "date", "returns csv: first column must be 'date'");
    const int rf = table.column("r_f");
    const int rm = table.column("r_m");

    capm::ReturnsPanel panel;
    for (std::size_t c = 1; c < table.header.size(); ++c)
        if (static_cast<int>(c) != rf && static_cast<int>(c) != rm)
            panel.sector_names.push_back(table.header[c]);

    const auto t = static_cast<Eigen::Index>(table.rows.size());
    panel.risk_free.resize(t);
    panel.market.resize(t);
    panel.sectors.resize(t, static_cast<Eigen::Index>(panel.sector_names.size()));
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        panel.dates.push_back(row[0]);
        panel.risk_free(i) = parse_cell(row[static_cast<std::size_t>(rf)]);
        panel.market(i) = parse_cell(row[static_cast<std::size_t>(rm)]);
        Eigen::Index s = 0;
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            if (static_cast<int>(c) == rf || static_cast<int>(c) == rm) continue;
            panel.sectors(i, s++) = parse_cell(row[c]);
        }
    }
    return panel;
}

capm::MacroPanel load_macro_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    require(table.header.size() >= 2, "macro csv: need a date column and at least one series");
    require(table.header[0] == "date", "macro csv: first column must be 'date'");

    capm::MacroPanel panel;
    panel.series_names.assign(table.header.begin() + 1, table.header.end());
    const auto t = static_cast<Eigen::Index>(table.rows.size());
    panel.values.resize(t, static_cast<Eigen::Index>(panel.series_names.size()));
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        panel.dates.push_back(row[0]);
        for (std::size_t c = 1; c < table.header.size(); ++c)
            panel.values(i, static_cast<Eigen::Index>(c - 1)) = parse_cell(row[c]);
    }
    return panel;
}

void write_returns_csv(const capm::ReturnsPanel& panel, const std::filesystem::path& path) {
    std::vector<std::string> header{"date", "r_f", "r_m"};
    header.insert(header.end(), panel.sector_names.begin(), panel.sector_names.end());
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < panel.size(); ++i) {
        std::vector<std::string> row{panel.dates[static_cast<std::size_t>(i)],
                                     format_double(panel.risk_free(i)),
                                     format_double(panel.market(i))};
        for (Eigen::Index s = 0; s < panel.sectors.cols(); ++s)
            row.push_back(format_double(panel.sectors(i, s)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

void write_macro_csv(const capm::MacroPanel& panel, const std::filesystem::path& path) {
    std::vector<std::string> header{"date"};
    header.insert(header.end(), panel.series_names.begin(), panel.series_names.end());
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < panel.size(); ++i) {
        std::vector<std::string> row{panel.dates[static_cast<std::size_t>(i)]};
        for (Eigen::Index c = 0; c < panel.values.cols(); ++c)
            row.push_back(format_double(panel.values(i, c)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

}  // namespace penn::io
