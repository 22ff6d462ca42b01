#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "penn/capm.hpp"
#include "penn/error.hpp"
#include "penn/trainer.hpp"

namespace penn::io {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Empty cells and the usual NA spellings parse to NaN.
double parse_cell(const std::string& cell);

// ---------------------------------------------------------------------------
// Model container (versioned JSON)
// ---------------------------------------------------------------------------

void save_model(const trainer::TrainedModel& model, const std::filesystem::path& path,
                const std::vector<std::string>& x_cols = {}, const std::string& y_col = {},
                const std::vector<std::string>& z_cols = {}, bool intercept = false);

struct LoadedModel {
    trainer::TrainedModel model;
    std::vector<std::string> x_cols;
    std::string y_col;
    std::vector<std::string> z_cols;
    bool intercept = false;
};

LoadedModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Plain key = value config files ('#' starts a comment; lists are
// comma-separated).
// ---------------------------------------------------------------------------

class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::filesystem::path& path);
    static KeyValueConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;       // resolved settings
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_hashes; // path -> fnv1a-64 hex
    std::vector<std::string> artifacts;              // paths written by the run
    double elapsed_seconds = 0.0;

    void write(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

std::string fnv1a_file_hex(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Panel CSV ingestion for the asset pricing pipeline
// ---------------------------------------------------------------------------

// returns.csv: date, r_f, r_m, then one column per sector.
capm::ReturnsPanel load_returns_csv(const std::filesystem::path& path);

// macro.csv: date, then one column per series.
capm::MacroPanel load_macro_csv(const std::filesystem::path& path);

void write_returns_csv(const capm::ReturnsPanel& panel, const std::filesystem::path& path);
void write_macro_csv(const capm::MacroPanel& panel, const std::filesystem::path& path);

}  // namespace penn::io
