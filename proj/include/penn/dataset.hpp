#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "penn/error.hpp"

namespace penn {

// Supervised sample. x feeds the linear decoder, y is the target, z (when
// present) feeds the encoder instead of x. If `intercept` is set, column 0
// of x is a constant-one column providing a local mean.
struct Dataset {
    Eigen::MatrixXd x;                       // N x K decoder inputs
    Eigen::VectorXd y;                       // N
    std::optional<Eigen::MatrixXd> z;        // N x J encoder inputs
    bool intercept = false;
    std::vector<std::string> feature_names;  // optional, size K when set

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index k() const { return x.cols(); }

    const Eigen::MatrixXd& encoder_input() const { return z ? *z : x; }

    // True when the encoder consumes x itself, so the constant column (if
    // any) also reaches the encoder.
    bool encoder_shares_x() const { return !z.has_value(); }

    void validate() const {
        require(x.rows() > 0, "dataset: empty");
        require(y.size() == x.rows(), "dataset: y length != rows of x");
        if (z) require(z->rows() == x.rows(), "dataset: z rows != x rows");
        require(x.allFinite() && y.allFinite(), "dataset: non-finite values in x or y");
        if (z) require(z->allFinite(), "dataset: non-finite values in z");
        if (intercept)
            require((x.col(0).array() == 1.0).all(), "dataset: intercept column is not all ones");
    }

    Dataset rows(const std::vector<int>& idx) const {
        Dataset out;
        out.intercept = intercept;
        out.feature_names = feature_names;
        out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        out.y.resize(static_cast<Eigen::Index>(idx.size()));
        if (z) out.z = Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), z->cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            out.x.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
            out.y(static_cast<Eigen::Index>(r)) = y(idx[r]);
            if (z) out.z->row(static_cast<Eigen::Index>(r)) = z->row(idx[r]);
        }
        return out;
    }
};

// Column-wise affine map (v - mean) / sd. Passthrough columns (the constant
// intercept column) keep mean 0 / sd 1; zero-variance columns keep sd 1 so
// they standardize to exactly zero instead of dividing by zero.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    std::vector<std::uint8_t> zero_variance;  // 1 where a column was degenerate

    static Standardization fit(const Eigen::MatrixXd& m, int passthrough_col = -1) {
        Standardization s;
        const Eigen::Index cols = m.cols();
        s.mean = Eigen::VectorXd::Zero(cols);
        s.sd = Eigen::VectorXd::Ones(cols);
        s.zero_variance.assign(static_cast<std::size_t>(cols), 0);
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (c == passthrough_col) continue;
            const double mu = m.col(c).mean();
            const double var = (m.col(c).array() - mu).square().sum() / static_cast<double>(m.rows());
            if (var > 0.0) {
                s.mean(c) = mu;
                s.sd(c) = std::sqrt(var);
            } else {
                s.mean(c) = mu;  // sd stays 1: column maps to zeros
                s.zero_variance[static_cast<std::size_t>(c)] = 1;
            }
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const {
        require(m.cols() == mean.size(), "standardization: column count mismatch");
        return (m.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
    }
};

}  // namespace penn
