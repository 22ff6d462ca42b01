#pragma once

#include <functional>
#include <string>
#include <vector>

#include "penn/dataset.hpp"
#include "penn/error.hpp"

namespace penn::modelsel {

// Ordered blocked cross-validation: v contiguous validation blocks, each
// flanked by an h-sample margin that is masked from the training set.
struct HvBlockSpec {
    int v = 10;
    int h = 10;

    void validate() const {
        require(v >= 2, "hv-block: v must be >= 2");
        require(h >= 0, "hv-block: h must be >= 0");
    }
};

struct Split {
    std::vector<int> train_idx;
    std::vector<int> val_idx;
};

// Partitions 0..N-1 in order into v validation blocks (sizes differing by at
// most one, remainder assigned to the earliest blocks). For block [a, b] the
// training set is everything outside [a-h, b+h].
std::vector<Split> hv_block_splits(int n, const HvBlockSpec& spec);

struct GridCell {
    double lambda = 0.0;
    double delta = 0.0;
    double mean_val_mse = 0.0;
    bool valid = false;
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;  // lambda-major, delta-minor ordering
    double best_lambda = 0.0;
    double best_delta = 0.0;
    double best_mse = 0.0;
};

// Trains a model on `train` and returns its posterior-mean validation MSE on
// `val`. Implementations receive the candidate hyperparameters.
using TrainEvalFn = std::function<double(const Dataset& train, const Dataset& val, double lambda,
                                         double delta)>;

// Exhaustive search over the (lambda, delta) grid with hv-block validation.
// Each cell averages validation MSE over all splits. Failures invalidate the
// cell without aborting the grid. Ties prefer larger lambda, then smaller
// delta. Unless require_endpoints is false, the grids must contain the
// unregularized and static extremes (lambda = 0; delta 0 and 1).
GridResult grid_search(const Dataset& data, const std::vector<double>& lambda_grid,
                       const std::vector<double>& delta_grid, const HvBlockSpec& spec,
                       const TrainEvalFn& train_eval, bool require_endpoints = true,
                       int jobs = 1);

}  // namespace penn::modelsel
