#include "penn/modelsel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>

namespace penn::modelsel {

std::vector<Split> hv_block_splits(int n, const HvBlockSpec& spec) {
    spec.validate();
    require(n >= spec.v, "hv-block: N smaller than the number of blocks");

    const int base = n / spec.v;
    const int remainder = n % spec.v;

    std::vector<Split> splits;
    int start = 0;
    for (int b = 0; b < spec.v; ++b) {
        const int size = base + (b < remainder ? 1 : 0);
        const int a = start;
        const int bend = start + size - 1;
        Split s;
        s.val_idx.reserve(static_cast<std::size_t>(size));
        for (int i = a; i <= bend; ++i) s.val_idx.push_back(i);
        const int mask_lo = a - spec.h;
        const int mask_hi = bend + spec.h;
        for (int i = 0; i < n; ++i)
            if (i < mask_lo || i > mask_hi) s.train_idx.push_back(i);
        require(!s.train_idx.empty(),
                "hv-block: training set empty for block " + std::to_string(b) +
                    "; reduce v or h");
        splits.push_back(std::move(s));
        start += size;
    }
    return splits;
}

GridResult grid_search(const Dataset& data, const std::vector<double>& lambda_grid,
                       const std::vector<double>& delta_grid, const HvBlockSpec& spec,
                       const TrainEvalFn& train_eval, bool require_endpoints, int jobs) {
    require(!lambda_grid.empty(), "grid search: lambda grid is empty");
    require(!delta_grid.empty(), "grid search: delta grid is empty");
    require(jobs >= 1, "grid search: jobs must be >= 1");
    if (require_endpoints) {
        auto contains = [](const std::vector<double>& g, double v) {
            return std::find(g.begin(), g.end(), v) != g.end();
        };
        require(contains(lambda_grid, 0.0), "grid search: lambda grid must contain 0");
        require(contains(delta_grid, 0.0) && contains(delta_grid, 1.0),
                "grid search: delta grid must contain 0 and 1");
    }

    const auto splits = hv_block_splits(static_cast<int>(data.n()), spec);

    struct Task {
        std::size_t cell;
        std::size_t split;
    };
    std::vector<GridCell> cells;
    std::vector<Task> tasks;
    for (double lam : lambda_grid)
        for (double del : delta_grid) {
            GridCell c;
            c.lambda = lam;
            c.delta = del;
            cells.push_back(c);
            for (std::size_t s = 0; s < splits.size(); ++s)
                tasks.push_back({cells.size() - 1, s});
        }

    std::vector<double> mse(tasks.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(tasks.size());
    auto run_task = [&](std::size_t t) {
        const auto& cell = cells[tasks[t].cell];
        const auto& split = splits[tasks[t].split];
        try {
            mse[t] = train_eval(data.rows(split.train_idx), data.rows(split.val_idx), cell.lambda,
                                cell.delta);
        } catch (const std::exception& e) {
            errors[t] = e.what();
        }
    };

    if (jobs <= 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t t = next.fetch_add(1);
                if (t >= tasks.size()) return;
                run_task(t);
            }
        };
        std::vector<std::future<void>> pool;
        for (int j = 0; j < jobs; ++j) pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    std::vector<double> cell_sum(cells.size(), 0.0);
    std::vector<int> cell_count(cells.size(), 0);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        GridCell& c = cells[tasks[t].cell];
        if (!errors[t].empty()) {
            c.error = errors[t];
            continue;
        }
        cell_sum[tasks[t].cell] += mse[t];
        ++cell_count[tasks[t].cell];
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        GridCell& c = cells[i];
        if (!c.error.empty() || cell_count[i] != static_cast<int>(splits.size())) {
            c.valid = false;  // any failed split invalidates the cell
            continue;
        }
        c.mean_val_mse = cell_sum[i] / cell_count[i];
        c.valid = std::isfinite(c.mean_val_mse);
    }

    GridResult out;
    out.cells = cells;
    const GridCell* best = nullptr;
    for (const auto& c : out.cells) {
        if (!c.valid) continue;
        if (!best || c.mean_val_mse < best->mean_val_mse ||
            (c.mean_val_mse == best->mean_val_mse &&
             (c.lambda > best->lambda ||
              (c.lambda == best->lambda && c.delta < best->delta)))) {
            best = &c;
        }
    }
    require(best != nullptr, "grid search: every cell failed");
    out.best_lambda = best->lambda;
    out.best_delta = best->delta;
    out.best_mse = best->mean_val_mse;
    return out;
}

}  // namespace penn::modelsel
