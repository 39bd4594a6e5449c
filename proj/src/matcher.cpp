#include "gem/matcher.hpp"

#include <cmath>
#include <limits>

#include "gem/error.hpp"

namespace gem {

Assignment hungarian_match(std::span<const double> cost, int64_t targets, int64_t queries) {
    if (targets > queries) {
        throw DimensionError("matching needs at least as many queries (" + std::to_string(queries) + ") as targets (" +
                             std::to_string(targets) + ")");
    }
    if (static_cast<int64_t>(cost.size()) != targets * queries) {
        throw DimensionError("cost matrix size does not match targets x queries");
    }
    for (const double c : cost) {
        if (!std::isfinite(c)) {
            throw NumericError("matching cost matrix contains non-finite entries");
        }
    }
    Assignment out;
    if (targets == 0) {
        return out;
    }

    // Rows are targets (1-based), columns queries (1-based); column 0 is the virtual start.
    const auto n = targets;
    const auto m = queries;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int64_t> row_of_col(m + 1, 0), way(m + 1, 0);
    auto at = [&](int64_t i, int64_t j) { return cost[(i - 1) * m + (j - 1)]; };

    for (int64_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        int64_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const int64_t i0 = row_of_col[j0];
            double delta = inf;
            int64_t j1 = 0;
            for (int64_t j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = at(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int64_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const int64_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    out.query_for_target.assign(static_cast<size_t>(n), -1);
    for (int64_t j = 1; j <= m; ++j) {
        if (row_of_col[j] != 0) {
            out.query_for_target[row_of_col[j] - 1] = j - 1;
        }
    }
    out.total_cost = assignment_cost(cost, queries, out.query_for_target);
    return out;
}

double assignment_cost(std::span<const double> cost, int64_t queries, const std::vector<int64_t>& query_for_target) {
    double total = 0.0;
    for (size_t t = 0; t < query_for_target.size(); ++t) {
        total += cost[static_cast<int64_t>(t) * queries + query_for_target[t]];
    }
    return total;
}

}  // namespace gem
