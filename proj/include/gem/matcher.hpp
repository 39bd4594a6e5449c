#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gem {

struct Assignment {
    /// query_for_target[t] = index of the query matched to target t.
    std::vector<int64_t> query_for_target;
    double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of `targets` rows onto `queries` columns of a
/// row-major cost matrix (targets <= queries). Shortest augmenting path with potentials,
/// O(T^2 N). Throws NumericError on non-finite costs, DimensionError when T > N.
Assignment hungarian_match(std::span<const double> cost, int64_t targets, int64_t queries);

/// Sum of cost[t][query_for_target[t]] in target order.
double assignment_cost(std::span<const double> cost, int64_t queries, const std::vector<int64_t>& query_for_target);

}  // namespace gem
