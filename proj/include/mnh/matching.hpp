#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "errors.hpp"

namespace mnh {

/// Minimum-cost perfect assignment (Hungarian algorithm, O(n^3)). cost is row-major n x n.
/// Returns assignment[row] = column.
inline std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assignment[p[j] - 1] = j - 1;
    return assignment;
}

/// Largest pairwise distance between two eigenvalue multisets under the optimal pairing.
inline double multiset_distance(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b) {
    if (a.size() != b.size()) throw ArgumentError("multiset_distance: sizes differ");
    const int n = static_cast<int>(a.size());
    if (n == 0) return 0.0;
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[i * n + j] = std::abs(a[i] - b[j]);
    const auto asg = min_cost_assignment(cost, n);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, cost[i * n + asg[i]]);
    return worst;
}

}  // namespace mnh
