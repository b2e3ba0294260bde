#include "ccpd/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ccpd {

std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& sim) {
    using Eigen::Index;
    if (sim.rows() != sim.cols())
        throw std::invalid_argument("solve_assignment: matrix must be square");
    if (!sim.allFinite())
        throw std::invalid_argument("solve_assignment: matrix must be finite");

    const Index n = sim.rows();
    if (n == 0) return {};

    // Shortest augmenting path with dual potentials on the minimization
    // problem; maximization is handled by negating the input. Arrays are
    // 1-based with a virtual row/column 0, as in the classic formulation.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<Index> match(static_cast<std::size_t>(n) + 1, 0); // column -> row
    std::vector<Index> way(static_cast<std::size_t>(n) + 1, 0);

    for (Index i = 1; i <= n; ++i) {
        match[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const Index i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = -sim(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<Index> perm(static_cast<std::size_t>(n), 0);
    for (Index j = 1; j <= n; ++j)
        perm[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return perm;
}

} // namespace ccpd
