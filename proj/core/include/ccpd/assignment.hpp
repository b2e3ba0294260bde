#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ccpd {

/// Exact linear assignment: returns the permutation sigma maximizing
/// sum_r sim(r, sigma[r]) over all permutations, via the O(n^3) shortest
/// augmenting path (Hungarian family) algorithm. Requires a square matrix
/// with finite entries.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& sim);

} // namespace ccpd
