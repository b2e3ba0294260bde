#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ccpd/coupled.hpp"

namespace ccpd {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveResult {
    PartitionedFactors theta;
    std::vector<double> cost_trace; // J at init, then after each outer iteration
    int iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;

    // Set by multi_start when a run aborts (non-finite cost); failed runs
    // carry no usable theta and are excluded from selection.
    bool failed = false;
    std::string error;

    double final_cost() const { return cost_trace.back(); }
};

/// Random initialization: every factor entry i.i.d. standard normal from a
/// deterministic generator seeded by `seed`, then every column scaled to
/// unit Euclidean norm.
PartitionedFactors init_random(Index subjects, Index voxels, const std::vector<Index>& times,
                               const Ranks& ranks, std::uint64_t seed);

/// Exact joint least-squares update of (S^p, {S_k^d}) with V and T fixed.
/// One block normal system of size R + sum L_k is shared by all subject rows.
void update_subjects(PartitionedFactors& theta, const CoupledDataset& data);

/// Exact per-dataset least-squares update of {T_k} with S and V fixed.
void update_times(PartitionedFactors& theta, const CoupledDataset& data);

struct VoxelUpdateReport {
    int inner_iterations = 0;
    bool stalled = false; // line search failed before any progress; input unchanged
};

/// Limited-memory quasi-Newton (L-BFGS with Armijo backtracking) descent on
/// the joint voxel variable (V^p, {V_k^d}) with S and T fixed. Never
/// increases J; on line-search failure before the first accepted step the
/// input is returned unchanged with `stalled` set.
VoxelUpdateReport update_voxels(PartitionedFactors& theta, const CoupledDataset& data,
                                double lambda, const QuasiNewtonOptions& options);

/// Exact joint least-squares update of (V^p, {V_k^d}); only valid for the
/// lambda == 0 cost, where the voxel subproblem is quadratic.
void update_voxels_exact(PartitionedFactors& theta, const CoupledDataset& data);

/// Gradient of J with respect to the joint voxel variable, flattened
/// column-major as (V^p, V_1^d, ..., V_K^d). Per dataset the gradient of the
/// assembled V_k is -2 (Y_k(2) - V_k W_k^T) W_k + 4 lambda V_k (V_k^T V_k - I)
/// with W_k = T_k (KR) S_k; shared columns accumulate over k.
Eigen::VectorXd voxel_gradient(const PartitionedFactors& theta, const CoupledDataset& data,
                               double lambda);

/// Block coordinate descent on J(Theta): repeats subject, voxel, time updates
/// in that order until the relative cost change drops below rel_tol or
/// max_iters is reached. Throws SolverError if the cost turns non-finite.
SolveResult bcd_solve(const CoupledDataset& data, const SolverConfig& config);

} // namespace ccpd
