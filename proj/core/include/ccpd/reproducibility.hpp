#pragma once

#include <vector>

#include "ccpd/solver.hpp"

namespace ccpd {

/// Column-wise normalization (per-component cosine) is the default; the
/// whole-matrix variant divides by Frobenius norms instead, as the similarity
/// expression can also be read.
enum class CosineNormalization { PerColumn, WholeMatrix };

/// Result of matching the components of two solutions.
struct MatchReport {
    // permutations[k][r] = component of run b matched to component r of run a.
    std::vector<std::vector<Index>> permutations;
    // contributions[k][r] = matched |cos S| + |cos V| + |cos T| for component r.
    std::vector<std::vector<double>> contributions;
    double pdistance = 0.0; // -sum of all matched contributions; in [-sum_k 3(R+L_k), 0]
};

/// Pairwise pseudo-distance between two solutions: per dataset, the
/// component-similarity matrix (absolute cosines of subject, voxel and time
/// columns) is matched by an exact linear assignment, and the negated matched
/// total is accumulated. Lower (more negative) means more similar.
MatchReport pdistance(const PartitionedFactors& a, const PartitionedFactors& b,
                      CosineNormalization norm = CosineNormalization::PerColumn);
MatchReport pdistance(const SolveResult& a, const SolveResult& b,
                      CosineNormalization norm = CosineNormalization::PerColumn);

// Largest attainable matched total, sum_k 3 (R + L_k); -pdistance is in
// [0, this].
double pdistance_scale(const Ranks& ranks);

/// The solution set Omega: N runs on the same data and config, differing only
/// by seed.
struct RunSet {
    std::vector<SolveResult> runs;

    Index num_runs() const { return static_cast<Index>(runs.size()); }
    Index num_successful() const;
};

/// Runs bcd_solve with seeds config.seed + 0 ... config.seed + N-1. Runs
/// aborting with non-finite cost are recorded as failed; throws SolverError
/// if every run fails. With jobs > 1 the runs execute concurrently; results
/// are identical to the sequential order.
RunSet multi_start(const CoupledDataset& data, const SolverConfig& config, int num_runs,
                   int jobs = 1);

enum class SelectionAggregation { Sum, Median };

struct SelectionReport {
    Index best_index = 0;
    // pairwise(i, j) = pdistance between runs i and j; NaN if either failed.
    Eigen::MatrixXd pairwise;
    // Aggregated pdistance of each run to all others (NaN for failed runs).
    std::vector<double> scores;
};

/// Picks the run most similar to every other solution in Omega: the argmin of
/// the aggregated pairwise pdistance, ties broken by lower final cost, then
/// lower seed.
SelectionReport select_most_reproducible(const RunSet& runs,
                                         SelectionAggregation aggregation = SelectionAggregation::Sum,
                                         CosineNormalization norm = CosineNormalization::PerColumn);

struct SweepPoint {
    Ranks ranks;
    double lambda = 0.0;
};

struct SweepRow {
    SweepPoint point;
    // Mean pairwise pdistance divided by pdistance_scale(ranks), in [-1, 0];
    // -1 means every pair of runs found identical components.
    double normalized_score = 0.0;
    double mean_final_cost = 0.0;
    int successful_runs = 0;
    bool failed = false; // fewer than two successful runs, or config invalid
    std::string message;
};

/// Reproducibility sweep over rank/lambda configurations: each grid point
/// gets multi_start(n_sweep) and a normalized mean pairwise pdistance so
/// that configurations of different rank are comparable. Rows are sorted
/// best (most negative) first; per-configuration failures are reported, not
/// thrown.
std::vector<SweepRow> rank_sweep(const CoupledDataset& data, const std::vector<SweepPoint>& grid,
                                 const SolverConfig& base_config, int n_sweep, int jobs = 1);

} // namespace ccpd
