#pragma once

#include <cstdint>
#include <vector>

#include "ccpd/tensor.hpp"

namespace ccpd {

/// K task datasets Y_k of shape (subjects, voxels, T_k). All tensors share
/// the first two dimensions; the third may differ per dataset.
class CoupledDataset {
public:
    explicit CoupledDataset(std::vector<Tensor3> tensors);

    Index num_datasets() const { return static_cast<Index>(tensors_.size()); }
    Index subjects() const { return tensors_.front().dim(0); }
    Index voxels() const { return tensors_.front().dim(1); }
    Index times(Index k) const { return tensors_[static_cast<std::size_t>(k)].dim(2); }
    std::vector<Index> times() const;

    const Tensor3& tensor(Index k) const { return tensors_[static_cast<std::size_t>(k)]; }
    const std::vector<Tensor3>& tensors() const { return tensors_; }

private:
    std::vector<Tensor3> tensors_;
};

/// Shared rank R plus one distinct rank L_k per dataset. R + L_k >= 1 for
/// every k; R = 0 (independent CPDs) and L_k = 0 (fully coupled) are valid.
struct Ranks {
    int shared = 0;
    std::vector<int> distinct;

    Ranks() = default;
    Ranks(int r, std::vector<int> l);

    Index num_datasets() const { return static_cast<Index>(distinct.size()); }
    int total(Index k) const { return shared + distinct[static_cast<std::size_t>(k)]; }

    bool operator==(const Ranks&) const = default;
};

/// Factors of one dataset after concatenating shared and distinct blocks.
struct AssembledFactors {
    FactorMatrix subject; // [S^p, S_k^d], (subjects) x (R + L_k)
    FactorMatrix voxel;   // [V^p, V_k^d], (voxels) x (R + L_k)
    FactorMatrix time;    // [T_k^p, T_k^d], (T_k) x (R + L_k)
};

/// The full parameter set: shared subject/voxel blocks, per-dataset distinct
/// blocks, and per-dataset time factors for both parts. The shared blocks are
/// stored once, so the coupling constraint (identical first R columns across
/// datasets) holds by construction.
struct PartitionedFactors {
    FactorMatrix subject_shared;                // subjects x R
    FactorMatrix voxel_shared;                  // voxels x R
    std::vector<FactorMatrix> subject_distinct; // subjects x L_k
    std::vector<FactorMatrix> voxel_distinct;   // voxels x L_k
    std::vector<FactorMatrix> time_shared;      // T_k x R
    std::vector<FactorMatrix> time_distinct;    // T_k x L_k

    Index num_datasets() const { return static_cast<Index>(time_shared.size()); }
    Index subjects() const { return subject_shared.rows(); }
    Index voxels() const { return voxel_shared.rows(); }
    Ranks ranks() const;

    AssembledFactors assemble(Index k) const;

    // Throws std::invalid_argument if internal dimensions are inconsistent or
    // do not match the dataset.
    void validate() const;
    void validate_against(const CoupledDataset& data) const;
};

struct QuasiNewtonOptions {
    int memory = 10;
    int max_inner = 30;
    double grad_tol = 1e-10;
    double sufficient_decrease = 1e-4;
    double backtrack_factor = 0.5;
    int max_halvings = 50;
};

/// How bcd_solve minimizes over the voxel blocks. The subproblem is quartic
/// for lambda > 0 (quasi-Newton), but reduces to a coupled least-squares
/// problem at lambda = 0 where the exact solve is available.
enum class VoxelUpdate {
    Auto,        // exact least squares when lambda == 0, quasi-Newton otherwise
    QuasiNewton, // always quasi-Newton
    ExactLs      // exact least squares (only valid with lambda == 0)
};

struct SolverConfig {
    Ranks ranks;
    double lambda = 0.0;
    int max_iters = 500;
    double rel_tol = 1e-8;
    QuasiNewtonOptions qn;
    VoxelUpdate voxel_update = VoxelUpdate::Auto;
    std::uint64_t seed = 0;

    void validate() const;
};

/// J(Theta) = sum_k ||Y_k - [[S_k, V_k, T_k]]||_F^2 + lambda ||V_k^T V_k - I||_F^2,
/// with the penalty evaluated on the assembled V_k (the shared block is
/// penalized once per dataset).
double cost(const PartitionedFactors& theta, const CoupledDataset& data, double lambda);

// Fit and penalty parts separately; cost() = fit + lambda * penalty.
struct CostBreakdown {
    double fit = 0.0;
    double penalty = 0.0;
    double total(double lambda) const { return fit + lambda * penalty; }
};
CostBreakdown cost_breakdown(const PartitionedFactors& theta, const CoupledDataset& data);

enum class IdentifiabilityStatus { Pass, Fail, NotApplicable };

struct IdentifiabilityReport {
    struct Entry {
        IdentifiabilityStatus status = IdentifiabilityStatus::NotApplicable;
        double bound = 0.0; // (T_k + 1)(S + 1)/16
        int total_rank = 0; // R + L_k
    };
    std::vector<Entry> per_dataset;

    bool all_pass() const;
};

/// Generic-uniqueness check: pass_k iff R + L_k <= (T_k + 1)(S + 1)/16.
/// The bound assumes T_k <= S <= V; datasets outside that regime are
/// reported NotApplicable.
IdentifiabilityReport identifiability_check(Index subjects, Index voxels,
                                            const std::vector<Index>& times, const Ranks& ranks);

// Y_k - [[S_k, V_k, T_k]] for each k.
std::vector<Tensor3> residual_tensors(const PartitionedFactors& theta, const CoupledDataset& data);

// Reconstruction of the partially shared part P_k = [[S^p, V^p, T_k^p]].
Tensor3 shared_reconstruction(const PartitionedFactors& theta, Index k);

// Reconstruction of the distinct part D_k = [[S_k^d, V_k^d, T_k^d]].
Tensor3 distinct_reconstruction(const PartitionedFactors& theta, Index k);

} // namespace ccpd
