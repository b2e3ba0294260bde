#pragma once

#include "ccpd/coupled.hpp"

namespace ccpd {

/// Orthonormal subject/voxel bases used to shrink the first two modes before
/// solving. One shared basis per mode across all K datasets: the shared
/// factors S^p, V^p must live in a single compressed space.
struct CompressionBasis {
    Eigen::MatrixXd subject_basis; // subjects x d1, orthonormal columns
    Eigen::MatrixXd voxel_basis;   // voxels x d2, orthonormal columns

    Index subject_dim() const { return subject_basis.cols(); }
    Index voxel_dim() const { return voxel_basis.cols(); }

    // Throws unless both bases have orthonormal columns (within 1e-10).
    void validate() const;
};

/// Fits the bases from the leading left singular vectors of the column-wise
/// concatenation of all mode-1 (subject) and mode-2 (voxel) unfoldings.
/// If d exceeds the numerical rank, the basis is padded with an orthonormal
/// complement and a warning is logged. Column signs follow a deterministic
/// convention (largest-magnitude entry positive).
CompressionBasis fit_basis(const CoupledDataset& data, Index d1, Index d2);

/// Y_k x_1 U_subject^T x_2 U_voxel^T for each dataset.
CoupledDataset compress(const CoupledDataset& data, const CompressionBasis& basis);

/// Maps factors solved in compressed space back to the original spaces:
/// subject blocks are left-multiplied by U_subject, voxel blocks by U_voxel,
/// time factors are unchanged. The shared/distinct partitioning is preserved.
PartitionedFactors expand_factors(const PartitionedFactors& compressed,
                                  const CompressionBasis& basis);

} // namespace ccpd
