#include "ccpd/compression.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccpd/log.hpp"

namespace ccpd {

namespace {

void fix_column_signs(Eigen::MatrixXd& m) {
    for (Index c = 0; c < m.cols(); ++c) {
        Index imax = 0;
        m.col(c).cwiseAbs().maxCoeff(&imax);
        if (m(imax, c) < 0) m.col(c) = -m.col(c);
    }
}

// Leading d left singular vectors of the horizontal concatenation
// [blocks[0] ... blocks[K-1]] without materializing it: the smaller Gram
// matrix (rows x rows, or cols x cols when the row count dominates) is
// eigendecomposed instead.
Eigen::MatrixXd leading_left_basis(const std::vector<Eigen::MatrixXd>& blocks, Index d,
                                   const char* what) {
    const Index rows = blocks.front().rows();
    Index total_cols = 0;
    for (const auto& b : blocks) total_cols += b.cols();
    if (d > rows)
        throw std::invalid_argument(std::string(what) +
                                    ": target dimension exceeds the mode size");

    Eigen::MatrixXd vectors; // rows x r, descending singular values
    Eigen::VectorXd values;  // squared singular values, descending
    if (rows <= total_cols) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(rows, rows);
        for (const auto& b : blocks) gram.noalias() += b * b.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        vectors = eig.eigenvectors().rowwise().reverse();
        values = eig.eigenvalues().reverse();
    } else {
        Eigen::MatrixXd gram(total_cols, total_cols);
        Index row_off = 0;
        for (const auto& bi : blocks) {
            Index col_off = 0;
            for (const auto& bj : blocks) {
                gram.block(row_off, col_off, bi.cols(), bj.cols()).noalias() =
                    bi.transpose() * bj;
                col_off += bj.cols();
            }
            row_off += bi.cols();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const Eigen::MatrixXd right = eig.eigenvectors().rowwise().reverse();
        values = eig.eigenvalues().reverse();
        vectors.setZero(rows, values.size());
        Index off = 0;
        for (const auto& b : blocks) {
            vectors.noalias() += b * right.middleRows(off, b.cols());
            off += b.cols();
        }
        for (Index c = 0; c < vectors.cols(); ++c) {
            const double sigma = std::sqrt(std::max(values[c], 0.0));
            if (sigma > 0) vectors.col(c) /= sigma;
        }
    }

    const double sigma_max = std::sqrt(std::max(values[0], 0.0));
    const double tol = sigma_max * std::max(rows, total_cols) *
                       std::numeric_limits<double>::epsilon();
    Index rank = 0;
    while (rank < values.size() && rank < d &&
           std::sqrt(std::max(values[rank], 0.0)) > tol)
        ++rank;

    Eigen::MatrixXd basis(rows, d);
    basis.leftCols(rank) = vectors.leftCols(rank);
    if (rank < d) {
        log::warn(std::string(what) + ": requested dimension " + std::to_string(d) +
                  " exceeds numerical rank " + std::to_string(rank) +
                  ", padding with an orthonormal complement");
        // Thin Q of the rank-r basis: trailing columns are an orthonormal
        // complement of its span.
        Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(rows, d);
        seed.leftCols(rank) = vectors.leftCols(rank);
        for (Index c = rank; c < d; ++c) seed((c - rank) % rows, c) = 1.0;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, d);
        basis.rightCols(d - rank) = q.rightCols(d - rank);
    }
    fix_column_signs(basis);
    return basis;
}

} // namespace

void CompressionBasis::validate() const {
    const auto check = [](const Eigen::MatrixXd& u, const char* name) {
        const Eigen::MatrixXd dev =
            u.transpose() * u - Eigen::MatrixXd::Identity(u.cols(), u.cols());
        if (dev.cwiseAbs().maxCoeff() > 1e-10)
            throw std::invalid_argument(std::string("CompressionBasis: ") + name +
                                        " columns are not orthonormal");
    };
    check(subject_basis, "subject basis");
    check(voxel_basis, "voxel basis");
}

CompressionBasis fit_basis(const CoupledDataset& data, Index d1, Index d2) {
    if (d1 < 1 || d1 > data.subjects() || d2 < 1 || d2 > data.voxels())
        throw std::invalid_argument("fit_basis: target dims must be in [1, mode size]");

    std::vector<Eigen::MatrixXd> mode1, mode2;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        mode1.push_back(unfold(data.tensor(k), 1));
        mode2.push_back(unfold(data.tensor(k), 2));
    }
    CompressionBasis basis;
    basis.subject_basis = leading_left_basis(mode1, d1, "fit_basis (subject mode)");
    basis.voxel_basis = leading_left_basis(mode2, d2, "fit_basis (voxel mode)");
    return basis;
}

CoupledDataset compress(const CoupledDataset& data, const CompressionBasis& basis) {
    if (basis.subject_basis.rows() != data.subjects() ||
        basis.voxel_basis.rows() != data.voxels())
        throw std::invalid_argument("compress: basis dims do not match data");
    std::vector<Tensor3> out;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        Tensor3 t = mode_multiply(data.tensor(k), basis.subject_basis.transpose(), 1);
        out.push_back(mode_multiply(t, basis.voxel_basis.transpose(), 2));
    }
    return CoupledDataset(std::move(out));
}

PartitionedFactors expand_factors(const PartitionedFactors& compressed,
                                  const CompressionBasis& basis) {
    compressed.validate();
    if (compressed.subjects() != basis.subject_dim() || compressed.voxels() != basis.voxel_dim())
        throw std::invalid_argument("expand_factors: factor dims do not match basis target dims");

    PartitionedFactors out = compressed;
    out.subject_shared = basis.subject_basis * compressed.subject_shared;
    out.voxel_shared = basis.voxel_basis * compressed.voxel_shared;
    for (std::size_t k = 0; k < compressed.subject_distinct.size(); ++k) {
        out.subject_distinct[k] = basis.subject_basis * compressed.subject_distinct[k];
        out.voxel_distinct[k] = basis.voxel_basis * compressed.voxel_distinct[k];
    }
    return out;
}

} // namespace ccpd
