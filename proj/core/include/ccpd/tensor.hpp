#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace ccpd {

using Index = Eigen::Index;

// A factor matrix holds one component per column; column-major as in Eigen.
using FactorMatrix = Eigen::MatrixXd;

/// Dense order-3 tensor of doubles.
///
/// Element (i, j, k) lives at offset i + I*j + I*J*k (first index fastest).
/// This is also the byte order of the CT3 file format, so files written on
/// one machine map directly onto the in-memory layout on another.
/// Constructors reject non-finite entries; instances are immutable through
/// the public API and safe to share across threads.
class Tensor3 {
public:
    Tensor3() = default;

    // Zero tensor of the given shape.
    Tensor3(Index i, Index j, Index k);

    // Takes ownership of `data`, which must have length i*j*k and hold only
    // finite values in the canonical linearization.
    Tensor3(Index i, Index j, Index k, std::vector<double> data);

    Index dim(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    std::array<Index, 3> dims() const { return dims_; }
    Index size() const { return static_cast<Index>(data_.size()); }

    double operator()(Index i, Index j, Index k) const {
        return data_[static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k))];
    }

    const std::vector<double>& data() const { return data_; }

    // Flat view of the buffer as a column vector.
    Eigen::Map<const Eigen::VectorXd> vec() const {
        return {data_.data(), static_cast<Index>(data_.size())};
    }

private:
    std::array<Index, 3> dims_{0, 0, 0};
    std::vector<double> data_;

    friend Tensor3 fold(const Eigen::MatrixXd&, int, std::array<Index, 3>);
};

/// CP model ⟦A, B, C⟧: three factor matrices with a common column count.
struct CpModel {
    FactorMatrix A, B, C;

    CpModel(FactorMatrix a, FactorMatrix b, FactorMatrix c);

    Index rank() const { return A.cols(); }
};

// Mode-n unfolding, mode in {1,2,3}. The column ordering is such that
// unfold(cp_reconstruct({A,B,C}), 1) == A * khatri_rao(C, B)^T,
// i.e. the mode-1 unfolding puts element (i,j,k) in column j + J*k, the
// mode-2 unfolding in column i + I*k, and the mode-3 unfolding in column
// i + I*j.
Eigen::MatrixXd unfold(const Tensor3& t, int mode);

// Inverse of unfold for the given mode and original shape.
Tensor3 fold(const Eigen::MatrixXd& m, int mode, std::array<Index, 3> dims);

// Column-wise Kronecker product: column r of the result is a_r ⊗ b_r, with
// (A ⊙ B)[j + B.rows*i, r] = A(i,r) * B(j,r). Throws on column-count mismatch.
Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Dense reconstruction: element (i,j,k) = sum_r A(i,r) B(j,r) C(k,r).
Tensor3 cp_reconstruct(const CpModel& m);

// Sum of squared entries.
double frobenius_norm_sq(const Tensor3& t);

// Tensor-times-matrix along the given mode: fold(m * unfold(t, mode), ...).
// The mode-n dimension becomes m.rows(); m.cols() must match the current one.
Tensor3 mode_multiply(const Tensor3& t, const Eigen::MatrixXd& m, int mode);

} // namespace ccpd
