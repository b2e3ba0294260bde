#include "ccpd/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ccpd {

namespace {

void require_positive_dims(Index i, Index j, Index k) {
    if (i <= 0 || j <= 0 || k <= 0)
        throw std::invalid_argument("Tensor3: dimensions must be positive, got " +
                                    std::to_string(i) + "x" + std::to_string(j) + "x" +
                                    std::to_string(k));
}

void require_finite(const std::vector<double>& data, const char* what) {
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

void require_valid_mode(int mode) {
    if (mode < 1 || mode > 3)
        throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

} // namespace

Tensor3::Tensor3(Index i, Index j, Index k) : dims_{i, j, k} {
    require_positive_dims(i, j, k);
    data_.assign(static_cast<std::size_t>(i * j * k), 0.0);
}

Tensor3::Tensor3(Index i, Index j, Index k, std::vector<double> data)
    : dims_{i, j, k}, data_(std::move(data)) {
    require_positive_dims(i, j, k);
    if (static_cast<Index>(data_.size()) != i * j * k)
        throw std::invalid_argument("Tensor3: data length " + std::to_string(data_.size()) +
                                    " does not match dims " + std::to_string(i * j * k));
    require_finite(data_, "Tensor3");
}

CpModel::CpModel(FactorMatrix a, FactorMatrix b, FactorMatrix c)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
    if (A.cols() != B.cols() || B.cols() != C.cols())
        throw std::invalid_argument("CpModel: factor matrices must share the column count");
}

Eigen::MatrixXd unfold(const Tensor3& t, int mode) {
    require_valid_mode(mode);
    const Index ni = t.dim(0), nj = t.dim(1), nk = t.dim(2);
    const double* raw = t.data().data();
    switch (mode) {
        case 1:
            // The canonical linearization is already the mode-1 unfolding.
            return Eigen::Map<const Eigen::MatrixXd>(raw, ni, nj * nk);
        case 2: {
            Eigen::MatrixXd out(nj, ni * nk);
            for (Index k = 0; k < nk; ++k)
                for (Index j = 0; j < nj; ++j)
                    for (Index i = 0; i < ni; ++i) out(j, i + ni * k) = t(i, j, k);
            return out;
        }
        default:
            return Eigen::Map<const Eigen::MatrixXd>(raw, ni * nj, nk).transpose();
    }
}

Tensor3 fold(const Eigen::MatrixXd& m, int mode, std::array<Index, 3> dims) {
    require_valid_mode(mode);
    const Index ni = dims[0], nj = dims[1], nk = dims[2];
    const std::array<Index, 2> expected =
        mode == 1 ? std::array<Index, 2>{ni, nj * nk}
                  : (mode == 2 ? std::array<Index, 2>{nj, ni * nk}
                               : std::array<Index, 2>{nk, ni * nj});
    if (m.rows() != expected[0] || m.cols() != expected[1])
        throw std::invalid_argument("fold: matrix shape does not match target dims");

    Tensor3 out(ni, nj, nk);
    auto& data = out.data_;
    switch (mode) {
        case 1:
            Eigen::Map<Eigen::MatrixXd>(data.data(), ni, nj * nk) = m;
            break;
        case 2:
            for (Index k = 0; k < nk; ++k)
                for (Index j = 0; j < nj; ++j)
                    for (Index i = 0; i < ni; ++i)
                        data[static_cast<std::size_t>(i + ni * (j + nj * k))] = m(j, i + ni * k);
            break;
        default:
            Eigen::Map<Eigen::MatrixXd>(data.data(), ni * nj, nk) = m.transpose();
            break;
    }
    require_finite(data, "fold");
    return out;
}

Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("khatri_rao: column counts differ (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) +
                                    ")");
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols());
    for (Index r = 0; r < a.cols(); ++r)
        for (Index i = 0; i < a.rows(); ++i)
            out.col(r).segment(i * b.rows(), b.rows()) = a(i, r) * b.col(r);
    return out;
}

Tensor3 cp_reconstruct(const CpModel& m) {
    const Index ni = m.A.rows(), nj = m.B.rows(), nk = m.C.rows();
    // Mode-1 identity: X_(1) = A (C ⊙ B)^T.
    Eigen::MatrixXd x1 = m.A * khatri_rao(m.C, m.B).transpose();
    return fold(x1, 1, {ni, nj, nk});
}

double frobenius_norm_sq(const Tensor3& t) { return t.vec().squaredNorm(); }

Tensor3 mode_multiply(const Tensor3& t, const Eigen::MatrixXd& m, int mode) {
    require_valid_mode(mode);
    if (m.cols() != t.dim(mode - 1))
        throw std::invalid_argument("mode_multiply: matrix columns do not match tensor mode dim");
    std::array<Index, 3> dims = t.dims();
    dims[static_cast<std::size_t>(mode - 1)] = m.rows();
    return fold(m * unfold(t, mode), mode, dims);
}

} // namespace ccpd
