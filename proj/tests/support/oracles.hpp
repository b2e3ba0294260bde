#pragma once

// Independent brute-force oracles used to pin down expected values. These
// deliberately avoid the library's kernels (explicit index arithmetic and
// loops only) so that a bug in the implementation cannot hide in the test.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ccpd/analysis.hpp"
#include "ccpd/coupled.hpp"
#include "ccpd/rng.hpp"
#include "ccpd/tensor.hpp"

namespace oracle {

using ccpd::Index;

// Mode-n unfolding by writing each element to its unfolded position.
inline Eigen::MatrixXd unfold(const ccpd::Tensor3& t, int mode) {
    const Index ni = t.dim(0), nj = t.dim(1), nk = t.dim(2);
    Eigen::MatrixXd out;
    if (mode == 1)
        out.setZero(ni, nj * nk);
    else if (mode == 2)
        out.setZero(nj, ni * nk);
    else
        out.setZero(nk, ni * nj);
    for (Index i = 0; i < ni; ++i)
        for (Index j = 0; j < nj; ++j)
            for (Index k = 0; k < nk; ++k) {
                if (mode == 1)
                    out(i, j + nj * k) = t(i, j, k);
                else if (mode == 2)
                    out(j, i + ni * k) = t(i, j, k);
                else
                    out(k, i + ni * j) = t(i, j, k);
            }
    return out;
}

// Elementwise Khatri-Rao: entry (j + B.rows * i, r) = A(i,r) * B(j,r).
inline Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols());
    for (Index r = 0; r < a.cols(); ++r)
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < b.rows(); ++j) out(j + b.rows() * i, r) = a(i, r) * b(j, r);
    return out;
}

// Triple-loop CP reconstruction.
inline ccpd::Tensor3 cp_reconstruct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const Eigen::MatrixXd& c) {
    const Index ni = a.rows(), nj = b.rows(), nk = c.rows();
    std::vector<double> data(static_cast<std::size_t>(ni * nj * nk), 0.0);
    for (Index i = 0; i < ni; ++i)
        for (Index j = 0; j < nj; ++j)
            for (Index k = 0; k < nk; ++k) {
                double sum = 0.0;
                for (Index r = 0; r < a.cols(); ++r) sum += a(i, r) * b(j, r) * c(k, r);
                data[static_cast<std::size_t>(i + ni * (j + nj * k))] = sum;
            }
    return ccpd::Tensor3(ni, nj, nk, std::move(data));
}

// Direct-summation cost: squared residual entries plus the coherence penalty,
// all via explicit loops on assembled factors.
inline double cost(const ccpd::PartitionedFactors& theta, const ccpd::CoupledDataset& data,
                   double lambda) {
    double total = 0.0;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const ccpd::AssembledFactors f = theta.assemble(k);
        const ccpd::Tensor3 model = cp_reconstruct(f.subject, f.voxel, f.time);
        const ccpd::Tensor3& y = data.tensor(k);
        for (Index i = 0; i < y.dim(0); ++i)
            for (Index j = 0; j < y.dim(1); ++j)
                for (Index t = 0; t < y.dim(2); ++t) {
                    const double d = y(i, j, t) - model(i, j, t);
                    total += d * d;
                }
        const Index r = f.voxel.cols();
        for (Index p = 0; p < r; ++p)
            for (Index q = 0; q < r; ++q) {
                double dot = 0.0;
                for (Index vrow = 0; vrow < f.voxel.rows(); ++vrow)
                    dot += f.voxel(vrow, p) * f.voxel(vrow, q);
                const double dev = dot - (p == q ? 1.0 : 0.0);
                total += lambda * dev * dev;
            }
    }
    return total;
}

// Exhaustive assignment: the permutation maximizing the matched total.
struct BruteAssignment {
    std::vector<Index> perm;
    double value = 0.0;
};
inline BruteAssignment brute_force_assignment(const Eigen::MatrixXd& sim) {
    const Index n = sim.rows();
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    BruteAssignment best;
    best.value = -std::numeric_limits<double>::infinity();
    do {
        double v = 0.0;
        for (Index r = 0; r < n; ++r) v += sim(r, idx[static_cast<std::size_t>(r)]);
        if (v > best.value) {
            best.value = v;
            best.perm = idx;
        }
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

// Welch t statistic, written out longhand.
inline double welch_t(const std::vector<double>& x, const std::vector<double>& y) {
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const auto var = [&](const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double e : v) s += (e - m) * (e - m);
        return s / static_cast<double>(v.size() - 1);
    };
    const double mx = mean(x), my = mean(y);
    const double vx = var(x, mx), vy = var(y, my);
    return (mx - my) / std::sqrt(vx / static_cast<double>(x.size()) +
                                 vy / static_cast<double>(y.size()));
}

// Two-sided permutation test on the Welch statistic.
inline double permutation_test_p(const std::vector<double>& column,
                                 const std::vector<int>& labels, int resamples,
                                 std::uint64_t seed) {
    std::vector<double> g0, g1;
    for (std::size_t i = 0; i < column.size(); ++i)
        (labels[i] == 0 ? g0 : g1).push_back(column[i]);
    const double observed = std::abs(welch_t(g0, g1));

    ccpd::Rng rng(seed);
    std::vector<int> shuffled = labels;
    int at_least = 0;
    for (int p = 0; p < resamples; ++p) {
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.below(i));
            std::swap(shuffled[i - 1], shuffled[j]);
        }
        std::vector<double> h0, h1;
        for (std::size_t i = 0; i < column.size(); ++i)
            (shuffled[i] == 0 ? h0 : h1).push_back(column[i]);
        if (std::abs(welch_t(h0, h1)) >= observed) ++at_least;
    }
    return (1.0 + at_least) / (1.0 + resamples);
}

// Central finite differences of a scalar function of a flat vector.
template <typename F>
Eigen::VectorXd central_difference_gradient(const F& f, const Eigen::VectorXd& x, double step) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double fp = f(probe);
        probe[i] = x[i] - step;
        const double fm = f(probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

inline double measured_snr_db(const ccpd::Tensor3& clean, const ccpd::Tensor3& noisy) {
    double signal = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < clean.data().size(); ++i) {
        signal += clean.data()[i] * clean.data()[i];
        const double d = noisy.data()[i] - clean.data()[i];
        noise += d * d;
    }
    return 10.0 * std::log10(signal / noise);
}

} // namespace oracle
