#include "ccpd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <utility>

#include "ccpd/log.hpp"
#include "ccpd/rng.hpp"

namespace ccpd {

namespace {

void fill_normal(FactorMatrix& m, Rng& rng) {
    for (Index c = 0; c < m.cols(); ++c)
        for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal();
}

void normalize_columns(FactorMatrix& m) {
    for (Index c = 0; c < m.cols(); ++c) {
        const double n = m.col(c).norm();
        if (n > 0) m.col(c) /= n;
    }
}

// Solves G X^T = B^T for X (rows x n) with an LDLT factorization; nearly
// singular systems get a ridge of 1e-10 * trace/n and a warning.
Eigen::MatrixXd solve_normal_equations(Eigen::MatrixXd gram, const Eigen::MatrixXd& rhs) {
    const Index n = gram.rows();
    if (n == 0) return Eigen::MatrixXd(rhs.rows(), 0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
        const double scale = std::max(gram.trace() / static_cast<double>(n), 1e-290);
        gram.diagonal().array() += 1e-10 * scale;
        ldlt.compute(gram);
        log::warn("normal equations nearly singular, applied ridge " +
                  std::to_string(1e-10 * scale));
    }
    return ldlt.solve(rhs.transpose()).transpose();
}

// Joint least squares over X = [X^p, X_1^d, ..., X_K^d]:
//   min sum_k || U_k - [X^p, X_k^d] W_k^T ||_F^2
// given grams[k] = W_k^T W_k and rhs[k] = U_k W_k. Every row of X sees the
// same block normal matrix, so one factorization serves all rows.
Eigen::MatrixXd solve_coupled_ls(int shared_rank, const std::vector<int>& distinct_ranks,
                                 const std::vector<Eigen::MatrixXd>& grams,
                                 const std::vector<Eigen::MatrixXd>& rhs, Index rows) {
    const int r = shared_rank;
    int total = r;
    for (int l : distinct_ranks) total += l;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(total, total);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(rows, total);
    int offset = r;
    for (std::size_t k = 0; k < grams.size(); ++k) {
        const int l = distinct_ranks[k];
        gram.topLeftCorner(r, r) += grams[k].topLeftCorner(r, r);
        gram.block(0, offset, r, l) = grams[k].topRightCorner(r, l);
        gram.block(offset, 0, l, r) = grams[k].bottomLeftCorner(l, r);
        gram.block(offset, offset, l, l) = grams[k].bottomRightCorner(l, l);
        b.leftCols(r) += rhs[k].leftCols(r);
        b.middleCols(offset, l) = rhs[k].rightCols(l);
        offset += l;
    }
    return solve_normal_equations(std::move(gram), b);
}

// Fixed-factor data for the voxel subproblem: everything that does not move
// during the inner quasi-Newton iterations.
struct VoxelSubproblem {
    Index voxels = 0;
    int shared_rank = 0;
    std::vector<int> distinct_ranks;
    double lambda = 0.0;
    std::vector<Eigen::MatrixXd> gram; // W_k^T W_k with W_k = T_k (KR) S_k
    std::vector<Eigen::MatrixXd> y2w;  // Y_k(2) W_k
    std::vector<double> ynorm2;

    Index flat_size() const {
        Index n = voxels * shared_rank;
        for (int l : distinct_ranks) n += voxels * l;
        return n;
    }

    static VoxelSubproblem build(const PartitionedFactors& theta, const CoupledDataset& data,
                                 double lambda) {
        VoxelSubproblem p;
        p.voxels = data.voxels();
        p.shared_rank = static_cast<int>(theta.subject_shared.cols());
        p.lambda = lambda;
        for (Index k = 0; k < data.num_datasets(); ++k) {
            const auto u = static_cast<std::size_t>(k);
            p.distinct_ranks.push_back(static_cast<int>(theta.subject_distinct[u].cols()));
            const AssembledFactors f = theta.assemble(k);
            const Eigen::MatrixXd w = khatri_rao(f.time, f.subject);
            p.gram.push_back((f.time.transpose() * f.time)
                                 .cwiseProduct(f.subject.transpose() * f.subject));
            p.y2w.push_back(unfold(data.tensor(k), 2) * w);
            p.ynorm2.push_back(frobenius_norm_sq(data.tensor(k)));
        }
        return p;
    }

    Eigen::VectorXd pack(const PartitionedFactors& theta) const {
        Eigen::VectorXd x(flat_size());
        Index off = voxels * shared_rank;
        Eigen::Map<Eigen::MatrixXd>(x.data(), voxels, shared_rank) = theta.voxel_shared;
        for (std::size_t k = 0; k < distinct_ranks.size(); ++k) {
            const Index n = voxels * distinct_ranks[k];
            Eigen::Map<Eigen::MatrixXd>(x.data() + off, voxels, distinct_ranks[k]) =
                theta.voxel_distinct[k];
            off += n;
        }
        return x;
    }

    void unpack(const Eigen::VectorXd& x, PartitionedFactors& theta) const {
        Index off = voxels * shared_rank;
        theta.voxel_shared = Eigen::Map<const Eigen::MatrixXd>(x.data(), voxels, shared_rank);
        for (std::size_t k = 0; k < distinct_ranks.size(); ++k) {
            const Index n = voxels * distinct_ranks[k];
            theta.voxel_distinct[k] =
                Eigen::Map<const Eigen::MatrixXd>(x.data() + off, voxels, distinct_ranks[k]);
            off += n;
        }
    }

    Eigen::MatrixXd assemble(const Eigen::VectorXd& x, std::size_t k) const {
        const int l = distinct_ranks[k];
        Eigen::MatrixXd v(voxels, shared_rank + l);
        v.leftCols(shared_rank) =
            Eigen::Map<const Eigen::MatrixXd>(x.data(), voxels, shared_rank);
        Index off = voxels * shared_rank;
        for (std::size_t i = 0; i < k; ++i) off += voxels * distinct_ranks[i];
        v.rightCols(l) = Eigen::Map<const Eigen::MatrixXd>(x.data() + off, voxels, l);
        return v;
    }

    double value(const Eigen::VectorXd& x) const {
        double f = 0.0;
        for (std::size_t k = 0; k < distinct_ranks.size(); ++k) {
            const Eigen::MatrixXd v = assemble(x, k);
            const Eigen::MatrixXd vtv = v.transpose() * v;
            f += ynorm2[k] - 2.0 * v.cwiseProduct(y2w[k]).sum() +
                 vtv.cwiseProduct(gram[k]).sum();
            if (lambda != 0.0) {
                const Index r = vtv.rows();
                f += lambda * (vtv - Eigen::MatrixXd::Identity(r, r)).squaredNorm();
            }
        }
        return f;
    }

    double value_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
        grad.setZero(flat_size());
        double f = 0.0;
        Index off = voxels * shared_rank;
        auto grad_shared = Eigen::Map<Eigen::MatrixXd>(grad.data(), voxels, shared_rank);
        for (std::size_t k = 0; k < distinct_ranks.size(); ++k) {
            const int l = distinct_ranks[k];
            const Eigen::MatrixXd v = assemble(x, k);
            const Eigen::MatrixXd vtv = v.transpose() * v;
            f += ynorm2[k] - 2.0 * v.cwiseProduct(y2w[k]).sum() +
                 vtv.cwiseProduct(gram[k]).sum();
            Eigen::MatrixXd g = -2.0 * (y2w[k] - v * gram[k]);
            if (lambda != 0.0) {
                const Index r = vtv.rows();
                const Eigen::MatrixXd dev = vtv - Eigen::MatrixXd::Identity(r, r);
                f += lambda * dev.squaredNorm();
                g.noalias() += 4.0 * lambda * v * dev;
            }
            grad_shared += g.leftCols(shared_rank);
            Eigen::Map<Eigen::MatrixXd>(grad.data() + off, voxels, l) += g.rightCols(l);
            off += voxels * static_cast<Index>(l);
        }
        return f;
    }
};

Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& grad,
                                const std::deque<Eigen::VectorXd>& s_hist,
                                const std::deque<Eigen::VectorXd>& y_hist) {
    Eigen::VectorXd q = grad;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
        rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
        alpha[i] = rho[i] * s_hist[i].dot(q);
        q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
        const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        q *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double beta = rho[i] * y_hist[i].dot(q);
        q += (alpha[i] - beta) * s_hist[i];
    }
    return -q;
}

} // namespace

PartitionedFactors init_random(Index subjects, Index voxels, const std::vector<Index>& times,
                               const Ranks& ranks, std::uint64_t seed) {
    if (static_cast<Index>(times.size()) != ranks.num_datasets())
        throw std::invalid_argument("init_random: times/ranks length mismatch");
    Rng rng(seed);
    PartitionedFactors theta;
    theta.subject_shared.resize(subjects, ranks.shared);
    theta.voxel_shared.resize(voxels, ranks.shared);
    fill_normal(theta.subject_shared, rng);
    fill_normal(theta.voxel_shared, rng);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const int l = ranks.distinct[k];
        const Index t = times[k];
        FactorMatrix sd(subjects, l), vd(voxels, l), tp(t, ranks.shared), td(t, l);
        fill_normal(sd, rng);
        fill_normal(vd, rng);
        fill_normal(tp, rng);
        fill_normal(td, rng);
        theta.subject_distinct.push_back(std::move(sd));
        theta.voxel_distinct.push_back(std::move(vd));
        theta.time_shared.push_back(std::move(tp));
        theta.time_distinct.push_back(std::move(td));
    }
    normalize_columns(theta.subject_shared);
    normalize_columns(theta.voxel_shared);
    for (auto& m : theta.subject_distinct) normalize_columns(m);
    for (auto& m : theta.voxel_distinct) normalize_columns(m);
    for (auto& m : theta.time_shared) normalize_columns(m);
    for (auto& m : theta.time_distinct) normalize_columns(m);
    return theta;
}

void update_subjects(PartitionedFactors& theta, const CoupledDataset& data) {
    theta.validate_against(data);
    const int r = static_cast<int>(theta.subject_shared.cols());
    std::vector<int> distinct;
    std::vector<Eigen::MatrixXd> grams, rhs;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        distinct.push_back(static_cast<int>(theta.subject_distinct[u].cols()));
        const AssembledFactors f = theta.assemble(k);
        const Eigen::MatrixXd w = khatri_rao(f.time, f.voxel);
        grams.push_back(
            (f.time.transpose() * f.time).cwiseProduct(f.voxel.transpose() * f.voxel));
        rhs.push_back(unfold(data.tensor(k), 1) * w);
    }
    const Eigen::MatrixXd x = solve_coupled_ls(r, distinct, grams, rhs, data.subjects());
    theta.subject_shared = x.leftCols(r);
    int offset = r;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        theta.subject_distinct[u] = x.middleCols(offset, distinct[u]);
        offset += distinct[u];
    }
}

void update_times(PartitionedFactors& theta, const CoupledDataset& data) {
    theta.validate_against(data);
    const int r = static_cast<int>(theta.subject_shared.cols());
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        const AssembledFactors f = theta.assemble(k);
        const Eigen::MatrixXd w = khatri_rao(f.voxel, f.subject);
        Eigen::MatrixXd gram =
            (f.voxel.transpose() * f.voxel).cwiseProduct(f.subject.transpose() * f.subject);
        const Eigen::MatrixXd t =
            solve_normal_equations(std::move(gram), unfold(data.tensor(k), 3) * w);
        theta.time_shared[u] = t.leftCols(r);
        theta.time_distinct[u] = t.rightCols(t.cols() - r);
    }
}

void update_voxels_exact(PartitionedFactors& theta, const CoupledDataset& data) {
    theta.validate_against(data);
    const int r = static_cast<int>(theta.voxel_shared.cols());
    std::vector<int> distinct;
    std::vector<Eigen::MatrixXd> grams, rhs;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        distinct.push_back(static_cast<int>(theta.voxel_distinct[u].cols()));
        const AssembledFactors f = theta.assemble(k);
        const Eigen::MatrixXd w = khatri_rao(f.time, f.subject);
        grams.push_back(
            (f.time.transpose() * f.time).cwiseProduct(f.subject.transpose() * f.subject));
        rhs.push_back(unfold(data.tensor(k), 2) * w);
    }
    const Eigen::MatrixXd x = solve_coupled_ls(r, distinct, grams, rhs, data.voxels());
    theta.voxel_shared = x.leftCols(r);
    int offset = r;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        theta.voxel_distinct[u] = x.middleCols(offset, distinct[u]);
        offset += distinct[u];
    }
}

Eigen::VectorXd voxel_gradient(const PartitionedFactors& theta, const CoupledDataset& data,
                               double lambda) {
    theta.validate_against(data);
    const VoxelSubproblem problem = VoxelSubproblem::build(theta, data, lambda);
    Eigen::VectorXd grad(problem.flat_size());
    problem.value_and_grad(problem.pack(theta), grad);
    return grad;
}

VoxelUpdateReport update_voxels(PartitionedFactors& theta, const CoupledDataset& data,
                                double lambda, const QuasiNewtonOptions& options) {
    theta.validate_against(data);
    if (lambda < 0) throw std::invalid_argument("update_voxels: lambda must be >= 0");

    const VoxelSubproblem problem = VoxelSubproblem::build(theta, data, lambda);
    Eigen::VectorXd x = problem.pack(theta);
    Eigen::VectorXd grad(x.size());
    double f = problem.value_and_grad(x, grad);

    VoxelUpdateReport report;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    const auto stationary = [&](const Eigen::VectorXd& g) {
        return g.lpNorm<Eigen::Infinity>() <=
               options.grad_tol * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    };
    if (stationary(grad)) return report;

    bool progressed = false;
    for (int iter = 0; iter < options.max_inner; ++iter) {
        Eigen::VectorXd dir = lbfgs_direction(grad, s_hist, y_hist);
        double slope = grad.dot(dir);
        if (!(slope < 0)) {
            dir = -grad;
            slope = grad.dot(dir);
        }

        double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(grad.norm(), 1.0)) : 1.0;
        bool accepted = false;
        double f_new = f;
        Eigen::VectorXd x_new;
        for (int h = 0; h <= options.max_halvings; ++h) {
            x_new = x + step * dir;
            f_new = problem.value(x_new);
            if (std::isfinite(f_new) && f_new <= f + options.sufficient_decrease * step * slope) {
                accepted = true;
                break;
            }
            step *= options.backtrack_factor;
        }
        if (!accepted) {
            if (!progressed) {
                report.stalled = true;
                log::warn("voxel update: line search stalled before any progress");
                return report;
            }
            break;
        }

        Eigen::VectorXd grad_new(x.size());
        problem.value_and_grad(x_new, grad_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = grad_new - grad;
        if (y.dot(s) > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            if (static_cast<int>(s_hist.size()) > options.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        x = std::move(x_new);
        f = f_new;
        grad = std::move(grad_new);
        progressed = true;
        ++report.inner_iterations;
        if (stationary(grad)) break;
    }

    if (progressed) problem.unpack(x, theta);
    return report;
}

SolveResult bcd_solve(const CoupledDataset& data, const SolverConfig& config) {
    config.validate();
    if (config.ranks.num_datasets() != data.num_datasets())
        throw std::invalid_argument("bcd_solve: ranks cover " +
                                    std::to_string(config.ranks.num_datasets()) +
                                    " datasets, data has " + std::to_string(data.num_datasets()));

    const auto ident =
        identifiability_check(data.subjects(), data.voxels(), data.times(), config.ranks);
    for (Index k = 0; k < static_cast<Index>(ident.per_dataset.size()); ++k) {
        const auto& e = ident.per_dataset[static_cast<std::size_t>(k)];
        if (e.status == IdentifiabilityStatus::Fail)
            log::info("dataset " + std::to_string(k) + ": R+L_k = " +
                      std::to_string(e.total_rank) + " exceeds generic uniqueness bound " +
                      std::to_string(e.bound));
    }

    SolveResult result;
    result.seed = config.seed;
    result.theta =
        init_random(data.subjects(), data.voxels(), data.times(), config.ranks, config.seed);
    const double initial = cost(result.theta, data, config.lambda);
    if (!std::isfinite(initial))
        throw SolverError("bcd_solve: non-finite initial cost (seed " +
                          std::to_string(config.seed) + ")");
    result.cost_trace.push_back(initial);

    const bool exact_voxels =
        config.voxel_update == VoxelUpdate::ExactLs ||
        (config.voxel_update == VoxelUpdate::Auto && config.lambda == 0.0);

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        update_subjects(result.theta, data);
        if (exact_voxels)
            update_voxels_exact(result.theta, data);
        else
            update_voxels(result.theta, data, config.lambda, config.qn);
        update_times(result.theta, data);

        const double j = cost(result.theta, data, config.lambda);
        if (!std::isfinite(j))
            throw SolverError("bcd_solve: non-finite cost at iteration " + std::to_string(iter) +
                              " (seed " + std::to_string(config.seed) + ")");
        const double prev = result.cost_trace.back();
        result.cost_trace.push_back(j);
        result.iterations = iter;
        if (std::abs(j - prev) / std::max(prev, 1e-300) < config.rel_tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace ccpd
