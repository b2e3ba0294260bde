#include "ccpd/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ccpd/assignment.hpp"
#include "ccpd/log.hpp"
#include "ccpd/rng.hpp"

namespace ccpd {

namespace {

// Continued-fraction evaluation for the regularized incomplete beta function
// (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
        b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

struct GroupStats {
    double n = 0, mean = 0, var = 0; // unbiased variance
};

GroupStats group_stats(std::span<const double> column, const GroupLabels& labels, int group) {
    GroupStats s;
    for (std::size_t i = 0; i < column.size(); ++i)
        if (labels.labels[i] == group) {
            s.n += 1;
            s.mean += column[i];
        }
    s.mean /= s.n;
    for (std::size_t i = 0; i < column.size(); ++i)
        if (labels.labels[i] == group) {
            const double d = column[i] - s.mean;
            s.var += d * d;
        }
    s.var /= (s.n - 1);
    return s;
}

Eigen::MatrixXd abs_cosine_matrix(const FactorMatrix& a, const FactorMatrix& b) {
    Eigen::MatrixXd out(a.cols(), b.cols());
    for (Index r = 0; r < a.cols(); ++r)
        for (Index c = 0; c < b.cols(); ++c) {
            const double na = a.col(r).norm();
            const double nb = b.col(c).norm();
            out(r, c) = (na == 0.0 || nb == 0.0)
                            ? 0.0
                            : std::min(1.0, std::abs(a.col(r).dot(b.col(c))) / (na * nb));
        }
    return out;
}

FactorMatrix stack_time_shared(const PartitionedFactors& theta) {
    Index rows = 0;
    for (const auto& t : theta.time_shared) rows += t.rows();
    FactorMatrix out(rows, theta.subject_shared.cols());
    Index off = 0;
    for (const auto& t : theta.time_shared) {
        out.middleRows(off, t.rows()) = t;
        off += t.rows();
    }
    return out;
}

// Matched per-component scores for one block: elementwise product of the
// three per-mode |cosine| matrices, assignment, then the matched diagonal.
Eigen::VectorXd block_scores(const FactorMatrix& s_est, const FactorMatrix& s_ref,
                             const FactorMatrix& v_est, const FactorMatrix& v_ref,
                             const FactorMatrix& t_est, const FactorMatrix& t_ref) {
    const Index n = s_est.cols();
    if (n == 0) return Eigen::VectorXd(0);
    const Eigen::MatrixXd sim = abs_cosine_matrix(s_est, s_ref)
                                    .cwiseProduct(abs_cosine_matrix(v_est, v_ref))
                                    .cwiseProduct(abs_cosine_matrix(t_est, t_ref));
    const auto perm = solve_assignment(sim);
    Eigen::VectorXd scores(n);
    for (Index r = 0; r < n; ++r) scores[r] = sim(r, perm[static_cast<std::size_t>(r)]);
    return scores;
}

} // namespace

Index GroupLabels::count(int group) const {
    Index n = 0;
    for (int l : labels)
        if (l == group) ++n;
    return n;
}

double student_t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    if (t == 0.0) return 1.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

TTestResult two_sample_ttest(std::span<const double> column, const GroupLabels& labels,
                             TTestVariant variant) {
    if (static_cast<Index>(column.size()) != labels.size())
        throw std::invalid_argument("two_sample_ttest: column and labels length differ");
    for (int l : labels.labels)
        if (l != 0 && l != 1)
            throw std::invalid_argument("two_sample_ttest: labels must be 0 or 1");
    if (labels.count(0) < 2 || labels.count(1) < 2)
        throw std::invalid_argument("two_sample_ttest: both groups need at least two members");

    const GroupStats g0 = group_stats(column, labels, 0);
    const GroupStats g1 = group_stats(column, labels, 1);

    TTestResult out;
    if (g0.var == 0.0 && g1.var == 0.0) {
        if (g0.mean == g1.mean) {
            out.t = 0.0;
            out.p = 1.0;
            out.df = g0.n + g1.n - 2;
            return out;
        }
        out.t = g0.mean > g1.mean ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
        out.p = 0.0;
        out.df = g0.n + g1.n - 2;
        out.significant = true;
        return out;
    }

    double se2 = 0.0;
    if (variant == TTestVariant::Welch) {
        const double a = g0.var / g0.n;
        const double b = g1.var / g1.n;
        se2 = a + b;
        out.df = se2 * se2 / (a * a / (g0.n - 1) + b * b / (g1.n - 1));
    } else {
        const double pooled =
            ((g0.n - 1) * g0.var + (g1.n - 1) * g1.var) / (g0.n + g1.n - 2);
        se2 = pooled * (1.0 / g0.n + 1.0 / g1.n);
        out.df = g0.n + g1.n - 2;
    }
    out.t = (g0.mean - g1.mean) / std::sqrt(se2);
    out.p = student_t_two_sided_p(out.t, out.df);
    out.significant = out.p < 0.05;
    return out;
}

ThresholdedMap zscore_threshold(const Eigen::VectorXd& map, double z_thresh) {
    if (z_thresh < 0) throw std::invalid_argument("zscore_threshold: threshold must be >= 0");
    if (map.size() < 2) throw std::invalid_argument("zscore_threshold: map too short");

    ThresholdedMap out;
    out.values.setZero(map.size());
    out.signs.assign(static_cast<std::size_t>(map.size()), 0);

    const double mean = map.mean();
    const double var = (map.array() - mean).square().sum() / static_cast<double>(map.size() - 1);
    if (var == 0.0) {
        log::warn("zscore_threshold: constant map, emitting zeros");
        out.constant_input = true;
        return out;
    }
    const double sd = std::sqrt(var);
    for (Index i = 0; i < map.size(); ++i) {
        const double z = (map[i] - mean) / sd;
        if (std::abs(z) >= z_thresh) {
            out.values[i] = z;
            out.signs[static_cast<std::size_t>(i)] = z > 0 ? 1 : -1;
            ++out.survivors;
        }
    }
    return out;
}

FmsReport factor_match_score(const PartitionedFactors& estimate,
                             const PartitionedFactors& reference) {
    estimate.validate();
    reference.validate();
    if (estimate.ranks() != reference.ranks())
        throw std::invalid_argument("factor_match_score: rank mismatch");
    if (estimate.subjects() != reference.subjects() || estimate.voxels() != reference.voxels())
        throw std::invalid_argument("factor_match_score: dimension mismatch");

    FmsReport report;
    report.shared_scores =
        block_scores(estimate.subject_shared, reference.subject_shared, estimate.voxel_shared,
                     reference.voxel_shared, stack_time_shared(estimate),
                     stack_time_shared(reference));
    if (report.shared_scores.size() > 0) report.shared_mean = report.shared_scores.mean();

    double total = report.shared_scores.sum();
    Index count = report.shared_scores.size();
    for (Index k = 0; k < estimate.num_datasets(); ++k) {
        const auto u = static_cast<std::size_t>(k);
        Eigen::VectorXd scores = block_scores(
            estimate.subject_distinct[u], reference.subject_distinct[u],
            estimate.voxel_distinct[u], reference.voxel_distinct[u],
            estimate.time_distinct[u], reference.time_distinct[u]);
        report.distinct_means.push_back(scores.size() > 0
                                            ? scores.mean()
                                            : std::numeric_limits<double>::quiet_NaN());
        total += scores.sum();
        count += scores.size();
        report.distinct_scores.push_back(std::move(scores));
    }
    if (count > 0) report.mean_all = total / static_cast<double>(count);
    return report;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.subjects < 1 || spec.voxels < 1 || spec.times.empty())
        throw std::invalid_argument("generate_synthetic: dims must be positive");
    if (spec.ranks.num_datasets() != static_cast<Index>(spec.times.size()))
        throw std::invalid_argument("generate_synthetic: ranks/times length mismatch");
    if (!(spec.collinearity >= 0.0 && spec.collinearity < 1.0))
        throw std::invalid_argument("generate_synthetic: collinearity must be in [0, 1)");
    if (std::isnan(spec.noise_snr_db) || spec.noise_snr_db == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("generate_synthetic: SNR must be finite or +infinity");

    const Index s = spec.subjects, v = spec.voxels;
    const int r = spec.ranks.shared;
    Index total = r;
    for (int l : spec.ranks.distinct) total += l;
    if (total > s || total > v)
        throw std::invalid_argument(
            "generate_synthetic: R + sum L_k exceeds a mode dimension; congruence "
            "construction infeasible");

    Rng rng(spec.seed);
    const auto gaussian = [&rng](Index rows, Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index i = 0; i < rows; ++i) m(i, c) = rng.normal();
        return m;
    };

    // Orthonormalize-then-mix: columns of Q * chol(C)^T have unit norm and
    // pairwise inner product exactly `collinearity`.
    const auto congruent_factor = [&](Index rows) {
        Eigen::MatrixXd g = gaussian(rows, total);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, total);
        if (spec.collinearity == 0.0) return q;
        Eigen::MatrixXd congruence =
            Eigen::MatrixXd::Constant(total, total, spec.collinearity);
        congruence.diagonal().setOnes();
        const Eigen::MatrixXd mix = Eigen::LLT<Eigen::MatrixXd>(congruence).matrixU();
        return Eigen::MatrixXd(q * mix);
    };

    const Eigen::MatrixXd subject_pool = congruent_factor(s);
    const Eigen::MatrixXd voxel_pool = congruent_factor(v);

    PartitionedFactors truth;
    truth.subject_shared = subject_pool.leftCols(r);
    truth.voxel_shared = voxel_pool.leftCols(r);
    Index offset = r;
    for (std::size_t k = 0; k < spec.times.size(); ++k) {
        const int l = spec.ranks.distinct[k];
        const Index t = spec.times[k];
        truth.subject_distinct.push_back(subject_pool.middleCols(offset, l));
        truth.voxel_distinct.push_back(voxel_pool.middleCols(offset, l));
        offset += l;
        FactorMatrix tp = gaussian(t, r), td = gaussian(t, l);
        for (Index c = 0; c < tp.cols(); ++c) tp.col(c) /= tp.col(c).norm();
        for (Index c = 0; c < td.cols(); ++c) td.col(c) /= td.col(c).norm();
        truth.time_shared.push_back(std::move(tp));
        truth.time_distinct.push_back(std::move(td));
    }

    GroupLabels labels;
    if (spec.group0_size > 0) {
        if (spec.group0_size >= s)
            throw std::invalid_argument("generate_synthetic: group0_size must leave room for group 1");
        labels.labels.assign(static_cast<std::size_t>(s), 1);
        for (Index i = 0; i < spec.group0_size; ++i) labels.labels[static_cast<std::size_t>(i)] = 0;
    }
    if (spec.effect_size != 0.0) {
        if (labels.labels.empty())
            throw std::invalid_argument("generate_synthetic: effect requires group0_size > 0");
        for (int c : spec.effect_columns) {
            if (c < 0 || c >= r)
                throw std::invalid_argument("generate_synthetic: effect column out of shared range");
            auto col = truth.subject_shared.col(c);
            const double mean = col.mean();
            const double sd =
                std::sqrt((col.array() - mean).square().sum() / static_cast<double>(s - 1));
            for (Index i = 0; i < s; ++i)
                if (labels.labels[static_cast<std::size_t>(i)] == 1)
                    col[i] += spec.effect_size * sd;
        }
    }

    std::vector<Tensor3> tensors;
    for (std::size_t k = 0; k < spec.times.size(); ++k) {
        const AssembledFactors f = truth.assemble(static_cast<Index>(k));
        Tensor3 clean = cp_reconstruct({f.subject, f.voxel, f.time});
        if (std::isinf(spec.noise_snr_db)) {
            tensors.push_back(std::move(clean));
            continue;
        }
        std::vector<double> noisy(clean.data());
        Eigen::Map<Eigen::VectorXd> y(noisy.data(), static_cast<Index>(noisy.size()));
        Eigen::VectorXd noise(y.size());
        for (Index i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
        const double scale =
            y.norm() / (std::pow(10.0, spec.noise_snr_db / 20.0) * noise.norm());
        y += scale * noise;
        tensors.emplace_back(clean.dim(0), clean.dim(1), clean.dim(2), std::move(noisy));
    }

    return SyntheticData{CoupledDataset(std::move(tensors)), std::move(truth), std::move(labels)};
}

} // namespace ccpd
