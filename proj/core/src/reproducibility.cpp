#include "ccpd/reproducibility.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "ccpd/assignment.hpp"
#include "ccpd/log.hpp"

namespace ccpd {

namespace {

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// |cos| between two columns, clamped to [0, 1]. Bitwise-identical columns
// (up to sign) score exactly 1 so that self-similarity is exact; zero-norm
// columns contribute 0.
double abs_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double norm_a,
                  double norm_b) {
    if (norm_a == 0.0 || norm_b == 0.0) {
        log::warn("pdistance: zero-norm column, cosine term set to 0");
        return 0.0;
    }
    if (bitwise_equal(a, b) || bitwise_equal(a, (-b).eval())) return 1.0;
    return std::min(1.0, std::abs(a.dot(b)) / (norm_a * norm_b));
}

std::vector<double> column_norms(const FactorMatrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m.col(c).norm();
    return out;
}

Eigen::MatrixXd similarity_matrix(const AssembledFactors& a, const AssembledFactors& b,
                                  CosineNormalization norm) {
    const Index n = a.subject.cols();
    Eigen::MatrixXd sim(n, n);
    if (norm == CosineNormalization::PerColumn) {
        const auto nsa = column_norms(a.subject), nsb = column_norms(b.subject);
        const auto nva = column_norms(a.voxel), nvb = column_norms(b.voxel);
        const auto nta = column_norms(a.time), ntb = column_norms(b.time);
        for (Index r = 0; r < n; ++r)
            for (Index c = 0; c < n; ++c)
                sim(r, c) = abs_cosine(a.subject.col(r), b.subject.col(c),
                                       nsa[static_cast<std::size_t>(r)],
                                       nsb[static_cast<std::size_t>(c)]) +
                            abs_cosine(a.voxel.col(r), b.voxel.col(c),
                                       nva[static_cast<std::size_t>(r)],
                                       nvb[static_cast<std::size_t>(c)]) +
                            abs_cosine(a.time.col(r), b.time.col(c),
                                       nta[static_cast<std::size_t>(r)],
                                       ntb[static_cast<std::size_t>(c)]);
        return sim;
    }
    const double fsa = a.subject.norm(), fsb = b.subject.norm();
    const double fva = a.voxel.norm(), fvb = b.voxel.norm();
    const double fta = a.time.norm(), ftb = b.time.norm();
    const auto term = [](double dot, double na, double nb) {
        if (na == 0.0 || nb == 0.0) return 0.0;
        return std::abs(dot) / (na * nb);
    };
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c)
            sim(r, c) = term(a.subject.col(r).dot(b.subject.col(c)), fsa, fsb) +
                        term(a.voxel.col(r).dot(b.voxel.col(c)), fva, fvb) +
                        term(a.time.col(r).dot(b.time.col(c)), fta, ftb);
    return sim;
}

} // namespace

double pdistance_scale(const Ranks& ranks) {
    double total = 0.0;
    for (Index k = 0; k < ranks.num_datasets(); ++k) total += 3.0 * ranks.total(k);
    return total;
}

MatchReport pdistance(const PartitionedFactors& a, const PartitionedFactors& b,
                      CosineNormalization norm) {
    if (a.ranks() != b.ranks())
        throw std::invalid_argument("pdistance: runs have different ranks");
    if (a.subjects() != b.subjects() || a.voxels() != b.voxels())
        throw std::invalid_argument("pdistance: runs have different dimensions");

    MatchReport report;
    for (Index k = 0; k < a.num_datasets(); ++k) {
        const Eigen::MatrixXd sim = similarity_matrix(a.assemble(k), b.assemble(k), norm);
        const std::vector<Index> perm = solve_assignment(sim);
        std::vector<double> contrib(perm.size());
        double total = 0.0;
        for (std::size_t r = 0; r < perm.size(); ++r) {
            contrib[r] = sim(static_cast<Index>(r), perm[r]);
            total += contrib[r];
        }
        report.permutations.push_back(perm);
        report.contributions.push_back(std::move(contrib));
        report.pdistance -= total;
    }
    return report;
}

MatchReport pdistance(const SolveResult& a, const SolveResult& b, CosineNormalization norm) {
    return pdistance(a.theta, b.theta, norm);
}

Index RunSet::num_successful() const {
    Index n = 0;
    for (const auto& r : runs)
        if (!r.failed) ++n;
    return n;
}

RunSet multi_start(const CoupledDataset& data, const SolverConfig& config, int num_runs,
                   int jobs) {
    if (num_runs < 1) throw std::invalid_argument("multi_start: num_runs must be >= 1");
    if (jobs < 1) throw std::invalid_argument("multi_start: jobs must be >= 1");
    config.validate();

    RunSet out;
    out.runs.resize(static_cast<std::size_t>(num_runs));

    const auto run_one = [&](int n) {
        SolverConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(n);
        auto& slot = out.runs[static_cast<std::size_t>(n)];
        try {
            slot = bcd_solve(data, c);
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.seed = c.seed;
            slot.error = e.what();
            slot.cost_trace = {std::numeric_limits<double>::quiet_NaN()};
            log::warn("multi_start: run " + std::to_string(n) + " failed: " + e.what());
        }
    };

    const int workers = std::min(jobs, num_runs);
    if (workers <= 1) {
        for (int n = 0; n < num_runs; ++n) run_one(n);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int n = next.fetch_add(1); n < num_runs; n = next.fetch_add(1)) run_one(n);
            });
        for (auto& t : pool) t.join();
    }

    if (out.num_successful() == 0) throw SolverError("multi_start: all runs failed");
    return out;
}

SelectionReport select_most_reproducible(const RunSet& runs, SelectionAggregation aggregation,
                                         CosineNormalization norm) {
    const Index n = runs.num_runs();
    if (n < 1) throw std::invalid_argument("select_most_reproducible: empty run set");
    if (runs.num_successful() < 1)
        throw std::invalid_argument("select_most_reproducible: no successful runs");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    SelectionReport report;
    report.pairwise = Eigen::MatrixXd::Constant(n, n, nan);
    report.scores.assign(static_cast<std::size_t>(n), nan);

    for (Index i = 0; i < n; ++i) {
        if (runs.runs[static_cast<std::size_t>(i)].failed) continue;
        report.pairwise(i, i) = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            if (runs.runs[static_cast<std::size_t>(j)].failed) continue;
            const double d = pdistance(runs.runs[static_cast<std::size_t>(i)],
                                       runs.runs[static_cast<std::size_t>(j)], norm)
                                 .pdistance;
            report.pairwise(i, j) = d;
            report.pairwise(j, i) = d;
        }
    }

    bool have_best = false;
    std::tuple<double, double, std::uint64_t> best_key;
    for (Index i = 0; i < n; ++i) {
        const auto& run = runs.runs[static_cast<std::size_t>(i)];
        if (run.failed) continue;
        std::vector<double> others;
        others.reserve(static_cast<std::size_t>(n) - 1);
        for (Index j = 0; j < n; ++j)
            if (j != i && !runs.runs[static_cast<std::size_t>(j)].failed)
                others.push_back(report.pairwise(i, j));
        double score = 0.0;
        if (!others.empty()) {
            if (aggregation == SelectionAggregation::Sum) {
                for (double d : others) score += d;
            } else {
                std::sort(others.begin(), others.end());
                const std::size_t m = others.size();
                score = (m % 2 == 1) ? others[m / 2] : 0.5 * (others[m / 2 - 1] + others[m / 2]);
            }
        }
        report.scores[static_cast<std::size_t>(i)] = score;
        const std::tuple<double, double, std::uint64_t> key{score, run.final_cost(), run.seed};
        if (!have_best || key < best_key) {
            have_best = true;
            best_key = key;
            report.best_index = i;
        }
    }
    return report;
}

std::vector<SweepRow> rank_sweep(const CoupledDataset& data, const std::vector<SweepPoint>& grid,
                                 const SolverConfig& base_config, int n_sweep, int jobs) {
    if (grid.empty()) throw std::invalid_argument("rank_sweep: empty grid");
    if (n_sweep < 2) throw std::invalid_argument("rank_sweep: need at least 2 runs per point");

    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const auto& point : grid) {
        SweepRow row;
        row.point = point;
        try {
            SolverConfig config = base_config;
            config.ranks = point.ranks;
            config.lambda = point.lambda;
            config.validate();
            const RunSet runs = multi_start(data, config, n_sweep, jobs);
            row.successful_runs = static_cast<int>(runs.num_successful());
            if (row.successful_runs < 2) {
                row.failed = true;
                row.message = "fewer than two successful runs";
            } else {
                double total = 0.0;
                int pairs = 0;
                double cost_sum = 0.0;
                for (Index i = 0; i < runs.num_runs(); ++i) {
                    const auto& a = runs.runs[static_cast<std::size_t>(i)];
                    if (a.failed) continue;
                    cost_sum += a.final_cost();
                    for (Index j = i + 1; j < runs.num_runs(); ++j) {
                        const auto& b = runs.runs[static_cast<std::size_t>(j)];
                        if (b.failed) continue;
                        total += pdistance(a, b).pdistance;
                        ++pairs;
                    }
                }
                row.normalized_score = total / pairs / pdistance_scale(point.ranks);
                row.mean_final_cost = cost_sum / row.successful_runs;
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.message = e.what();
            log::warn("rank_sweep: configuration failed: " + std::string(e.what()));
        }
        rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.failed) return false;
        return a.normalized_score < b.normalized_score;
    });
    return rows;
}

} // namespace ccpd
