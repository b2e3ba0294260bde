#include "ccpd/coupled.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ccpd {

namespace {

std::string dim_string(Index a, Index b) {
    return std::to_string(a) + "x" + std::to_string(b);
}

} // namespace

CoupledDataset::CoupledDataset(std::vector<Tensor3> tensors) : tensors_(std::move(tensors)) {
    if (tensors_.empty()) throw std::invalid_argument("CoupledDataset: needs at least one tensor");
    const Index s = tensors_.front().dim(0);
    const Index v = tensors_.front().dim(1);
    for (const auto& t : tensors_)
        if (t.dim(0) != s || t.dim(1) != v)
            throw std::invalid_argument(
                "CoupledDataset: all tensors must share subject and voxel dims");
}

std::vector<Index> CoupledDataset::times() const {
    std::vector<Index> out;
    out.reserve(tensors_.size());
    for (const auto& t : tensors_) out.push_back(t.dim(2));
    return out;
}

Ranks::Ranks(int r, std::vector<int> l) : shared(r), distinct(std::move(l)) {
    if (shared < 0) throw std::invalid_argument("Ranks: shared rank must be >= 0");
    if (distinct.empty()) throw std::invalid_argument("Ranks: needs at least one distinct rank");
    for (int lk : distinct) {
        if (lk < 0) throw std::invalid_argument("Ranks: distinct ranks must be >= 0");
        if (shared + lk < 1)
            throw std::invalid_argument("Ranks: R + L_k must be >= 1 for every dataset");
    }
}

Ranks PartitionedFactors::ranks() const {
    Ranks r;
    r.shared = static_cast<int>(subject_shared.cols());
    for (const auto& m : subject_distinct) r.distinct.push_back(static_cast<int>(m.cols()));
    return r;
}

AssembledFactors PartitionedFactors::assemble(Index k) const {
    if (k < 0 || k >= num_datasets())
        throw std::out_of_range("PartitionedFactors::assemble: dataset index " +
                                std::to_string(k) + " out of range");
    const auto uk = static_cast<std::size_t>(k);
    AssembledFactors out;
    out.subject.resize(subject_shared.rows(), subject_shared.cols() + subject_distinct[uk].cols());
    out.subject << subject_shared, subject_distinct[uk];
    out.voxel.resize(voxel_shared.rows(), voxel_shared.cols() + voxel_distinct[uk].cols());
    out.voxel << voxel_shared, voxel_distinct[uk];
    out.time.resize(time_shared[uk].rows(), time_shared[uk].cols() + time_distinct[uk].cols());
    out.time << time_shared[uk], time_distinct[uk];
    return out;
}

void PartitionedFactors::validate() const {
    const Index k = num_datasets();
    if (k == 0) throw std::invalid_argument("PartitionedFactors: no datasets");
    if (static_cast<Index>(subject_distinct.size()) != k ||
        static_cast<Index>(voxel_distinct.size()) != k ||
        static_cast<Index>(time_distinct.size()) != k)
        throw std::invalid_argument("PartitionedFactors: per-dataset block counts differ");
    if (subject_shared.cols() != voxel_shared.cols())
        throw std::invalid_argument("PartitionedFactors: shared blocks disagree on R");
    for (Index i = 0; i < k; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (subject_distinct[u].rows() != subject_shared.rows())
            throw std::invalid_argument("PartitionedFactors: subject rows mismatch in dataset " +
                                        std::to_string(i));
        if (voxel_distinct[u].rows() != voxel_shared.rows())
            throw std::invalid_argument("PartitionedFactors: voxel rows mismatch in dataset " +
                                        std::to_string(i));
        if (time_shared[u].cols() != subject_shared.cols())
            throw std::invalid_argument("PartitionedFactors: time shared cols mismatch in dataset " +
                                        std::to_string(i));
        if (time_distinct[u].cols() != subject_distinct[u].cols() ||
            subject_distinct[u].cols() != voxel_distinct[u].cols())
            throw std::invalid_argument("PartitionedFactors: distinct cols mismatch in dataset " +
                                        std::to_string(i));
        if (time_shared[u].rows() != time_distinct[u].rows())
            throw std::invalid_argument("PartitionedFactors: time rows mismatch in dataset " +
                                        std::to_string(i));
    }
}

void PartitionedFactors::validate_against(const CoupledDataset& data) const {
    validate();
    if (num_datasets() != data.num_datasets())
        throw std::invalid_argument("PartitionedFactors: dataset count mismatch (" +
                                    std::to_string(num_datasets()) + " vs " +
                                    std::to_string(data.num_datasets()) + ")");
    if (subjects() != data.subjects() || voxels() != data.voxels())
        throw std::invalid_argument("PartitionedFactors: subject/voxel dims " +
                                    dim_string(subjects(), voxels()) + " do not match data " +
                                    dim_string(data.subjects(), data.voxels()));
    for (Index k = 0; k < num_datasets(); ++k)
        if (time_shared[static_cast<std::size_t>(k)].rows() != data.times(k))
            throw std::invalid_argument("PartitionedFactors: time dim mismatch in dataset " +
                                        std::to_string(k));
}

void SolverConfig::validate() const {
    if (lambda < 0) throw std::invalid_argument("SolverConfig: lambda must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(rel_tol > 0)) throw std::invalid_argument("SolverConfig: rel_tol must be > 0");
    if (qn.memory < 1 || qn.max_inner < 1)
        throw std::invalid_argument("SolverConfig: quasi-Newton memory and budget must be >= 1");
    if (voxel_update == VoxelUpdate::ExactLs && lambda != 0.0)
        throw std::invalid_argument("SolverConfig: exact voxel update requires lambda == 0");
}

CostBreakdown cost_breakdown(const PartitionedFactors& theta, const CoupledDataset& data) {
    theta.validate_against(data);
    CostBreakdown out;
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const AssembledFactors f = theta.assemble(k);
        const Tensor3 model = cp_reconstruct({f.subject, f.voxel, f.time});
        out.fit += (data.tensor(k).vec() - model.vec()).squaredNorm();
        const Eigen::MatrixXd gram = f.voxel.transpose() * f.voxel;
        const Index r = gram.rows();
        out.penalty += (gram - Eigen::MatrixXd::Identity(r, r)).squaredNorm();
    }
    return out;
}

double cost(const PartitionedFactors& theta, const CoupledDataset& data, double lambda) {
    if (lambda < 0) throw std::invalid_argument("cost: lambda must be >= 0");
    return cost_breakdown(theta, data).total(lambda);
}

bool IdentifiabilityReport::all_pass() const {
    for (const auto& e : per_dataset)
        if (e.status != IdentifiabilityStatus::Pass) return false;
    return true;
}

IdentifiabilityReport identifiability_check(Index subjects, Index voxels,
                                            const std::vector<Index>& times, const Ranks& ranks) {
    if (static_cast<Index>(times.size()) != ranks.num_datasets())
        throw std::invalid_argument("identifiability_check: times/ranks length mismatch");
    IdentifiabilityReport report;
    report.per_dataset.reserve(times.size());
    for (Index k = 0; k < static_cast<Index>(times.size()); ++k) {
        IdentifiabilityReport::Entry entry;
        entry.total_rank = ranks.total(k);
        const Index tk = times[static_cast<std::size_t>(k)];
        entry.bound = static_cast<double>(tk + 1) * static_cast<double>(subjects + 1) / 16.0;
        if (!(tk <= subjects && subjects <= voxels)) {
            entry.status = IdentifiabilityStatus::NotApplicable;
        } else {
            entry.status = static_cast<double>(entry.total_rank) <= entry.bound
                               ? IdentifiabilityStatus::Pass
                               : IdentifiabilityStatus::Fail;
        }
        report.per_dataset.push_back(entry);
    }
    return report;
}

std::vector<Tensor3> residual_tensors(const PartitionedFactors& theta, const CoupledDataset& data) {
    theta.validate_against(data);
    std::vector<Tensor3> out;
    out.reserve(static_cast<std::size_t>(data.num_datasets()));
    for (Index k = 0; k < data.num_datasets(); ++k) {
        const AssembledFactors f = theta.assemble(k);
        const Tensor3 model = cp_reconstruct({f.subject, f.voxel, f.time});
        const Tensor3& y = data.tensor(k);
        std::vector<double> diff(y.data().size());
        Eigen::Map<Eigen::VectorXd>(diff.data(), static_cast<Index>(diff.size())) =
            y.vec() - model.vec();
        out.emplace_back(y.dim(0), y.dim(1), y.dim(2), std::move(diff));
    }
    return out;
}

Tensor3 shared_reconstruction(const PartitionedFactors& theta, Index k) {
    if (k < 0 || k >= theta.num_datasets())
        throw std::out_of_range("shared_reconstruction: dataset index out of range");
    const auto u = static_cast<std::size_t>(k);
    return cp_reconstruct({theta.subject_shared, theta.voxel_shared, theta.time_shared[u]});
}

Tensor3 distinct_reconstruction(const PartitionedFactors& theta, Index k) {
    if (k < 0 || k >= theta.num_datasets())
        throw std::out_of_range("distinct_reconstruction: dataset index out of range");
    const auto u = static_cast<std::size_t>(k);
    return cp_reconstruct({theta.subject_distinct[u], theta.voxel_distinct[u], theta.time_distinct[u]});
}

} // namespace ccpd
