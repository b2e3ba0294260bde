#pragma once

#include <limits>
#include <span>
#include <vector>

#include "ccpd/coupled.hpp"

namespace ccpd {

/// Binary group membership per subject (e.g. healthy control vs patient).
struct GroupLabels {
    std::vector<int> labels; // 0 or 1 per subject

    Index size() const { return static_cast<Index>(labels.size()); }
    Index count(int group) const;
};

enum class TTestVariant { Welch, Pooled };

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    bool significant = false; // p < 0.05
};

/// Two-sample t-test of the column values split by group. Welch's
/// unequal-variance statistic with Welch-Satterthwaite degrees of freedom by
/// default; the pooled-variance variant is available behind the flag. Both
/// groups need at least two members. Zero variance in both groups with equal
/// means yields t = 0, p = 1.
TTestResult two_sample_ttest(std::span<const double> column, const GroupLabels& labels,
                             TTestVariant variant = TTestVariant::Welch);

/// Two-sided p-value of Student's t distribution with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct ThresholdedMap {
    Eigen::VectorXd values;   // z-scored map with |z| < threshold zeroed
    std::vector<int> signs;   // sign of each surviving entry, 0 where zeroed
    Index survivors = 0;
    bool constant_input = false;
};

/// Centers the map, scales it to unit variance, and zeroes entries with
/// |z| below the threshold. A constant map cannot be z-scored and produces an
/// all-zero output with a warning.
ThresholdedMap zscore_threshold(const Eigen::VectorXd& map, double z_thresh);

struct FmsReport {
    Eigen::VectorXd shared_scores;               // per shared component, in [0,1]
    std::vector<Eigen::VectorXd> distinct_scores; // per dataset, per component
    double shared_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> distinct_means;
    double mean_all = std::numeric_limits<double>::quiet_NaN();
};

/// Factor match score between an estimate and a reference: components are
/// matched by an exact assignment on the product of absolute per-mode
/// cosines, and each matched component scores |cos S| * |cos V| * |cos T|.
/// The shared block is matched once, with the time-mode cosine taken on the
/// vertical concatenation of all T_k^p; distinct blocks are matched per
/// dataset. Invariant to component permutation and per-mode sign/scale.
FmsReport factor_match_score(const PartitionedFactors& estimate,
                             const PartitionedFactors& reference);

struct SyntheticSpec {
    Index subjects = 0;
    Index voxels = 0;
    std::vector<Index> times;
    Ranks ranks;
    // Infinity means noiseless; otherwise i.i.d. Gaussian noise is scaled per
    // dataset to this exact signal-to-noise ratio.
    double noise_snr_db = std::numeric_limits<double>::infinity();
    // Pairwise congruence of the subject and voxel factor columns, in [0,1).
    double collinearity = 0.0;
    std::uint64_t seed = 0;

    // Optional group effect for t-test pipelines: group-1 rows of the listed
    // shared subject columns are shifted by effect_size column standard
    // deviations. group0_size of 0 disables the labels entirely.
    Index group0_size = 0;
    double effect_size = 0.0;
    std::vector<int> effect_columns;
};

struct SyntheticData {
    CoupledDataset data;
    PartitionedFactors truth;
    GroupLabels labels;
};

/// Draws ground-truth factors whose subject/voxel columns have pairwise
/// congruence exactly `collinearity` (orthonormalize-then-mix), assembles
/// Y_k from them, and adds noise at the requested SNR. Throws if the total
/// component count R + sum L_k exceeds the subject or voxel dimension, which
/// makes the congruence construction infeasible.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

} // namespace ccpd
