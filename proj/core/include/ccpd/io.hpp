#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccpd/analysis.hpp"
#include "ccpd/coupled.hpp"
#include "ccpd/tensor.hpp"

namespace ccpd::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CT3 tensor file: text header "CT3 <I> <J> <K>\n" followed by I*J*K
// little-endian float64 values in the canonical linearization
// (first index fastest).
void write_ct3(const std::filesystem::path& path, const Tensor3& tensor);
Tensor3 read_ct3(const std::filesystem::path& path);

// CM2 matrix file: text header "CM2 <rows> <cols>\n" followed by column-major
// little-endian float64 values. cols may be 0 for degenerate factor blocks.
void write_cm2(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_cm2(const std::filesystem::path& path);

// Theta as a directory of CM2 factor files plus a JSON manifest recording
// K, dims, ranks, lambda, seed and final cost.
struct ThetaMetadata {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double final_cost = 0.0;
};
void save_theta(const std::filesystem::path& dir, const PartitionedFactors& theta,
                const ThetaMetadata& meta);
struct LoadedTheta {
    PartitionedFactors theta;
    ThetaMetadata meta;
};
LoadedTheta load_theta(const std::filesystem::path& dir);

// Group labels: one 0/1 per line.
GroupLabels read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const GroupLabels& labels);

// Dense matrix as CSV with the given column names (empty header skipped).
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& header = {});

// FNV-1a 64-bit digest of a file's bytes, as a fixed-width hex string.
std::string file_checksum(const std::filesystem::path& path);

} // namespace ccpd::io
