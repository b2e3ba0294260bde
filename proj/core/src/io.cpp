#include "ccpd/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ccpd::io {

namespace {

static_assert(sizeof(double) == 8, "CT3/CM2 formats require 64-bit doubles");

void byteswap_buffer(std::vector<double>& values) {
    for (double& v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        bits = ((bits & 0x00000000000000ffULL) << 56) | ((bits & 0x000000000000ff00ULL) << 40) |
               ((bits & 0x0000000000ff0000ULL) << 24) | ((bits & 0x00000000ff000000ULL) << 8) |
               ((bits & 0x000000ff00000000ULL) >> 8) | ((bits & 0x0000ff0000000000ULL) >> 24) |
               ((bits & 0x00ff000000000000ULL) >> 40) | ((bits & 0xff00000000000000ULL) >> 56);
        v = std::bit_cast<double>(bits);
    }
}

void write_doubles_le(std::ofstream& out, const double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
    } else {
        std::vector<double> swapped(data, data + count);
        byteswap_buffer(swapped);
        out.write(reinterpret_cast<const char*>(swapped.data()),
                  static_cast<std::streamsize>(count * 8));
    }
}

std::vector<double> read_doubles_le(std::ifstream& in, std::size_t count,
                                    const std::filesystem::path& path) {
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
    if (static_cast<std::size_t>(in.gcount()) != count * 8)
        throw IoError(path.string() + ": truncated payload");
    if constexpr (std::endian::native != std::endian::little) byteswap_buffer(values);
    return values;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    return in;
}

// Parses "<magic> <a> <b> [<c>]\n" headers.
std::vector<long long> parse_header(std::ifstream& in, const std::string& magic, int count,
                                    const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
    std::istringstream stream(line);
    std::string tag;
    stream >> tag;
    if (tag != magic) throw IoError(path.string() + ": expected " + magic + " header, got '" + tag + "'");
    std::vector<long long> dims(static_cast<std::size_t>(count));
    long long product = 1;
    for (auto& d : dims) {
        if (!(stream >> d)) throw IoError(path.string() + ": malformed " + magic + " header");
        if (d > (1LL << 31)) throw IoError(path.string() + ": implausible dimension in header");
        product *= std::max(d, 1LL);
        if (product > (1LL << 42)) throw IoError(path.string() + ": implausible payload size");
    }
    std::string trailing;
    if (stream >> trailing) throw IoError(path.string() + ": trailing tokens in header");
    return dims;
}

} // namespace

void write_ct3(const std::filesystem::path& path, const Tensor3& tensor) {
    auto out = open_out(path);
    out << "CT3 " << tensor.dim(0) << " " << tensor.dim(1) << " " << tensor.dim(2) << "\n";
    write_doubles_le(out, tensor.data().data(), tensor.data().size());
    if (!out) throw IoError(path.string() + ": write failed");
}

Tensor3 read_ct3(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto dims = parse_header(in, "CT3", 3, path);
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw IoError(path.string() + ": non-positive dimensions");
    const auto count = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    auto values = read_doubles_le(in, count, path);
    try {
        return Tensor3(dims[0], dims[1], dims[2], std::move(values));
    } catch (const std::invalid_argument& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_cm2(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
    if (matrix.rows() < 1) throw IoError(path.string() + ": CM2 needs at least one row");
    auto out = open_out(path);
    out << "CM2 " << matrix.rows() << " " << matrix.cols() << "\n";
    write_doubles_le(out, matrix.data(), static_cast<std::size_t>(matrix.size()));
    if (!out) throw IoError(path.string() + ": write failed");
}

Eigen::MatrixXd read_cm2(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto dims = parse_header(in, "CM2", 2, path);
    if (dims[0] < 1 || dims[1] < 0) throw IoError(path.string() + ": bad dimensions");
    const auto count = static_cast<std::size_t>(dims[0] * dims[1]);
    const auto values = read_doubles_le(in, count, path);
    Eigen::MatrixXd m(dims[0], dims[1]);
    std::copy(values.begin(), values.end(), m.data());
    if (!m.allFinite()) throw IoError(path.string() + ": non-finite entries");
    return m;
}

void save_theta(const std::filesystem::path& dir, const PartitionedFactors& theta,
                const ThetaMetadata& meta) {
    theta.validate();
    std::filesystem::create_directories(dir);
    const Index k = theta.num_datasets();

    nlohmann::json manifest;
    manifest["format"] = "ccpd-theta";
    manifest["num_datasets"] = k;
    manifest["subjects"] = theta.subjects();
    manifest["voxels"] = theta.voxels();
    std::vector<Index> times;
    for (const auto& t : theta.time_shared) times.push_back(t.rows());
    manifest["times"] = times;
    const Ranks ranks = theta.ranks();
    manifest["ranks"] = {{"shared", ranks.shared}, {"distinct", ranks.distinct}};
    manifest["lambda"] = meta.lambda;
    manifest["seed"] = meta.seed;
    manifest["final_cost"] = meta.final_cost;
    {
        std::ofstream out(dir / "theta.json", std::ios::trunc);
        if (!out) throw IoError((dir / "theta.json").string() + ": cannot open for writing");
        out << manifest.dump(2) << "\n";
    }

    write_cm2(dir / "subject_shared.cm2", theta.subject_shared);
    write_cm2(dir / "voxel_shared.cm2", theta.voxel_shared);
    for (Index i = 0; i < k; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const std::string suffix = std::to_string(i) + ".cm2";
        write_cm2(dir / ("subject_distinct_" + suffix), theta.subject_distinct[u]);
        write_cm2(dir / ("voxel_distinct_" + suffix), theta.voxel_distinct[u]);
        write_cm2(dir / ("time_shared_" + suffix), theta.time_shared[u]);
        write_cm2(dir / ("time_distinct_" + suffix), theta.time_distinct[u]);
    }
}

LoadedTheta load_theta(const std::filesystem::path& dir) {
    std::ifstream in(dir / "theta.json");
    if (!in) throw IoError((dir / "theta.json").string() + ": cannot open");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError((dir / "theta.json").string() + ": " + e.what());
    }

    LoadedTheta out;
    try {
        out.meta.lambda = manifest.at("lambda").get<double>();
        out.meta.seed = manifest.at("seed").get<std::uint64_t>();
        out.meta.final_cost = manifest.at("final_cost").get<double>();
        const auto k = manifest.at("num_datasets").get<Index>();
        out.theta.subject_shared = read_cm2(dir / "subject_shared.cm2");
        out.theta.voxel_shared = read_cm2(dir / "voxel_shared.cm2");
        for (Index i = 0; i < k; ++i) {
            const std::string suffix = std::to_string(i) + ".cm2";
            out.theta.subject_distinct.push_back(read_cm2(dir / ("subject_distinct_" + suffix)));
            out.theta.voxel_distinct.push_back(read_cm2(dir / ("voxel_distinct_" + suffix)));
            out.theta.time_shared.push_back(read_cm2(dir / ("time_shared_" + suffix)));
            out.theta.time_distinct.push_back(read_cm2(dir / ("time_distinct_" + suffix)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(dir.string() + ": malformed theta manifest: " + e.what());
    }
    out.theta.validate();
    return out;
}

GroupLabels read_labels(const std::filesystem::path& path) {
    auto in = open_in(path);
    GroupLabels labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "0")
            labels.labels.push_back(0);
        else if (line == "1")
            labels.labels.push_back(1);
        else
            throw IoError(path.string() + ": labels must be 0 or 1 per line, got '" + line + "'");
    }
    if (labels.labels.empty()) throw IoError(path.string() + ": no labels");
    return labels;
}

void write_labels(const std::filesystem::path& path, const GroupLabels& labels) {
    auto out = open_out(path);
    for (int l : labels.labels) out << l << "\n";
    if (!out) throw IoError(path.string() + ": write failed");
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& header) {
    auto out = open_out(path);
    out.precision(17);
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            out << header[c] << (c + 1 < header.size() ? "," : "");
        out << "\n";
    }
    for (Index r = 0; r < matrix.rows(); ++r) {
        for (Index c = 0; c < matrix.cols(); ++c)
            out << matrix(r, c) << (c + 1 < matrix.cols() ? "," : "");
        out << "\n";
    }
    if (!out) throw IoError(path.string() + ": write failed");
}

std::string file_checksum(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buffer[65536];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        const auto n = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buffer[i]);
            hash *= 0x100000001b3ULL;
        }
        if (in.eof()) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(hex);
}

} // namespace ccpd::io
