// ccpd command-line tool: simulate, decompose, sweep, report.
//
// Pipeline behind `decompose`: optional SVD compression of the subject and
// voxel modes, N seeded block-coordinate-descent runs, selection of the most
// reproducible run by pairwise pseudo-distance, expansion back to the
// original spaces, and a manifest sufficient to replay the run.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccpd/analysis.hpp"
#include "ccpd/compression.hpp"
#include "ccpd/io.hpp"
#include "ccpd/log.hpp"
#include "ccpd/reproducibility.hpp"
#include "ccpd/solver.hpp"
#include "ccpd/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ccpd::Index;

namespace {

class StageTimer {
public:
    void record(const std::string& stage, double seconds) { seconds_[stage] = seconds; }

    template <typename F>
    auto time(const std::string& stage, F&& body) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            record(stage, elapsed(start));
        } else {
            auto result = body();
            record(stage, elapsed(start));
            return result;
        }
    }

    json to_json() const {
        json out;
        double total = 0.0;
        for (const auto& [stage, secs] : seconds_) {
            out[stage] = secs;
            total += secs;
        }
        out["total"] = total;
        return out;
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    std::map<std::string, double> seconds_;
};

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ccpd::io::IoError(path.string() + ": cannot open config");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ccpd::io::IoError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ccpd::io::IoError(path.string() + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

ccpd::Ranks parse_ranks(const json& j) {
    return ccpd::Ranks(j.at("shared").get<int>(), j.at("distinct").get<std::vector<int>>());
}

// Fills a SolverConfig from the config file, falling back to the library
// defaults; the effective values are what gets echoed into the manifest.
ccpd::SolverConfig parse_solver_config(const json& j) {
    ccpd::SolverConfig config;
    config.ranks = parse_ranks(j.at("ranks"));
    config.lambda = j.value("lambda", 0.0);
    config.max_iters = j.value("max_iters", config.max_iters);
    config.rel_tol = j.value("rel_tol", config.rel_tol);
    config.qn.memory = j.value("qn_memory", config.qn.memory);
    config.qn.max_inner = j.value("qn_max_inner", config.qn.max_inner);
    config.qn.grad_tol = j.value("qn_grad_tol", config.qn.grad_tol);
    config.seed = j.value("seed", std::uint64_t{0});
    const std::string mode = j.value("voxel_update", std::string("auto"));
    if (mode == "auto")
        config.voxel_update = ccpd::VoxelUpdate::Auto;
    else if (mode == "quasi_newton")
        config.voxel_update = ccpd::VoxelUpdate::QuasiNewton;
    else if (mode == "exact_ls")
        config.voxel_update = ccpd::VoxelUpdate::ExactLs;
    else
        throw std::invalid_argument("config: voxel_update must be auto, quasi_newton or exact_ls");
    config.validate();
    return config;
}

json solver_config_to_json(const ccpd::SolverConfig& config) {
    json j;
    j["ranks"] = {{"shared", config.ranks.shared}, {"distinct", config.ranks.distinct}};
    j["lambda"] = config.lambda;
    j["max_iters"] = config.max_iters;
    j["rel_tol"] = config.rel_tol;
    j["qn_memory"] = config.qn.memory;
    j["qn_max_inner"] = config.qn.max_inner;
    j["qn_grad_tol"] = config.qn.grad_tol;
    j["seed"] = config.seed;
    switch (config.voxel_update) {
        case ccpd::VoxelUpdate::Auto: j["voxel_update"] = "auto"; break;
        case ccpd::VoxelUpdate::QuasiNewton: j["voxel_update"] = "quasi_newton"; break;
        case ccpd::VoxelUpdate::ExactLs: j["voxel_update"] = "exact_ls"; break;
    }
    return j;
}

void prepare_output_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir))
        throw std::runtime_error(dir.string() + ": exists and is not a directory");
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force)
            throw std::runtime_error(dir.string() +
                                     ": output directory not empty (use --force to overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

ccpd::CoupledDataset read_datasets(const std::vector<std::string>& paths) {
    std::vector<ccpd::Tensor3> tensors;
    tensors.reserve(paths.size());
    for (const auto& p : paths) tensors.push_back(ccpd::io::read_ct3(p));
    return ccpd::CoupledDataset(std::move(tensors));
}

json input_checksums(const std::vector<std::string>& paths) {
    json out = json::array();
    for (const auto& p : paths)
        out.push_back({{"path", p}, {"fnv1a64", ccpd::io::file_checksum(p)}});
    return out;
}

void write_cost_traces_csv(const fs::path& path, const ccpd::RunSet& runs) {
    std::ofstream out(path, std::ios::trunc);
    out.precision(17);
    std::size_t longest = 0;
    for (Index i = 0; i < runs.num_runs(); ++i) {
        out << (i ? "," : "") << "run_" << runs.runs[static_cast<std::size_t>(i)].seed;
        longest = std::max(longest, runs.runs[static_cast<std::size_t>(i)].cost_trace.size());
    }
    out << "\n";
    for (std::size_t row = 0; row < longest; ++row) {
        for (Index i = 0; i < runs.num_runs(); ++i) {
            const auto& trace = runs.runs[static_cast<std::size_t>(i)].cost_trace;
            if (i) out << ",";
            if (row < trace.size()) out << trace[row];
        }
        out << "\n";
    }
}

void write_runs_csv(const fs::path& path, const ccpd::RunSet& runs,
                    const ccpd::SelectionReport& selection) {
    std::ofstream out(path, std::ios::trunc);
    out.precision(17);
    out << "run,seed,iterations,converged,failed,final_cost,score\n";
    for (Index i = 0; i < runs.num_runs(); ++i) {
        const auto& r = runs.runs[static_cast<std::size_t>(i)];
        out << i << "," << r.seed << "," << r.iterations << "," << (r.converged ? 1 : 0) << ","
            << (r.failed ? 1 : 0) << ",";
        if (!r.failed) out << r.final_cost();
        out << ",";
        if (!r.failed) out << selection.scores[static_cast<std::size_t>(i)];
        out << "\n";
    }
}

struct DecomposeOptions {
    std::vector<std::string> inputs;
    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    bool no_compress = false;
    bool force = false;
    std::optional<std::uint64_t> seed_override;
    std::optional<Index> compress_dim_override;
};

int run_decompose(const DecomposeOptions& opt) {
    StageTimer timer;
    const json config_json = load_json(opt.config_path);
    ccpd::SolverConfig config = parse_solver_config(config_json);
    if (opt.seed_override) config.seed = *opt.seed_override;
    const int num_starts = config_json.value("num_starts", 1);
    if (num_starts < 1) throw std::invalid_argument("config: num_starts must be >= 1");

    bool compress_enabled = config_json.value("compress", true);
    Index compress_dim = config_json.value("compress_dim", Index{30});
    if (opt.compress_dim_override) compress_dim = *opt.compress_dim_override;
    if (opt.no_compress) compress_enabled = false;
    if (compress_dim < 1) throw std::invalid_argument("compress_dim must be >= 1");

    const auto data = timer.time("read_inputs", [&] { return read_datasets(opt.inputs); });
    if (config.ranks.num_datasets() != data.num_datasets())
        throw std::invalid_argument("config ranks cover " +
                                    std::to_string(config.ranks.num_datasets()) +
                                    " datasets but " + std::to_string(data.num_datasets()) +
                                    " inputs were given");

    const auto ident =
        ccpd::identifiability_check(data.subjects(), data.voxels(), data.times(), config.ranks);
    for (std::size_t k = 0; k < ident.per_dataset.size(); ++k)
        if (ident.per_dataset[k].status == ccpd::IdentifiabilityStatus::Fail)
            ccpd::log::warn("dataset " + std::to_string(k) +
                            " exceeds the generic uniqueness bound");

    prepare_output_dir(opt.out_dir, opt.force);
    const fs::path out(opt.out_dir);

    // Stage 1: compression (optional).
    std::optional<ccpd::CompressionBasis> basis;
    Index d1 = 0, d2 = 0;
    if (compress_enabled) {
        d1 = std::min(compress_dim, data.subjects());
        d2 = std::min(compress_dim, data.voxels());
        if (d1 < compress_dim || d2 < compress_dim)
            ccpd::log::info("compression dim clamped to mode sizes (" + std::to_string(d1) +
                            ", " + std::to_string(d2) + ")");
        basis = timer.time("fit_basis", [&] { return ccpd::fit_basis(data, d1, d2); });
    }
    std::optional<ccpd::CoupledDataset> compressed_data;
    if (basis)
        compressed_data = timer.time("compress", [&] { return ccpd::compress(data, *basis); });
    const ccpd::CoupledDataset& solve_data = compressed_data ? *compressed_data : data;

    // Stage 2: multi-start solve.
    const ccpd::RunSet runs = timer.time(
        "multi_start", [&] { return ccpd::multi_start(solve_data, config, num_starts, opt.jobs); });

    // Stage 3: reproducibility selection.
    const ccpd::SelectionReport selection =
        timer.time("selection", [&] { return ccpd::select_most_reproducible(runs); });
    const auto& best = runs.runs[static_cast<std::size_t>(selection.best_index)];

    // Stage 4: expansion back to the original spaces.
    const ccpd::PartitionedFactors theta_full = timer.time("expand", [&] {
        return basis ? ccpd::expand_factors(best.theta, *basis) : best.theta;
    });
    const double full_cost = ccpd::cost(theta_full, data, config.lambda);

    // Stage 5: artifacts.
    timer.time("write", [&] {
        ccpd::io::save_theta(out / "theta", theta_full, {config.lambda, best.seed, full_cost});
        if (basis) {
            fs::create_directories(out / "basis");
            ccpd::io::write_cm2(out / "basis" / "subject_basis.cm2", basis->subject_basis);
            ccpd::io::write_cm2(out / "basis" / "voxel_basis.cm2", basis->voxel_basis);
            json bmanifest;
            bmanifest["d1"] = d1;
            bmanifest["d2"] = d2;
            bmanifest["inputs"] = input_checksums(opt.inputs);
            write_json(out / "basis" / "basis.json", bmanifest);
        }
        write_cost_traces_csv(out / "cost_traces.csv", runs);
        ccpd::io::write_matrix_csv(out / "pdistance.csv", selection.pairwise);
        write_runs_csv(out / "runs.csv", runs, selection);

        // one manifest per run, for replaying or auditing the run set
        fs::create_directories(out / "runs");
        for (Index i = 0; i < runs.num_runs(); ++i) {
            const auto& r = runs.runs[static_cast<std::size_t>(i)];
            json run_manifest;
            run_manifest["run"] = i;
            run_manifest["seed"] = r.seed;
            run_manifest["iterations"] = r.iterations;
            run_manifest["converged"] = r.converged;
            run_manifest["failed"] = r.failed;
            if (r.failed)
                run_manifest["error"] = r.error;
            else
                run_manifest["final_cost"] = r.final_cost();
            run_manifest["cost_trace"] = r.cost_trace;
            char name[32];
            std::snprintf(name, sizeof(name), "run_%04lld.json", static_cast<long long>(i));
            write_json(out / "runs" / name, run_manifest);
        }

        {
            std::ofstream trace(out / "cost_trace_selected.csv", std::ios::trunc);
            trace.precision(17);
            trace << "iteration,cost\n";
            for (std::size_t i = 0; i < best.cost_trace.size(); ++i)
                trace << i << "," << best.cost_trace[i] << "\n";
        }
    });

    json manifest;
    manifest["tool"] = "ccpd";
    manifest["version"] = ccpd::kVersion;
    manifest["command"] = "decompose";
    manifest["config"] = solver_config_to_json(config);
    manifest["config"]["num_starts"] = num_starts;
    manifest["config"]["compress"] = compress_enabled;
    if (compress_enabled) manifest["config"]["compress_dim"] = {{"d1", d1}, {"d2", d2}};
    manifest["jobs"] = opt.jobs;
    manifest["inputs"] = input_checksums(opt.inputs);
    manifest["dims"] = {{"subjects", data.subjects()},
                        {"voxels", data.voxels()},
                        {"times", data.times()}};
    manifest["selected"] = {{"run", selection.best_index},
                            {"seed", best.seed},
                            {"iterations", best.iterations},
                            {"converged", best.converged},
                            {"cost_compressed_space", best.final_cost()},
                            {"cost_full_space", full_cost}};
    manifest["successful_runs"] = runs.num_successful();
    write_json(out / "manifest.json", manifest);
    // Wall-clock timings are diagnostics, kept out of manifest.json so that
    // repeated runs produce byte-identical manifests.
    write_json(out / "timings.json", timer.to_json());

    std::cout << "selected run " << selection.best_index << " (seed " << best.seed
              << "), cost " << full_cost << ", artifacts in " << out.string() << "\n";
    return 0;
}

struct SweepOptions {
    std::vector<std::string> inputs;
    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    bool force = false;
    std::optional<std::uint64_t> seed_override;
};

int run_sweep(const SweepOptions& opt) {
    StageTimer timer;
    const json config_json = load_json(opt.config_path);

    const json& grid_json = config_json.at("grid");
    const auto shared_list = grid_json.at("shared").get<std::vector<int>>();
    const auto distinct_list = grid_json.at("distinct").get<std::vector<std::vector<int>>>();
    const auto lambda_list = grid_json.at("lambda").get<std::vector<double>>();
    if (shared_list.empty() || distinct_list.empty() || lambda_list.empty())
        throw std::invalid_argument("sweep config: empty grid");

    std::vector<ccpd::SweepPoint> grid;
    for (int r : shared_list)
        for (const auto& l : distinct_list)
            for (double lambda : lambda_list) grid.push_back({ccpd::Ranks(r, l), lambda});

    ccpd::SolverConfig base;
    base.ranks = grid.front().ranks;
    base.lambda = grid.front().lambda;
    base.max_iters = config_json.value("max_iters", base.max_iters);
    base.rel_tol = config_json.value("rel_tol", base.rel_tol);
    base.qn.memory = config_json.value("qn_memory", base.qn.memory);
    base.qn.max_inner = config_json.value("qn_max_inner", base.qn.max_inner);
    base.seed = config_json.value("seed", std::uint64_t{0});
    if (opt.seed_override) base.seed = *opt.seed_override;
    const int n_sweep = config_json.value("n_sweep", 10);

    const bool compress_enabled = config_json.value("compress", true);
    const Index compress_dim = config_json.value("compress_dim", Index{30});

    const auto data = timer.time("read_inputs", [&] { return read_datasets(opt.inputs); });
    std::optional<ccpd::CompressionBasis> basis;
    if (compress_enabled) {
        const Index d1 = std::min(compress_dim, data.subjects());
        const Index d2 = std::min(compress_dim, data.voxels());
        basis = timer.time("fit_basis", [&] { return ccpd::fit_basis(data, d1, d2); });
    }
    std::optional<ccpd::CoupledDataset> compressed_data;
    if (basis)
        compressed_data = timer.time("compress", [&] { return ccpd::compress(data, *basis); });
    const ccpd::CoupledDataset& solve_data = compressed_data ? *compressed_data : data;

    const auto rows = timer.time(
        "sweep", [&] { return ccpd::rank_sweep(solve_data, grid, base, n_sweep, opt.jobs); });

    prepare_output_dir(opt.out_dir, opt.force);
    const fs::path out(opt.out_dir);
    {
        std::ofstream csv(out / "sweep.csv", std::ios::trunc);
        csv.precision(17);
        csv << "shared_rank,distinct_ranks,lambda,normalized_score,mean_final_cost,"
               "successful_runs,failed,message\n";
        for (const auto& row : rows) {
            csv << row.point.ranks.shared << ",";
            for (std::size_t i = 0; i < row.point.ranks.distinct.size(); ++i)
                csv << (i ? ";" : "") << row.point.ranks.distinct[i];
            csv << "," << row.point.lambda << ",";
            if (!row.failed) csv << row.normalized_score;
            csv << ",";
            if (!row.failed) csv << row.mean_final_cost;
            csv << "," << row.successful_runs << "," << (row.failed ? 1 : 0) << ","
                << row.message << "\n";
        }
    }

    json manifest;
    manifest["tool"] = "ccpd";
    manifest["version"] = ccpd::kVersion;
    manifest["command"] = "sweep";
    manifest["config"] = config_json;
    manifest["config"]["seed"] = base.seed;
    manifest["jobs"] = opt.jobs;
    manifest["inputs"] = input_checksums(opt.inputs);
    manifest["grid_points"] = grid.size();
    manifest["n_sweep"] = n_sweep;
    write_json(out / "manifest.json", manifest);
    write_json(out / "timings.json", timer.to_json());

    std::cout << "sweep of " << grid.size() << " configurations written to "
              << (out / "sweep.csv").string() << "\n";
    if (!rows.empty() && !rows.front().failed) {
        std::cout << "best: R=" << rows.front().point.ranks.shared << " L=";
        for (std::size_t i = 0; i < rows.front().point.ranks.distinct.size(); ++i)
            std::cout << (i ? "," : "") << rows.front().point.ranks.distinct[i];
        std::cout << " lambda=" << rows.front().point.lambda
                  << " score=" << rows.front().normalized_score << "\n";
    }
    return 0;
}

struct SimulateOptions {
    std::string config_path;
    std::string out_dir;
    bool force = false;
    std::optional<std::uint64_t> seed_override;
};

int run_simulate(const SimulateOptions& opt) {
    const json config = load_json(opt.config_path);
    ccpd::SyntheticSpec spec;
    spec.subjects = config.at("subjects").get<Index>();
    spec.voxels = config.at("voxels").get<Index>();
    spec.times = config.at("times").get<std::vector<Index>>();
    spec.ranks = parse_ranks(config.at("ranks"));
    if (config.contains("snr_db") && !config.at("snr_db").is_null())
        spec.noise_snr_db = config.at("snr_db").get<double>();
    spec.collinearity = config.value("collinearity", 0.0);
    spec.seed = config.value("seed", std::uint64_t{0});
    spec.group0_size = config.value("group0_size", Index{0});
    spec.effect_size = config.value("effect_size", 0.0);
    spec.effect_columns = config.value("effect_columns", std::vector<int>{});

    if (opt.seed_override) spec.seed = *opt.seed_override;

    const auto synth = ccpd::generate_synthetic(spec);

    prepare_output_dir(opt.out_dir, opt.force);
    const fs::path out(opt.out_dir);
    std::vector<std::string> written;
    for (Index k = 0; k < synth.data.num_datasets(); ++k) {
        const fs::path p = out / ("y_" + std::to_string(k) + ".ct3");
        ccpd::io::write_ct3(p, synth.data.tensor(k));
        written.push_back(p.string());
    }
    ccpd::io::save_theta(out / "truth", synth.truth, {0.0, spec.seed, 0.0});
    if (!synth.labels.labels.empty()) ccpd::io::write_labels(out / "labels.txt", synth.labels);

    json manifest;
    manifest["tool"] = "ccpd";
    manifest["version"] = ccpd::kVersion;
    manifest["command"] = "simulate";
    manifest["config"] = config;
    manifest["config"]["seed"] = spec.seed;
    manifest["outputs"] = input_checksums(written);
    write_json(out / "manifest.json", manifest);

    std::cout << "wrote " << synth.data.num_datasets() << " tensors and ground truth to "
              << out.string() << "\n";
    return 0;
}

struct ReportOptions {
    std::string decompose_dir;
    std::string labels_path;
    std::string out_dir;
    double z_thresh = 2.7;
    bool bonferroni = false;
    bool force = false;
};

int run_report(const ReportOptions& opt) {
    const auto loaded = ccpd::io::load_theta(fs::path(opt.decompose_dir) / "theta");
    const ccpd::PartitionedFactors& theta = loaded.theta;
    const ccpd::GroupLabels labels = ccpd::io::read_labels(opt.labels_path);
    if (labels.size() != theta.subjects())
        throw std::invalid_argument("labels cover " + std::to_string(labels.size()) +
                                    " subjects, theta has " + std::to_string(theta.subjects()));

    prepare_output_dir(opt.out_dir, opt.force);
    const fs::path out(opt.out_dir);
    fs::create_directories(out / "maps");

    struct Row {
        std::string block;
        Index component;
        ccpd::TTestResult test;
    };
    std::vector<Row> rows;
    const auto test_block = [&](const std::string& name, const ccpd::FactorMatrix& m) {
        for (Index c = 0; c < m.cols(); ++c) {
            const std::span<const double> column(m.col(c).data(),
                                                 static_cast<std::size_t>(m.rows()));
            rows.push_back({name, c, ccpd::two_sample_ttest(column, labels)});
        }
    };
    test_block("shared", theta.subject_shared);
    for (Index k = 0; k < theta.num_datasets(); ++k)
        test_block("distinct_" + std::to_string(k),
                   theta.subject_distinct[static_cast<std::size_t>(k)]);

    const int num_tests = static_cast<int>(rows.size());
    {
        std::ofstream csv(out / "ttests.csv", std::ios::trunc);
        csv.precision(17);
        csv << "block,component,t,df,p,significant";
        if (opt.bonferroni) csv << ",p_bonferroni";
        csv << "\n";
        for (const auto& row : rows) {
            csv << row.block << "," << row.component << "," << row.test.t << "," << row.test.df
                << "," << row.test.p << "," << (row.test.significant ? 1 : 0);
            if (opt.bonferroni) csv << "," << std::min(1.0, row.test.p * num_tests);
            csv << "\n";
        }
    }

    // Spatial maps: raw z-scores and |z|-thresholded versions, per block.
    const auto write_maps = [&](const std::string& name, const ccpd::FactorMatrix& m) {
        if (m.cols() == 0) return;
        Eigen::MatrixXd raw(m.rows(), m.cols());
        Eigen::MatrixXd thresholded(m.rows(), m.cols());
        for (Index c = 0; c < m.cols(); ++c) {
            raw.col(c) = ccpd::zscore_threshold(m.col(c), 0.0).values;
            thresholded.col(c) = ccpd::zscore_threshold(m.col(c), opt.z_thresh).values;
        }
        ccpd::io::write_cm2(out / "maps" / (name + "_z.cm2"), raw);
        ccpd::io::write_cm2(out / "maps" / (name + "_thresholded.cm2"), thresholded);
    };
    write_maps("shared", theta.voxel_shared);
    for (Index k = 0; k < theta.num_datasets(); ++k)
        write_maps("distinct_" + std::to_string(k),
                   theta.voxel_distinct[static_cast<std::size_t>(k)]);

    json summary;
    summary["tool"] = "ccpd";
    summary["version"] = ccpd::kVersion;
    summary["command"] = "report";
    summary["z_threshold"] = opt.z_thresh;
    summary["group_sizes"] = {labels.count(0), labels.count(1)};
    summary["num_tests"] = num_tests;
    json comps = json::array();
    int significant = 0;
    for (const auto& row : rows) {
        comps.push_back({{"block", row.block},
                         {"component", row.component},
                         {"t", row.test.t},
                         {"df", row.test.df},
                         {"p", row.test.p},
                         {"significant", row.test.significant}});
        if (row.test.significant) ++significant;
    }
    summary["components"] = comps;
    summary["significant_components"] = significant;
    write_json(out / "summary.json", summary);

    std::cout << significant << " of " << num_tests
              << " components show p < 0.05; report in " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partially constrained coupled CP decomposition of multi-task datasets"};
    app.set_version_flag("--version", std::string(ccpd::kVersion));
    app.require_subcommand(1);

    DecomposeOptions dec;
    auto* cmd_dec = app.add_subcommand("decompose",
                                       "Compress, multi-start solve, select the most "
                                       "reproducible run, expand and write artifacts");
    cmd_dec->add_option("inputs", dec.inputs, "CT3 tensor files, one per task dataset")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_dec->add_option("--config", dec.config_path, "JSON solver configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_dec->add_option("-o,--output", dec.out_dir, "output directory")->required();
    cmd_dec->add_option("--jobs", dec.jobs, "concurrent solver runs")->check(CLI::PositiveNumber);
    cmd_dec->add_flag("--no-compress", dec.no_compress, "skip SVD compression");
    cmd_dec->add_flag("--force", dec.force, "overwrite a non-empty output directory");
    std::uint64_t dec_seed = 0;
    auto* dec_seed_opt = cmd_dec->add_option("--seed", dec_seed, "override the config seed");
    Index dec_dim = 0;
    auto* dec_dim_opt =
        cmd_dec->add_option("--compress-dim", dec_dim, "override the compression dimension")
            ->check(CLI::PositiveNumber);

    SweepOptions sweep;
    auto* cmd_sweep =
        app.add_subcommand("sweep", "Reproducibility sweep over a rank/lambda grid");
    cmd_sweep->add_option("inputs", sweep.inputs, "CT3 tensor files")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_sweep->add_option("--config", sweep.config_path, "JSON sweep configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_sweep->add_option("-o,--output", sweep.out_dir, "output directory")->required();
    cmd_sweep->add_option("--jobs", sweep.jobs, "concurrent solver runs")
        ->check(CLI::PositiveNumber);
    cmd_sweep->add_flag("--force", sweep.force, "overwrite a non-empty output directory");
    std::uint64_t sweep_seed = 0;
    auto* sweep_seed_opt = cmd_sweep->add_option("--seed", sweep_seed, "override the config seed");

    SimulateOptions sim;
    auto* cmd_sim = app.add_subcommand("simulate", "Generate synthetic task datasets with truth");
    cmd_sim->add_option("--config", sim.config_path, "JSON synthetic spec")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_sim->add_option("-o,--output", sim.out_dir, "output directory")->required();
    cmd_sim->add_flag("--force", sim.force, "overwrite a non-empty output directory");
    std::uint64_t sim_seed = 0;
    auto* sim_seed_opt = cmd_sim->add_option("--seed", sim_seed, "override the config seed");

    ReportOptions rep;
    auto* cmd_rep = app.add_subcommand(
        "report", "Group-difference t-tests and thresholded spatial maps for a decompose output");
    cmd_rep->add_option("decompose_dir", rep.decompose_dir, "decompose output directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd_rep->add_option("--labels", rep.labels_path, "per-subject 0/1 group labels")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_rep->add_option("-o,--output", rep.out_dir, "output directory")->required();
    cmd_rep->add_option("--z-thresh", rep.z_thresh, "|z| threshold for spatial maps")
        ->check(CLI::NonNegativeNumber);
    cmd_rep->add_flag("--bonferroni", rep.bonferroni, "add a Bonferroni-corrected p column");
    cmd_rep->add_flag("--force", rep.force, "overwrite a non-empty output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_dec) {
            if (*dec_seed_opt) dec.seed_override = dec_seed;
            if (*dec_dim_opt) dec.compress_dim_override = dec_dim;
            return run_decompose(dec);
        }
        if (*cmd_sweep) {
            if (*sweep_seed_opt) sweep.seed_override = sweep_seed;
            return run_sweep(sweep);
        }
        if (*cmd_sim) {
            if (*sim_seed_opt) sim.seed_override = sim_seed;
            return run_simulate(sim);
        }
        if (*cmd_rep) return run_report(rep);
    } catch (const std::exception& e) {
        std::cerr << "ccpd: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
