#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ccpd/io.hpp"
#include "ccpd/rng.hpp"
#include "generators.hpp"

namespace fs = std::filesystem;
using ccpd::Index;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / ("ccpd_io_test_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("ct3 round trip preserves bytes and values") {
    const fs::path dir = temp_dir();
    ccpd::Rng rng(3);
    const ccpd::Tensor3 t = testgen::random_tensor(rng, 3, 4, 2);
    ccpd::io::write_ct3(dir / "t.ct3", t);
    const ccpd::Tensor3 back = ccpd::io::read_ct3(dir / "t.ct3");
    REQUIRE(back.dims() == t.dims());
    CHECK((back.vec() - t.vec()).cwiseAbs().maxCoeff() == 0.0);

    // header is the documented text line
    std::ifstream in(dir / "t.ct3", std::ios::binary);
    std::string line;
    std::getline(in, line);
    CHECK(line == "CT3 3 4 2");
    fs::remove_all(dir);
}

TEST_CASE("cm2 round trip, including zero-column matrices") {
    const fs::path dir = temp_dir();
    ccpd::Rng rng(5);
    const Eigen::MatrixXd m = testgen::random_matrix(rng, 4, 3);
    ccpd::io::write_cm2(dir / "m.cm2", m);
    CHECK((ccpd::io::read_cm2(dir / "m.cm2") - m).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd empty(5, 0);
    ccpd::io::write_cm2(dir / "empty.cm2", empty);
    const Eigen::MatrixXd back = ccpd::io::read_cm2(dir / "empty.cm2");
    CHECK(back.rows() == 5);
    CHECK(back.cols() == 0);
    fs::remove_all(dir);
}

TEST_CASE("corrupt files are rejected with IoError") {
    const fs::path dir = temp_dir();

    CHECK_THROWS_AS(ccpd::io::read_ct3(dir / "missing.ct3"), ccpd::io::IoError);

    {
        std::ofstream out(dir / "bad_magic.ct3", std::ios::binary);
        out << "XT3 2 2 2\n";
    }
    CHECK_THROWS_AS(ccpd::io::read_ct3(dir / "bad_magic.ct3"), ccpd::io::IoError);

    {
        std::ofstream out(dir / "truncated.ct3", std::ios::binary);
        out << "CT3 2 2 2\n";
        const double v = 1.0;
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    CHECK_THROWS_AS(ccpd::io::read_ct3(dir / "truncated.ct3"), ccpd::io::IoError);

    {
        std::ofstream out(dir / "nan.cm2", std::ios::binary);
        out << "CM2 1 1\n";
        const double v = std::numeric_limits<double>::quiet_NaN();
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    CHECK_THROWS_AS(ccpd::io::read_cm2(dir / "nan.cm2"), ccpd::io::IoError);

    {
        std::ofstream out(dir / "trailing.cm2", std::ios::binary);
        out << "CM2 1 1 9\n";
        const double v = 0.0;
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    CHECK_THROWS_AS(ccpd::io::read_cm2(dir / "trailing.cm2"), ccpd::io::IoError);
    fs::remove_all(dir);
}

TEST_CASE("theta directory round trip") {
    const fs::path dir = temp_dir();
    ccpd::Rng rng(7);
    const ccpd::Ranks ranks(2, {1, 0});
    const ccpd::PartitionedFactors theta = testgen::random_theta(rng, 5, 6, {3, 2}, ranks);
    ccpd::io::save_theta(dir / "theta", theta, {1e6, 42, 123.5});

    const auto loaded = ccpd::io::load_theta(dir / "theta");
    CHECK(loaded.meta.lambda == 1e6);
    CHECK(loaded.meta.seed == 42);
    CHECK(loaded.meta.final_cost == 123.5);
    CHECK(loaded.theta.ranks() == theta.ranks());
    CHECK((loaded.theta.subject_shared - theta.subject_shared).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.theta.voxel_distinct[0] - theta.voxel_distinct[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.theta.time_distinct[1].rows() == 2); // L_2 = 0 block kept
    CHECK(loaded.theta.time_distinct[1].cols() == 0);
    fs::remove_all(dir);
}

TEST_CASE("labels round trip and validation") {
    const fs::path dir = temp_dir();
    ccpd::GroupLabels labels;
    labels.labels = {0, 1, 1, 0, 1};
    ccpd::io::write_labels(dir / "labels.txt", labels);
    CHECK(ccpd::io::read_labels(dir / "labels.txt").labels == labels.labels);

    {
        std::ofstream out(dir / "bad.txt");
        out << "0\n2\n";
    }
    CHECK_THROWS_AS(ccpd::io::read_labels(dir / "bad.txt"), ccpd::io::IoError);
    fs::remove_all(dir);
}

TEST_CASE("file checksum is stable and content sensitive") {
    const fs::path dir = temp_dir();
    {
        std::ofstream out(dir / "a.txt");
        out << "hello";
    }
    {
        std::ofstream out(dir / "b.txt");
        out << "hellp";
    }
    const std::string a1 = ccpd::io::file_checksum(dir / "a.txt");
    const std::string a2 = ccpd::io::file_checksum(dir / "a.txt");
    const std::string b = ccpd::io::file_checksum(dir / "b.txt");
    CHECK(a1 == a2);
    CHECK(a1 != b);
    CHECK(a1.size() == 16);
    fs::remove_all(dir);
}

TEST_SUITE_END();
