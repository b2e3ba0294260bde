#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ccpd/rng.hpp"
#include "ccpd/tensor.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using ccpd::Index;
using ccpd::Tensor3;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("tensor3 stores the documented linearization") {
    std::vector<double> data(2 * 3 * 4);
    std::iota(data.begin(), data.end(), 0.0);
    const Tensor3 t(2, 3, 4, data);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 3; ++j)
            for (Index k = 0; k < 4; ++k)
                CHECK(t(i, j, k) == data[static_cast<std::size_t>(i + 2 * j + 6 * k)]);
}

TEST_CASE("tensor3 constructor rejects bad input") {
    CHECK_THROWS_AS(Tensor3(0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(Tensor3(2, 2, 2, std::vector<double>(7, 0.0)), std::invalid_argument);
    std::vector<double> nan_data(8, 0.0);
    nan_data[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Tensor3(2, 2, 2, nan_data), std::invalid_argument);
    std::vector<double> inf_data(8, 0.0);
    inf_data[5] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Tensor3(2, 2, 2, inf_data), std::invalid_argument);
}

TEST_CASE("unfold of a constant tensor is constant") {
    const Tensor3 ones(2, 3, 4, std::vector<double>(24, 1.0));
    const Eigen::MatrixXd m = ccpd::unfold(ones, 1);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 12);
    CHECK(m.minCoeff() == 1.0);
    CHECK(m.maxCoeff() == 1.0);
}

TEST_CASE("mode-1 unfolding of a rank-1 tensor is a * kr(c, b)^T") {
    Eigen::VectorXd a(2), b(3), c(4);
    a << 1.0, -2.0;
    b << 0.5, 1.0, 2.0;
    c << 1.0, 0.0, -1.0, 3.0;
    const Tensor3 t = oracle::cp_reconstruct(a, b, c);
    const Eigen::MatrixXd expected = a * ccpd::khatri_rao(c, b).transpose();
    CHECK((ccpd::unfold(t, 1) - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("all three unfoldings match the index-mapping oracle") {
    std::vector<double> data(3 * 4 * 5);
    std::iota(data.begin(), data.end(), 0.0);
    const Tensor3 t(3, 4, 5, data);
    for (int mode : {1, 2, 3}) {
        const Eigen::MatrixXd got = ccpd::unfold(t, mode);
        const Eigen::MatrixXd want = oracle::unfold(t, mode);
        REQUIRE(got.rows() == want.rows());
        REQUIRE(got.cols() == want.cols());
        CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("unfold rejects invalid modes") {
    const Tensor3 t(2, 2, 2);
    CHECK_THROWS_AS(ccpd::unfold(t, 0), std::invalid_argument);
    CHECK_THROWS_AS(ccpd::unfold(t, 4), std::invalid_argument);
}

TEST_CASE("unfold/fold round trip is the identity for every mode") {
    ccpd::Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Index ni = 1 + static_cast<Index>(rng.below(8));
        const Index nj = 1 + static_cast<Index>(rng.below(8));
        const Index nk = 1 + static_cast<Index>(rng.below(8));
        const Tensor3 t = testgen::random_tensor(rng, ni, nj, nk);
        for (int mode : {1, 2, 3}) {
            const Tensor3 back = ccpd::fold(ccpd::unfold(t, mode), mode, t.dims());
            CHECK((back.vec() - t.vec()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("khatri_rao of identity matrices picks unit columns") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd kr = ccpd::khatri_rao(eye, eye);
    REQUIRE(kr.rows() == 4);
    REQUIRE(kr.cols() == 2);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 2);
    expected(0, 0) = 1.0; // e1
    expected(3, 1) = 1.0; // e4
    CHECK((kr - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("khatri_rao of single columns is the stacked outer product") {
    Eigen::MatrixXd a(3, 1), b(2, 1);
    a << 1.0, 2.0, -1.0;
    b << 4.0, 0.5;
    const Eigen::MatrixXd kr = ccpd::khatri_rao(a, b);
    const Eigen::MatrixXd outer = b * a.transpose(); // column-major vec gives the stacking
    CHECK((kr - Eigen::Map<const Eigen::MatrixXd>(outer.data(), 6, 1)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("khatri_rao matches the elementwise oracle on random input") {
    ccpd::Rng rng(11);
    const Eigen::MatrixXd a = testgen::random_matrix(rng, 3, 2);
    const Eigen::MatrixXd b = testgen::random_matrix(rng, 4, 2);
    CHECK((ccpd::khatri_rao(a, b) - oracle::khatri_rao(a, b)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("khatri_rao columns are Kronecker products of the factor columns") {
    ccpd::Rng rng(13);
    const Eigen::MatrixXd a = testgen::random_matrix(rng, 5, 3);
    const Eigen::MatrixXd b = testgen::random_matrix(rng, 4, 3);
    const Eigen::MatrixXd kr = ccpd::khatri_rao(a, b);
    for (Index r = 0; r < 3; ++r)
        for (Index i = 0; i < 5; ++i)
            CHECK(kr.col(r).segment(i * 4, 4).isApprox(a(i, r) * b.col(r), 1e-15));
}

TEST_CASE("khatri_rao rejects mismatched column counts") {
    CHECK_THROWS_AS(ccpd::khatri_rao(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3)),
                    std::invalid_argument);
}

TEST_CASE("rank-1 cp_reconstruct places the expected frontal slice") {
    Eigen::MatrixXd a(2, 1), b(2, 1), c(3, 1);
    a << 1.0, 0.0;
    b << 1.0, 1.0;
    c << 2.0, 0.0, 0.0;
    const Tensor3 t = ccpd::cp_reconstruct({a, b, c});
    CHECK(t(0, 0, 0) == 2.0);
    CHECK(t(0, 1, 0) == 2.0);
    CHECK(t(1, 0, 0) == 0.0);
    CHECK(t(1, 1, 0) == 0.0);
    for (Index k = 1; k < 3; ++k)
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) CHECK(t(i, j, k) == 0.0);
}

TEST_CASE("cp_reconstruct with a zero factor annihilates the tensor") {
    ccpd::Rng rng(17);
    const ccpd::CpModel m{testgen::random_matrix(rng, 3, 2), testgen::random_matrix(rng, 4, 2),
                          Eigen::MatrixXd::Zero(5, 2)};
    CHECK(ccpd::frobenius_norm_sq(ccpd::cp_reconstruct(m)) == 0.0);
}

TEST_CASE("cp_reconstruct matches the triple-loop oracle") {
    ccpd::Rng rng(19);
    const Eigen::MatrixXd a = testgen::random_matrix(rng, 4, 3) / 3.0;
    const Eigen::MatrixXd b = testgen::random_matrix(rng, 5, 3) / 3.0;
    const Eigen::MatrixXd c = testgen::random_matrix(rng, 6, 3) / 3.0;
    const Tensor3 got = ccpd::cp_reconstruct({a, b, c});
    const Tensor3 want = oracle::cp_reconstruct(a, b, c);
    CHECK((got.vec() - want.vec()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cp model rejects rank mismatch") {
    CHECK_THROWS_AS(ccpd::CpModel(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3),
                                  Eigen::MatrixXd::Zero(2, 2)),
                    std::invalid_argument);
}

TEST_CASE("frobenius_norm_sq basics") {
    CHECK(ccpd::frobenius_norm_sq(Tensor3(3, 3, 3)) == 0.0);
    CHECK(ccpd::frobenius_norm_sq(Tensor3(2, 3, 4, std::vector<double>(24, 1.0))) == 24.0);

    ccpd::Rng rng(23);
    const Tensor3 t = testgen::random_tensor(rng, 4, 5, 3);
    double by_hand = 0.0;
    for (double v : t.data()) by_hand += v * v;
    CHECK(ccpd::frobenius_norm_sq(t) == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("norm of a CP model matches the Gram identity") {
    ccpd::Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd a = testgen::random_matrix(rng, 5, 4);
        const Eigen::MatrixXd b = testgen::random_matrix(rng, 6, 4);
        const Eigen::MatrixXd c = testgen::random_matrix(rng, 3, 4);
        const double direct = ccpd::frobenius_norm_sq(ccpd::cp_reconstruct({a, b, c}));
        const double gram = ((a.transpose() * a)
                                 .cwiseProduct(b.transpose() * b)
                                 .cwiseProduct(c.transpose() * c))
                                .sum();
        CHECK(direct == doctest::Approx(gram).epsilon(1e-9));
    }
}

TEST_CASE("mode_multiply agrees with explicit unfold-fold") {
    ccpd::Rng rng(31);
    const Tensor3 t = testgen::random_tensor(rng, 4, 5, 3);
    const Eigen::MatrixXd m = testgen::random_matrix(rng, 2, 5);
    const Tensor3 got = ccpd::mode_multiply(t, m, 2);
    REQUIRE(got.dims() == std::array<Index, 3>{4, 2, 3});
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 2; ++j)
            for (Index k = 0; k < 3; ++k) {
                double sum = 0.0;
                for (Index j0 = 0; j0 < 5; ++j0) sum += m(j, j0) * t(i, j0, k);
                CHECK(got(i, j, k) == doctest::Approx(sum).epsilon(1e-12));
            }
}

TEST_SUITE_END();
