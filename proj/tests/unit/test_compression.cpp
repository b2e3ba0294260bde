#include <doctest.h>

#include <cmath>

#include "ccpd/compression.hpp"
#include "ccpd/rng.hpp"
#include "ccpd/solver.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using ccpd::Index;
using ccpd::Ranks;

TEST_SUITE_BEGIN("compression");

TEST_CASE("bases are orthonormal and deterministic") {
    ccpd::Rng rng(41);
    const auto data = testgen::random_dataset(rng, 9, 11, {3, 2});
    const auto basis = ccpd::fit_basis(data, 5, 6);
    basis.validate();
    CHECK((basis.subject_basis.transpose() * basis.subject_basis -
           Eigen::MatrixXd::Identity(5, 5))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK((basis.voxel_basis.transpose() * basis.voxel_basis - Eigen::MatrixXd::Identity(6, 6))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    const auto again = ccpd::fit_basis(data, 5, 6);
    CHECK((basis.subject_basis - again.subject_basis).cwiseAbs().maxCoeff() == 0.0);
    CHECK((basis.voxel_basis - again.voxel_basis).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("low multilinear rank data survives a compression round trip") {
    ccpd::Rng rng(42);
    const Ranks ranks(2, {1, 1});
    const auto truth = testgen::random_theta(rng, 10, 12, {3, 2}, ranks);
    const auto data = testgen::exact_dataset(truth); // multilinear rank <= 4

    const auto basis = ccpd::fit_basis(data, 4, 4);
    const auto compressed = ccpd::compress(data, basis);
    for (Index k = 0; k < 2; ++k) {
        // expand back: Y ~= U1 Ytilde(1) kron stuff; check via mode products
        ccpd::Tensor3 back = ccpd::mode_multiply(compressed.tensor(k), basis.subject_basis, 1);
        back = ccpd::mode_multiply(back, basis.voxel_basis, 2);
        const double rel =
            std::sqrt((back.vec() - data.tensor(k).vec()).squaredNorm() /
                      data.tensor(k).vec().squaredNorm());
        CHECK(rel < 1e-8);
    }
}

TEST_CASE("full-dimension bases are lossless") {
    ccpd::Rng rng(43);
    const auto data = testgen::random_dataset(rng, 6, 7, {2});
    const auto basis = ccpd::fit_basis(data, 6, 7);
    const auto compressed = ccpd::compress(data, basis);
    ccpd::Tensor3 back = ccpd::mode_multiply(compressed.tensor(0), basis.subject_basis, 1);
    back = ccpd::mode_multiply(back, basis.voxel_basis, 2);
    CHECK((back.vec() - data.tensor(0).vec()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("identity bases leave data unchanged") {
    ccpd::Rng rng(44);
    const auto data = testgen::random_dataset(rng, 5, 6, {2});
    ccpd::CompressionBasis basis;
    basis.subject_basis = Eigen::MatrixXd::Identity(5, 5);
    basis.voxel_basis = Eigen::MatrixXd::Identity(6, 6);
    const auto compressed = ccpd::compress(data, basis);
    CHECK((compressed.tensor(0).vec() - data.tensor(0).vec()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compress matches an explicit mode-product oracle") {
    ccpd::Rng rng(45);
    const auto data = testgen::random_dataset(rng, 6, 7, {3});
    const auto basis = ccpd::fit_basis(data, 4, 5);
    const auto compressed = ccpd::compress(data, basis);

    const ccpd::Tensor3& y = data.tensor(0);
    const auto& us = basis.subject_basis;
    const auto& uv = basis.voxel_basis;
    for (Index a = 0; a < 4; ++a)
        for (Index b = 0; b < 5; ++b)
            for (Index t = 0; t < 3; ++t) {
                double sum = 0.0;
                for (Index i = 0; i < 6; ++i)
                    for (Index j = 0; j < 7; ++j) sum += us(i, a) * uv(j, b) * y(i, j, t);
                CHECK(compressed.tensor(0)(a, b, t) == doctest::Approx(sum).epsilon(1e-10));
            }
}

TEST_CASE("compression never increases the Frobenius norm") {
    ccpd::Rng rng(46);
    for (int trial = 0; trial < 5; ++trial) {
        const auto data = testgen::random_dataset(rng, 7, 8, {3});
        const auto basis = ccpd::fit_basis(data, 4, 4);
        const auto compressed = ccpd::compress(data, basis);
        CHECK(ccpd::frobenius_norm_sq(compressed.tensor(0)) <=
              ccpd::frobenius_norm_sq(data.tensor(0)) + 1e-9);
    }
}

TEST_CASE("rank-deficient data pads the basis with an orthonormal complement") {
    ccpd::Rng rng(47);
    const Ranks ranks(1, {1});
    const auto truth = testgen::random_theta(rng, 8, 9, {2}, ranks);
    const auto data = testgen::exact_dataset(truth); // multilinear rank <= 2
    const auto basis = ccpd::fit_basis(data, 6, 6);
    basis.validate(); // padding must stay orthonormal
}

TEST_CASE("expand_factors maps back to the original spaces") {
    ccpd::Rng rng(48);
    const Ranks ranks(1, {1, 1});
    const auto data = testgen::random_dataset(rng, 9, 10, {2, 3});
    const auto basis = ccpd::fit_basis(data, 4, 5);
    const auto compressed_data = ccpd::compress(data, basis);

    const auto theta_c = testgen::random_theta(rng, 4, 5, {2, 3}, ranks);
    const auto theta_full = ccpd::expand_factors(theta_c, basis);
    CHECK(theta_full.subjects() == 9);
    CHECK(theta_full.voxels() == 10);
    CHECK((theta_full.time_shared[0] - theta_c.time_shared[0]).cwiseAbs().maxCoeff() == 0.0);

    SUBCASE("identity basis leaves theta unchanged") {
        ccpd::CompressionBasis eye;
        eye.subject_basis = Eigen::MatrixXd::Identity(4, 4);
        eye.voxel_basis = Eigen::MatrixXd::Identity(5, 5);
        const auto same = ccpd::expand_factors(theta_c, eye);
        CHECK((same.subject_shared - theta_c.subject_shared).cwiseAbs().maxCoeff() == 0.0);
        CHECK((same.voxel_distinct[1] - theta_c.voxel_distinct[1]).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("energy accounting at lambda 0") {
        // cost(expanded, original) = cost(compressed theta, compressed data)
        //                          + sum_k (||Y_k||^2 - ||Ytilde_k||^2)
        double complement_energy = 0.0;
        for (Index k = 0; k < 2; ++k)
            complement_energy += ccpd::frobenius_norm_sq(data.tensor(k)) -
                                 ccpd::frobenius_norm_sq(compressed_data.tensor(k));
        const double full = ccpd::cost(theta_full, data, 0.0);
        const double small = ccpd::cost(theta_c, compressed_data, 0.0);
        CHECK(full == doctest::Approx(small + complement_energy).epsilon(1e-9));
    }

    SUBCASE("penalty is unchanged by expansion with orthonormal bases") {
        const auto pen_c = ccpd::cost_breakdown(theta_c, compressed_data).penalty;
        const auto pen_full = ccpd::cost_breakdown(theta_full, data).penalty;
        CHECK(pen_full == doctest::Approx(pen_c).epsilon(1e-9));
    }
}

TEST_CASE("full-dimension compress-expand is the identity on theta") {
    ccpd::Rng rng(49);
    const Ranks ranks(1, {2});
    const auto data = testgen::random_dataset(rng, 6, 7, {3});
    const auto basis = ccpd::fit_basis(data, 6, 7);
    const auto theta = testgen::random_theta(rng, 6, 7, {3}, ranks);

    // project into compressed coordinates, then expand back
    ccpd::PartitionedFactors projected = theta;
    projected.subject_shared = basis.subject_basis.transpose() * theta.subject_shared;
    projected.voxel_shared = basis.voxel_basis.transpose() * theta.voxel_shared;
    projected.subject_distinct[0] = basis.subject_basis.transpose() * theta.subject_distinct[0];
    projected.voxel_distinct[0] = basis.voxel_basis.transpose() * theta.voxel_distinct[0];
    const auto back = ccpd::expand_factors(projected, basis);
    CHECK((back.subject_shared - theta.subject_shared).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.voxel_distinct[0] - theta.voxel_distinct[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("argument validation") {
    ccpd::Rng rng(50);
    const auto data = testgen::random_dataset(rng, 5, 6, {2});
    CHECK_THROWS_AS(ccpd::fit_basis(data, 6, 3), std::invalid_argument);
    CHECK_THROWS_AS(ccpd::fit_basis(data, 0, 3), std::invalid_argument);

    const auto basis = ccpd::fit_basis(data, 3, 3);
    const auto other = testgen::random_dataset(rng, 7, 6, {2});
    CHECK_THROWS_AS(ccpd::compress(other, basis), std::invalid_argument);

    const auto theta_wrong = testgen::random_theta(rng, 4, 3, {2}, Ranks(1, {1}));
    CHECK_THROWS_AS(ccpd::expand_factors(theta_wrong, basis), std::invalid_argument);
}

TEST_SUITE_END();
