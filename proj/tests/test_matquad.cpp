#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "test_util.hpp"

using namespace kalgain;
namespace tu = kalgain::testutil;

TEST_CASE("spectral radius on known matrices", "[matquad]") {
    CHECK(spectral_radius(Matrix::Constant(1, 1, 0.9)) == Catch::Approx(0.9));
    CHECK(spectral_radius(Matrix::Identity(2, 2)) == Catch::Approx(1.0));

    Matrix rot(2, 2);
    rot << std::cos(0.1), -std::sin(0.1), std::sin(0.1), std::cos(0.1);
    CHECK(spectral_radius(rot) == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("spectral radius rejects bad input", "[matquad]") {
    CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), InputError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(spectral_radius(bad), InputError);
}

TEST_CASE("spectral radius invariances", "[matquad]") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(gen() % 5);
        const Matrix M = tu::random_matrix(gen, n, n);
        CHECK(std::abs(spectral_radius(M) - spectral_radius(M.transpose())) < 1e-12);

        // similarity transform with a well-conditioned random S
        Matrix S = tu::random_matrix(gen, n, n) + 3.0 * Matrix::Identity(n, n);
        const Matrix Msim = S * M * S.inverse();
        CHECK(std::abs(spectral_radius(M) - spectral_radius(Msim)) <
              1e-8 * std::max(1.0, spectral_radius(M)));
    }
}

TEST_CASE("is_schur predicate", "[matquad]") {
    CHECK(is_schur(Matrix::Constant(1, 1, 0.9)));
    CHECK_FALSE(is_schur(Matrix::Identity(2, 2)));
    Matrix rot(2, 2);
    rot << std::cos(0.1), -std::sin(0.1), std::sin(0.1), std::cos(0.1);
    CHECK_FALSE(is_schur(rot));
    CHECK_FALSE(is_schur(Matrix::Constant(1, 1, 0.9), 0.2));
    CHECK_THROWS_AS(is_schur(Matrix::Identity(2, 2), 1.0), ParameterError);
}

TEST_CASE("discrete Lyapunov solver on closed forms", "[matquad]") {
    SECTION("F = 0 collapses the series") {
        std::mt19937_64 gen(3);
        const Matrix W = tu::random_psd(gen, 3);
        const auto sol = solve_dlyap(Matrix::Zero(3, 3), W);
        CHECK((sol.X - W).norm() < 1e-14);
    }
    SECTION("scalar geometric series") {
        const auto sol = solve_dlyap(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0));
        CHECK(sol.X(0, 0) == Catch::Approx(4.0 / 3.0).epsilon(1e-12));

        const auto sol2 =
            solve_dlyap(Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, 1.81));
        CHECK(sol2.X(0, 0) == Catch::Approx(1.81 / 0.19).epsilon(1e-12));
    }
}

TEST_CASE("Lyapunov solver contract on random stable systems", "[matquad]") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> rho_dist(0.5, 0.95);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 6);
        const Matrix F = tu::random_with_radius(gen, n, rho_dist(gen));
        const Matrix W = tu::random_psd(gen, n);
        const auto sol = solve_dlyap(F, W);

        CHECK(sol.residual_norm <= 1e-12 * std::max(1.0, sol.X.norm()));
        CHECK((sol.X - sol.X.transpose()).norm() < 1e-12 * std::max(1.0, sol.X.norm()));
        Eigen::SelfAdjointEigenSolver<Matrix> es(sol.X, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);

        // truncated-series oracle
        Matrix series = Matrix::Zero(n, n);
        Matrix Fk = Matrix::Identity(n, n);
        for (int t = 0; t < 200; ++t) {
            series += Fk * W * Fk.transpose();
            Fk = F * Fk;
        }
        CHECK((sol.X - series).norm() < 1e-8 * std::max(1.0, series.norm()));
    }
}

TEST_CASE("Lyapunov solver near the stability boundary", "[matquad]") {
    std::mt19937_64 gen(19);
    const Matrix F = tu::random_with_radius(gen, 3, 0.999);
    const Matrix W = tu::random_psd(gen, 3);
    const auto sol = solve_dlyap(F, W);
    CHECK(sol.residual_norm <= 1e-12 * std::max(1.0, sol.X.norm()));
}

TEST_CASE("Lyapunov solver rejects unstable F", "[matquad]") {
    CHECK_THROWS_AS(solve_dlyap(Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                    InstabilityError);
    CHECK_THROWS_AS(solve_dlyap(Matrix::Constant(1, 1, 1.2), Matrix::Constant(1, 1, 1.0)),
                    InstabilityError);
}
