#pragma once

// Dense small-matrix kernels: spectral radius, Schur-stability predicate and
// the discrete Lyapunov solver that backs every cost and gradient evaluation.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "kalgain/errors.hpp"

namespace kalgain {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require_square_finite(const Matrix& M, const char* what) {
    if (M.rows() == 0 || M.rows() != M.cols())
        throw InputError(std::string(what) + ": matrix must be square and non-empty");
    if (!M.allFinite())
        throw InputError(std::string(what) + ": matrix has non-finite entries");
}

/// Largest eigenvalue modulus of a (small, dense) square matrix.
inline double spectral_radius(const Matrix& M) {
    require_square_finite(M, "spectral_radius");
    if (M.rows() == 1) return std::abs(M(0, 0));
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// True iff rho(M) < 1 - margin.
inline bool is_schur(const Matrix& M, double margin = 0.0) {
    if (!(margin >= 0.0 && margin < 1.0))
        throw ParameterError("is_schur: margin must lie in [0, 1)");
    return spectral_radius(M) < 1.0 - margin;
}

struct LyapunovSolution {
    Matrix X;              // symmetric solution of X = F X F^T + W
    double residual_norm;  // ||X - F X F^T - W||_F
    int iterations;        // Smith doubling steps taken
};

/// Solves the discrete Lyapunov equation X = F X F^T + W for Schur-stable F
/// by Smith doubling: X <- X + F X F^T, F <- F^2. The limit is the series
/// sum_t F^t W (F^T)^t. The result is symmetrized before return.
///
/// Throws InstabilityError when rho(F) >= 1; callers treat the associated
/// cost as +infinity in that case.
inline LyapunovSolution solve_dlyap(const Matrix& F, const Matrix& W, double tol = 1e-12) {
    require_square_finite(F, "solve_dlyap");
    if (W.rows() != F.rows() || W.cols() != F.cols())
        throw InputError("solve_dlyap: W must match F in size");
    if (!is_schur(F))
        throw InstabilityError("solve_dlyap: rho(F) >= 1, equation has no stable solution");

    Matrix X = 0.5 * (W + W.transpose());
    Matrix Fk = F;
    int iters = 0;
    constexpr int kMaxDoublings = 200;
    while (Fk.norm() >= 1e-16 && iters < kMaxDoublings) {
        X = X + Fk * X * Fk.transpose();
        Fk = Fk * Fk;
        ++iters;
    }
    X = 0.5 * (X + X.transpose());

    auto residual = [&](const Matrix& Xc) {
        return (Xc - F * Xc * F.transpose() - W).norm();
    };
    double res = residual(X);
    // One defect-correction pass for ill-conditioned cases (rho near 1).
    if (res > tol * std::max(1.0, X.norm())) {
        Matrix D = W - (X - F * X * F.transpose());
        Matrix C = 0.5 * (D + D.transpose());
        Matrix Fc = F;
        for (int j = 0; j < kMaxDoublings && Fc.norm() >= 1e-16; ++j) {
            C = C + Fc * C * Fc.transpose();
            Fc = Fc * Fc;
        }
        X = 0.5 * ((X + C) + (X + C).transpose());
        res = residual(X);
    }
    return LyapunovSolution{X, res, iters};
}

}  // namespace kalgain
