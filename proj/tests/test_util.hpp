#pragma once

// Shared helpers for the test suites: canonical scalar model, random
// observable systems and random stabilizing gains.

#include <cstdint>
#include <random>

#include "kalgain/kalgain.hpp"

namespace kalgain::testutil {

/// Scalar reference model: a = 0.9, h = 1, q = r = p0 = 1, m0 = 0.
/// Closed forms used across the suites:
///   P_inf solves P^2 - 0.81 P - 1 = 0  ->  P_inf ~ 1.48390, L_inf ~ 0.53766
///   J(L) = (1 + L^2) / (1 - (0.9 - L)^2) + 1
inline SystemModel scalar_s1() {
    SystemModel m;
    m.A = Matrix::Constant(1, 1, 0.9);
    m.H = Matrix::Constant(1, 1, 1.0);
    m.Q = Matrix::Constant(1, 1, 1.0);
    m.R = Matrix::Constant(1, 1, 1.0);
    m.P0 = Matrix::Constant(1, 1, 1.0);
    m.m0 = Vector::Zero(1);
    return m;
}

inline double scalar_s1_P_inf() { return (0.81 + std::sqrt(0.81 * 0.81 + 4.0)) / 2.0; }
inline double scalar_s1_L_inf() {
    const double P = scalar_s1_P_inf();
    return 0.9 * P / (P + 1.0);
}
inline double scalar_s1_J(double L) {
    const double aL = 0.9 - L;
    return (1.0 + L * L) / (1.0 - aL * aL) + 1.0;
}

inline Matrix random_matrix(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = scale * dist(gen);
    return M;
}

inline Matrix random_psd(std::mt19937_64& gen, int n, double ridge = 0.0) {
    const Matrix G = random_matrix(gen, n, n);
    return G * G.transpose() / n + ridge * Matrix::Identity(n, n);
}

/// Random matrix rescaled to a prescribed spectral radius.
inline Matrix random_with_radius(std::mt19937_64& gen, int n, double rho_target) {
    Matrix M = random_matrix(gen, n, n);
    const double rho = spectral_radius(M);
    return M * (rho_target / rho);
}

/// Random observable system with Q, R strictly positive definite.
inline SystemModel random_observable_system(std::mt19937_64& gen, int n, int m,
                                            double rho_A = 0.95) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        SystemModel model;
        model.A = random_with_radius(gen, n, rho_A);
        model.H = random_matrix(gen, m, n);
        model.Q = random_psd(gen, n, 0.1);
        model.R = random_psd(gen, m, 0.1);
        model.P0 = random_psd(gen, n, 0.05);
        model.m0 = random_matrix(gen, n, 1, 0.5);
        if (is_observable(model.A, model.H)) return model;
    }
    throw std::runtime_error("random_observable_system: no observable draw");
}

/// Random stabilizing gain: a perturbation of the steady-state gain accepted
/// when rho(A_L) is comfortably inside the stability region. The spread is
/// shrunk on repeated rejection, and the cap is relaxed toward the radius of
/// the steady-state closed loop itself so termination is guaranteed.
inline GainPolicy random_stabilizing_gain(std::mt19937_64& gen, const SystemModel& model,
                                          double spread = 0.3, double rho_cap = 0.95) {
    const Matrix L_inf = dare_gain(model).L_inf;
    const double rho_opt = GainPolicy::make(model.A, model.H, L_inf).rho;
    const double cap = std::max(rho_cap, 0.5 * (1.0 + rho_opt));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const Matrix L =
            L_inf + random_matrix(gen, static_cast<int>(L_inf.rows()),
                                  static_cast<int>(L_inf.cols()), spread);
        const GainPolicy p = GainPolicy::make(model.A, model.H, L);
        if (p.rho <= cap) return p;
        if (attempt % 100 == 99) spread *= 0.5;
    }
    throw std::runtime_error("random_stabilizing_gain: rejection sampling failed");
}

/// Central finite difference of J with per-entry scaled step; the independent
/// oracle for every exact-gradient check.
inline Matrix fd_gradient(const SystemModel& model, const Matrix& L, double h_rel = 1e-6) {
    Matrix g(L.rows(), L.cols());
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        for (Eigen::Index j = 0; j < L.cols(); ++j) {
            const double h = h_rel * (1.0 + std::abs(L(i, j)));
            Matrix Lp = L, Lm = L;
            Lp(i, j) += h;
            Lm(i, j) -= h;
            g(i, j) =
                (cost(model, GainPolicy::make(model.A, model.H, Lp)).J -
                 cost(model, GainPolicy::make(model.A, model.H, Lm)).J) /
                (2.0 * h);
        }
    }
    return g;
}

}  // namespace kalgain::testutil
