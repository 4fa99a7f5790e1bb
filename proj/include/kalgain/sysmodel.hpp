#pragma once

// LTI system description x(t+1) = A x(t) + xi(t), y(t) = H x(t) + w(t),
// observability checks, seeded trajectory simulation and the undamped
// mass-spring scenario.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "kalgain/errors.hpp"
#include "kalgain/matquad.hpp"
#include "kalgain/rng.hpp"

namespace kalgain {

struct SystemModel {
    Matrix A;   // n x n dynamics
    Matrix H;   // m x n observation
    Matrix Q;   // n x n process-noise covariance
    Matrix R;   // m x m measurement-noise covariance
    Matrix P0;  // n x n initial covariance
    Vector m0;  // n initial mean

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return H.rows(); }
};

/// The covariance-blind view of a model: everything a learner is allowed to
/// see when Q and R are withheld.
struct PublicModel {
    Matrix A;
    Matrix H;
    Vector m0;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return H.rows(); }
};

inline PublicModel public_view(const SystemModel& model) {
    return PublicModel{model.A, model.H, model.m0};
}

struct Trajectory {
    std::vector<Vector> measurements;             // y over the stored window
    std::optional<std::vector<Vector>> states;    // x, oracle mode only
    std::uint64_t seed = 0;
    int burn_in = 0;

    int window_length() const { return static_cast<int>(measurements.size()); }
};

struct ValidationReport {
    bool dims_consistent = false;
    bool q_symmetric_psd = false;
    bool r_symmetric_psd = false;
    bool p0_symmetric_psd = false;
    bool observable = false;
    int observability_rank = 0;
    double rho_A = 0.0;

    bool all_ok() const {
        return dims_consistent && q_symmetric_psd && r_symmetric_psd &&
               p0_symmetric_psd && observable;
    }
};

namespace detail {

inline bool symmetric_psd(const Matrix& S, double tol = 1e-10) {
    if (S.rows() != S.cols()) return false;
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

}  // namespace detail

/// PBH-style observability test via the rank of [H; HA; ...; HA^{n-1}].
/// Rank is computed from singular values with tolerance 1e-10 * sigma_max.
inline bool is_observable(const Matrix& A, const Matrix& H, int* rank_out = nullptr) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = H.rows();
    if (A.cols() != n || H.cols() != n)
        throw InputError("is_observable: inconsistent dimensions");
    Matrix O(m * n, n);
    Matrix HAk = H;
    for (Eigen::Index k = 0; k < n; ++k) {
        O.middleRows(k * m, m) = HAk;
        HAk = HAk * A;
    }
    Eigen::JacobiSVD<Matrix> svd(O);
    const Vector sv = svd.singularValues();
    const double thresh = 1e-10 * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    if (rank_out) *rank_out = rank;
    return rank == n;
}

/// Report-only sanity check; never throws.
inline ValidationReport validate(const SystemModel& model) {
    ValidationReport rep;
    const Eigen::Index n = model.A.rows();
    const Eigen::Index m = model.H.rows();
    rep.dims_consistent =
        n > 0 && model.A.cols() == n && model.H.cols() == n && m > 0 &&
        model.Q.rows() == n && model.Q.cols() == n && model.R.rows() == m &&
        model.R.cols() == m && model.P0.rows() == n && model.P0.cols() == n &&
        model.m0.size() == n;
    if (!rep.dims_consistent) return rep;
    rep.q_symmetric_psd = detail::symmetric_psd(model.Q);
    rep.r_symmetric_psd = detail::symmetric_psd(model.R);
    rep.p0_symmetric_psd = detail::symmetric_psd(model.P0);
    rep.observable = is_observable(model.A, model.H, &rep.observability_rank);
    rep.rho_A = spectral_radius(model.A);
    return rep;
}

/// Simulates burn_in + window_length steps of the system from
/// x(t0) ~ N(m0, P0) and keeps the last window_length measurements.
/// Deterministic given (model, burn_in, window_length, seed).
inline Trajectory simulate_trajectory(const SystemModel& model, int burn_in,
                                      int window_length, std::uint64_t seed,
                                      bool store_states = false) {
    if (window_length < 1)
        throw ParameterError("simulate_trajectory: window_length must be >= 1");
    if (burn_in < 0)
        throw ParameterError("simulate_trajectory: burn_in must be nonnegative");

    const Matrix Sq = psd_sqrt(model.Q);    // throws InputError on non-PSD input
    const Matrix Sr = psd_sqrt(model.R);
    const Matrix Sp0 = psd_sqrt(model.P0);

    GaussianSampler rng(seed);
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();

    Trajectory traj;
    traj.seed = seed;
    traj.burn_in = burn_in;
    traj.measurements.reserve(window_length);
    if (store_states) traj.states.emplace();

    Vector x = model.m0 + Sp0 * rng.standard_normal_vector(n);
    const int total = burn_in + window_length;
    for (int t = 0; t < total; ++t) {
        const Vector y = model.H * x + Sr * rng.standard_normal_vector(m);
        if (t >= burn_in) {
            traj.measurements.push_back(y);
            if (store_states) traj.states->push_back(x);
        }
        x = model.A * x + Sq * rng.standard_normal_vector(n);
    }
    return traj;
}

/// Undamped mass-spring oscillator, discretized exactly:
///   A = [[cos th, sin th / w], [-w sin th, cos th]], th = w * dt, H = [1 0].
/// Marginally stable (rho(A) = 1) and observable for th not a multiple of pi.
inline SystemModel mass_spring_model(double dt = 0.1, double omega = 1.0,
                                     double q_var = 0.1, double r_var = 0.1,
                                     double p0_var = 0.05) {
    if (!(dt > 0.0) || !(omega > 0.0))
        throw ParameterError("mass_spring_model: dt and omega must be positive");
    const double th = omega * dt;
    SystemModel model;
    model.A = Matrix(2, 2);
    model.A << std::cos(th), std::sin(th) / omega,
              -omega * std::sin(th), std::cos(th);
    model.H = Matrix(1, 2);
    model.H << 1.0, 0.0;
    model.Q = q_var * Matrix::Identity(2, 2);
    model.R = r_var * Matrix::Identity(1, 1);
    model.P0 = p0_var * Matrix::Identity(2, 2);
    model.m0 = Vector::Zero(2);
    return model;
}

}  // namespace kalgain
