#pragma once

// Ground-truth oracle: the time-varying Kalman recursion and its steady-state
// (Riccati fixed point) gain, plus the constant-gain filter rollout.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "kalgain/errors.hpp"
#include "kalgain/matquad.hpp"
#include "kalgain/policy.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

struct KalmanStep {
    Matrix L;       // time-varying gain at this covariance
    Matrix P_next;  // updated (symmetrized) error covariance
};

/// One Riccati update:
///   L   = A P H^T (H P H^T + R)^-1
///   P+  = (A - L H) P A^T + Q
/// The innovation covariance is inverted via Cholesky; a non-PD innovation
/// covariance indicates a real bug (R > 0 is assumed) and raises NumericalError.
inline KalmanStep kalman_step(const Matrix& P, const SystemModel& model) {
    const Matrix S = model.H * P * model.H.transpose() + model.R;
    Eigen::LLT<Matrix> llt(0.5 * (S + S.transpose()));
    if (llt.info() != Eigen::Success)
        throw NumericalError("kalman_step: innovation covariance is not positive definite");
    const Matrix L = llt.solve(model.H * P * model.A.transpose()).transpose();
    Matrix Pn = (model.A - L * model.H) * P * model.A.transpose() + model.Q;
    Pn = 0.5 * (Pn + Pn.transpose());
    return KalmanStep{L, Pn};
}

struct KalmanSolution {
    Matrix P_inf;    // steady-state error covariance
    Matrix L_inf;    // steady-state gain
    int iterations;
    double residual;  // ||P+ - P||_F at termination
};

/// Steady-state gain by fixed-point Riccati iteration from P = Q.
inline KalmanSolution dare_gain(const SystemModel& model, double tol = 1e-13,
                                int max_iter = 100000) {
    if (!is_observable(model.A, model.H))
        throw InputError("dare_gain: (A, H) is not observable");
    Matrix P = model.Q;
    for (int k = 0; k < max_iter; ++k) {
        KalmanStep step = kalman_step(P, model);
        const double res = (step.P_next - P).norm();
        if (res <= tol * (1.0 + P.norm())) {
            KalmanSolution sol{step.P_next, kalman_step(step.P_next, model).L, k + 1, res};
            if (!is_schur(model.A - sol.L_inf * model.H))
                throw NumericalError("dare_gain: converged gain is not stabilizing");
            return sol;
        }
        P = step.P_next;
    }
    throw ConvergenceError("dare_gain: Riccati iteration did not converge");
}

struct FilterResult {
    Vector y_hat;   // prediction of the final window measurement
    Vector error;   // e_T = y(T) - y_hat
    Vector x_hat;   // state estimate at the prediction time
};

/// Runs x^(t+1) = A x^(t) + L (y(t) - H x^(t)) from x^ = m0 over the window.
/// The last stored measurement is the prediction target: with measurements
/// y(0..W-1) the filter consumes y(0..W-2) and predicts y(W-1).
inline FilterResult filter_rollout(const PublicModel& model, const GainPolicy& policy,
                                   const Trajectory& traj) {
    if (traj.measurements.empty())
        throw InputError("filter_rollout: empty trajectory");
    if (traj.measurements.front().size() != model.m())
        throw InputError("filter_rollout: measurement dimension mismatch");
    Vector x_hat = model.m0;
    const int W = traj.window_length();
    for (int t = 0; t + 1 < W; ++t) {
        const Vector& y = traj.measurements[t];
        x_hat = model.A * x_hat + policy.L * (y - model.H * x_hat);
    }
    FilterResult out;
    out.x_hat = x_hat;
    out.y_hat = model.H * x_hat;
    out.error = traj.measurements.back() - out.y_hat;
    return out;
}

}  // namespace kalgain
