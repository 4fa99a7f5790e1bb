#pragma once

// Measurement-only stochastic gradient: per-trajectory gradient of the
// squared prediction error eps(L, Y) = ||y(T) - y^_L(T)||^2 and minibatch
// averaging. Reads only A, H, m0 and the measurements; never Q or R.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "kalgain/errors.hpp"
#include "kalgain/kalman.hpp"
#include "kalgain/policy.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

struct SampleGradient {
    Matrix grad;          // n x m
    Vector error_vector;  // e_T(L)
    int truncation_depth; // number of A_L powers actually summed
};

/// Squared prediction error of the constant-gain filter on one trajectory.
/// This is the function whose per-trajectory gradient sample_gradient returns;
/// it doubles as the deterministic finite-difference target in tests.
inline double prediction_error(const PublicModel& model, const GainPolicy& policy,
                               const Trajectory& traj) {
    return filter_rollout(model, policy, traj).error.squaredNorm();
}

/// Gradient of eps(L, Y) with respect to L:
///   -2 sum_t (A_L^T)^t H^T e y^T(T-t-1)
///   +2 sum_t sum_{k=1..t} (A_L^T)^{t-k} H^T e y^T(T-t-1) L^T (A_L^T)^{k-1} H^T,
/// with the sums truncated at the available past measurements and additionally
/// once ||A_L^t||_F drops below trunc_tol. With a window of W stored
/// measurements the last one is the prediction target and W - 1 past
/// measurements feed the sums.
inline SampleGradient sample_gradient(const PublicModel& model, const GainPolicy& policy,
                                      const Trajectory& traj, double trunc_tol = 1e-12) {
    if (!policy.stabilizing)
        throw InstabilityError("sample_gradient: gain is not Schur stabilizing");
    const int W = traj.window_length();
    if (W < 1) throw InputError("sample_gradient: empty trajectory");

    const FilterResult fr = filter_rollout(model, policy, traj);
    const Vector& e = fr.error;
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();

    const int N = W - 1;  // past measurements available to the sums
    // Powers of A_L^T, truncated once negligible.
    const Matrix ALt = policy.A_L.transpose();
    std::vector<Matrix> pow_ALt;  // (A_L^T)^0 .. (A_L^T)^{D-1}
    Matrix Pk = Matrix::Identity(n, n);
    int D = 0;
    while (D < N && Pk.norm() >= trunc_tol) {
        pow_ALt.push_back(Pk);
        Pk = ALt * Pk;
        ++D;
    }

    SampleGradient out;
    out.error_vector = e;
    out.truncation_depth = D;
    out.grad = Matrix::Zero(n, m);
    if (D == 0 || e.squaredNorm() == 0.0) return out;

    const Vector He = model.H.transpose() * e;  // H^T e
    std::vector<Vector> v(D);                   // v_t = (A_L^T)^t H^T e
    for (int t = 0; t < D; ++t) v[t] = pow_ALt[t] * He;

    // First sum: -2 sum_{t=0..} v_t y(T-t-1)^T. Stored index of y(T-t-1) is W-2-t.
    for (int t = 0; t < D; ++t)
        out.grad.noalias() -= 2.0 * v[t] * traj.measurements[W - 2 - t].transpose();

    // Second sum, reindexed with j = t - k:
    //   +2 sum_{k>=1} [ sum_{j>=0, j+k<=N-1} v_j y(T-j-k-1)^T ] L^T (A_L^T)^{k-1} H^T
    for (int k = 1; k <= N - 1 && k - 1 < D; ++k) {
        Matrix S = Matrix::Zero(n, m);
        const int jmax = std::min(N - 1 - k, D - 1);
        for (int j = 0; j <= jmax; ++j)
            S.noalias() += v[j] * traj.measurements[W - 2 - j - k].transpose();
        const Matrix w_k = policy.L.transpose() * pow_ALt[k - 1] * model.H.transpose();
        out.grad.noalias() += 2.0 * S * w_k;
    }
    return out;
}

struct MinibatchGradient {
    Matrix mean_grad;         // n x m
    Matrix per_entry_std_err; // n x m
    int batch_size;
};

/// Arithmetic mean of sample_gradient over a batch, with per-entry standard
/// error. Summation runs in stored (seed) order so the reduction is
/// deterministic.
inline MinibatchGradient minibatch_gradient(const PublicModel& model,
                                            const GainPolicy& policy,
                                            const std::vector<Trajectory>& batch,
                                            double trunc_tol = 1e-12) {
    if (batch.empty()) throw ParameterError("minibatch_gradient: empty batch");
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();
    Matrix sum = Matrix::Zero(n, m);
    Matrix sumsq = Matrix::Zero(n, m);
    for (const Trajectory& traj : batch) {
        const Matrix g = sample_gradient(model, policy, traj, trunc_tol).grad;
        sum += g;
        sumsq += g.cwiseProduct(g);
    }
    const double M = static_cast<double>(batch.size());
    MinibatchGradient out;
    out.batch_size = static_cast<int>(batch.size());
    out.mean_grad = sum / M;
    if (batch.size() == 1) {
        out.per_entry_std_err = Matrix::Zero(n, m);
    } else {
        const Matrix var =
            (sumsq / M - out.mean_grad.cwiseProduct(out.mean_grad)).cwiseMax(0.0);
        out.per_entry_std_err = (var / M).cwiseSqrt();
    }
    return out;
}

}  // namespace kalgain
