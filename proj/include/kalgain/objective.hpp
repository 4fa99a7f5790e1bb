#pragma once

// The optimization landscape over constant filter gains: steady-state cost
//   J(L) = tr(X H^T H) + tr(R),  X = A_L X A_L^T + Q + L R L^T,
// its finite-horizon variant, the exact gradient via paired Lyapunov solves,
// and the estimation-control duality checks (adjoint rollout and the
// per-sample pairing identity).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kalgain/errors.hpp"
#include "kalgain/kalman.hpp"
#include "kalgain/matquad.hpp"
#include "kalgain/policy.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

struct CostEvaluation {
    double J = 0.0;
    Matrix X;     // solution of X = A_L X A_L^T + Q + L R L^T
    Matrix Y;     // solution of Y = A_L^T Y A_L + H^T H (gradient path only)
    Matrix grad;  // dJ/dL under the trace inner product (gradient path only)
};

/// Steady-state cost. Throws InstabilityError for non-stabilizing L, which
/// callers interpret as J = +infinity.
inline CostEvaluation cost(const SystemModel& model, const GainPolicy& policy) {
    if (!policy.stabilizing)
        throw InstabilityError("cost: gain is not Schur stabilizing (J = +inf)");
    const Matrix W = model.Q + policy.L * model.R * policy.L.transpose();
    CostEvaluation ev;
    ev.X = solve_dlyap(policy.A_L, W).X;
    ev.J = (model.H * ev.X * model.H.transpose()).trace() + model.R.trace();
    return ev;
}

/// Finite-horizon cost matrix
///   X_T = A_L^T P0 (A_L^T)^T + sum_{t=1..T} A_L^{T-t} (Q + L R L^T) (A_L^T)^{T-t}
/// and the associated prediction cost tr(X_T H^T H) + tr(R). Stability of L is
/// not required for finite T.
struct FiniteHorizonCost {
    Matrix X_T;
    double J_T;
};

inline FiniteHorizonCost finite_horizon_cost_matrix(const SystemModel& model,
                                                    const GainPolicy& policy, int T) {
    if (T < 1) throw ParameterError("finite_horizon_cost_matrix: T must be >= 1");
    const Matrix W = model.Q + policy.L * model.R * policy.L.transpose();
    // Accumulate X_{k+1} = A_L X_k A_L^T + W from X_0 = P0.
    Matrix X = model.P0;
    for (int t = 0; t < T; ++t)
        X = policy.A_L * X * policy.A_L.transpose() + W;
    X = 0.5 * (X + X.transpose());
    const double J = (model.H * X * model.H.transpose()).trace() + model.R.trace();
    return FiniteHorizonCost{X, J};
}

/// Exact gradient of J at a stabilizing L via the paired Lyapunov solves.
/// The returned matrix is the true derivative of J under the trace inner
/// product, certified against central finite differences:
///   grad = 2 Y (L R - A_L X H^T).
inline CostEvaluation exact_gradient(const SystemModel& model, const GainPolicy& policy) {
    CostEvaluation ev = cost(model, policy);
    ev.Y = solve_dlyap(policy.A_L.transpose(), model.H.transpose() * model.H).X;
    ev.grad = 2.0 * ev.Y *
              (policy.L * model.R - policy.A_L * ev.X * model.H.transpose());
    return ev;
}

struct AdjointRollout {
    Vector a;                 // terminal adjoint state z(T)
    std::vector<Vector> z;    // z(T), z(T-1), ..., z(0)
    std::vector<Vector> u;    // u(1), ..., u(T)
    Vector b;                 // z(0)
    double lqr_cost;          // a^T X_T(L) a
};

/// Backward rollout of the adjoint system z(t) = A^T z(t+1) - H^T u(t+1)
/// under the feedback u(t) = L^T z(t), so z(t) = (A_L^T)^{T-t} a.
inline AdjointRollout adjoint_rollout(const SystemModel& model, const GainPolicy& policy,
                                      const Vector& a, int T) {
    if (T < 1) throw ParameterError("adjoint_rollout: T must be >= 1");
    if (a.size() != model.n()) throw InputError("adjoint_rollout: bad adjoint dimension");
    AdjointRollout out;
    out.a = a;
    out.z.reserve(T + 1);
    out.u.resize(T);
    out.z.push_back(a);
    Vector zt = a;
    for (int t = T; t >= 1; --t) {
        out.u[t - 1] = policy.L.transpose() * zt;
        zt = policy.A_L.transpose() * zt;  // A^T z - H^T (L^T z)
        out.z.push_back(zt);
    }
    out.b = zt;
    out.lqr_cost = a.dot(finite_horizon_cost_matrix(model, policy, T).X_T * a);
    return out;
}

struct DualityReport {
    // (i) per-sample algebraic pairing b^T m0 + sum u(t+1)^T y(t) = a^T x^_L(T)
    double pairing_max_rel_err = 0.0;
    bool pairing_ok = false;
    // (ii) Monte Carlo E|a^T x(T) - a^T x^_L(T)|^2 vs a^T X_T(L) a
    double state_mc_mean = 0.0, state_expected = 0.0, state_std_err = 0.0;
    bool state_ok = false;
    // (iii) Monte Carlo E||y(T) - y^_L(T)||^2 vs tr(X_T H^T H) + tr(R)
    double pred_mc_mean = 0.0, pred_expected = 0.0, pred_std_err = 0.0;
    bool pred_ok = false;

    bool all_ok() const { return pairing_ok && state_ok && pred_ok; }
};

/// Exercises the duality construction on simulated data. Each trajectory has
/// window length T + 1 (inputs y(0..T-1) plus the target y(T)).
inline DualityReport duality_check(const SystemModel& model, const GainPolicy& policy,
                                   const Vector& a, int T, int num_samples,
                                   std::uint64_t seed) {
    if (num_samples < 1) throw ParameterError("duality_check: need at least one sample");
    if (T < 1) throw ParameterError("duality_check: T must be >= 1");

    const PublicModel pub = public_view(model);
    const AdjointRollout adj = adjoint_rollout(model, policy, a, T);
    const FiniteHorizonCost fh = finite_horizon_cost_matrix(model, policy, T);

    DualityReport rep;
    rep.state_expected = a.dot(fh.X_T * a);
    rep.pred_expected = (model.H * fh.X_T * model.H.transpose()).trace() + model.R.trace();

    double state_sum = 0.0, state_sq = 0.0;
    double pred_sum = 0.0, pred_sq = 0.0;
    for (int i = 0; i < num_samples; ++i) {
        const Trajectory traj = simulate_trajectory(
            model, 0, T + 1, derive_seed(seed, static_cast<std::uint64_t>(i)),
            /*store_states=*/true);
        const FilterResult fr = filter_rollout(pub, policy, traj);

        // (i) pairing identity, exact up to roundoff
        double lhs = adj.b.dot(model.m0);
        for (int t = 0; t < T; ++t) lhs += adj.u[t].dot(traj.measurements[t]);
        const double rhs = a.dot(fr.x_hat);
        const double rel = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
        rep.pairing_max_rel_err = std::max(rep.pairing_max_rel_err, rel);

        // (ii) state projection error
        const double se = a.dot(traj.states->back() - fr.x_hat);
        state_sum += se * se;
        state_sq += se * se * se * se;

        // (iii) prediction error
        const double pe = fr.error.squaredNorm();
        pred_sum += pe;
        pred_sq += pe * pe;
    }
    const double N = num_samples;
    rep.pairing_ok = rep.pairing_max_rel_err <= 1e-9;
    rep.state_mc_mean = state_sum / N;
    rep.state_std_err =
        std::sqrt(std::max(0.0, state_sq / N - rep.state_mc_mean * rep.state_mc_mean) / N);
    rep.state_ok =
        std::abs(rep.state_mc_mean - rep.state_expected) <= 3.0 * rep.state_std_err + 1e-12;
    rep.pred_mc_mean = pred_sum / N;
    rep.pred_std_err =
        std::sqrt(std::max(0.0, pred_sq / N - rep.pred_mc_mean * rep.pred_mc_mean) / N);
    rep.pred_ok =
        std::abs(rep.pred_mc_mean - rep.pred_expected) <= 3.0 * rep.pred_std_err + 1e-12;
    return rep;
}

struct CoercivityProfile {
    std::vector<double> s_values;  // ray parameters, increasing
    std::vector<double> costs;     // J(L_star + s * direction)
    std::vector<double> rhos;      // spectral radius along the ray
    double s_boundary;             // largest probed s (rho(A_L) ~ 1 - 1e-4)
};

/// Evaluates J along L(s) = L_star + s * direction up to the stability
/// boundary (bisected to rho(A_L) = 1 - 1e-4).
inline CoercivityProfile coercivity_probe(const SystemModel& model,
                                          const GainPolicy& L_star,
                                          const Matrix& direction, int steps = 32) {
    if (direction.norm() == 0.0)
        throw ParameterError("coercivity_probe: direction must be nonzero");
    if (!L_star.stabilizing)
        throw InstabilityError("coercivity_probe: base gain must be stabilizing");
    if (steps < 2) throw ParameterError("coercivity_probe: need at least two steps");

    auto rho_at = [&](double s) {
        return GainPolicy::make(model.A, model.H, L_star.L + s * direction).rho;
    };
    // Bracket the boundary crossing, then bisect rho(s) to 1 - 1e-4. If the
    // whole ray stays stabilizing (possible for m >= 2) the probe walks out
    // until the growth cap instead.
    double lo = 0.0, hi = 1.0;
    constexpr double kCap = 1e8;
    while (rho_at(hi) < 1.0 && hi < kCap) {
        lo = hi;
        hi *= 2.0;
    }
    double s_end;
    if (hi >= kCap) {
        s_end = hi;  // unbounded stabilizing ray
    } else {
        const double target = 1.0 - 1e-4;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (rho_at(mid) < target ? lo : hi) = mid;
        }
        s_end = lo;
    }

    CoercivityProfile prof;
    prof.s_boundary = s_end;
    for (int i = 0; i < steps; ++i) {
        const double s = s_end * static_cast<double>(i) / (steps - 1);
        const GainPolicy p = GainPolicy::make(model.A, model.H, L_star.L + s * direction);
        if (!p.stabilizing) continue;
        prof.s_values.push_back(s);
        prof.rhos.push_back(p.rho);
        prof.costs.push_back(cost(model, p).J);
    }
    return prof;
}

}  // namespace kalgain
