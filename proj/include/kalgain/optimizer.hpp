#pragma once

// Policy-update loops: exact-gradient descent with Armijo backtracking,
// explicit-Euler gradient flow, and measurement-only minibatch SGD. Every
// accepted iterate is Schur stabilizing; candidates leaving the stability
// region are rejected by step halving.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "kalgain/errors.hpp"
#include "kalgain/kalman.hpp"
#include "kalgain/objective.hpp"
#include "kalgain/policy.hpp"
#include "kalgain/sgd_estimator.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

struct StepPolicy {
    enum class Kind { Fixed, Backtracking, Decaying };
    Kind kind = Kind::Backtracking;
    double eta0 = 0.05;
    double backtrack_factor = 0.5;   // in (0, 1)
    double armijo_c = 1e-4;          // in (0, 1)
    double decay_exponent = 0.6;     // eta_k = eta0 / (1 + k)^decay_exponent

    double decayed(int k) const {
        return eta0 / std::pow(1.0 + static_cast<double>(k), decay_exponent);
    }
};

struct IterationRecord {
    int k;
    Matrix L;
    double J;          // oracle cost when available, else surrogate
    double grad_norm;  // ||grad J||_F or ||g^||_F
    double eta;
    double rho;        // spectral radius of A_{L_k}
    double gain_err;   // ||L_k - L_inf||_F; NaN when no oracle gain
};

struct OptimizerTrace {
    enum class Status { Converged, MaxIter, Failed };
    std::vector<IterationRecord> iterations;
    Status terminal_status = Status::MaxIter;

    const Matrix& final_gain() const { return iterations.back().L; }
};

/// A stabilizing initial gain built from (A, H) alone: zero when A is already
/// Schur, otherwise the steady-state gain for the surrogate covariances
/// Q = I, R = I.
inline GainPolicy initial_gain(const Matrix& A, const Matrix& H) {
    if (!is_observable(A, H)) throw InputError("initial_gain: (A, H) is not observable");
    const Eigen::Index n = A.rows(), m = H.rows();
    if (is_schur(A)) return GainPolicy::make(A, H, Matrix::Zero(n, m));
    SystemModel surrogate{A, H, Matrix::Identity(n, n), Matrix::Identity(m, m),
                          Matrix::Identity(n, n), Vector::Zero(n)};
    return GainPolicy::make(A, H, dare_gain(surrogate).L_inf);
}

inline GainPolicy initial_gain(const SystemModel& model) {
    return initial_gain(model.A, model.H);
}

struct StepResult {
    GainPolicy next;
    double eta;
};

/// Armijo backtracking with stability rejection: halves eta while the
/// candidate L - eta g leaves the stabilizing set or violates
/// J(L - eta g) <= J(L) - armijo_c * eta * ||g||_F^2.
inline StepResult backtracking_step(const SystemModel& model, const GainPolicy& policy,
                                    const Matrix& g, const StepPolicy& step) {
    if (!policy.stabilizing)
        throw InstabilityError("backtracking_step: current gain is not stabilizing");
    if (!g.allFinite()) throw InputError("backtracking_step: non-finite gradient");
    const double gnorm2 = g.squaredNorm();
    if (gnorm2 == 0.0) return StepResult{policy, step.eta0};

    const double J0 = cost(model, policy).J;
    double eta = step.eta0;
    for (int tries = 0; tries < 60; ++tries) {
        const GainPolicy cand = GainPolicy::make(model.A, model.H, policy.L - eta * g);
        if (cand.stabilizing) {
            const double Jc = cost(model, cand).J;
            if (Jc <= J0 - step.armijo_c * eta * gnorm2) return StepResult{cand, eta};
        }
        eta *= step.backtrack_factor;
    }
    throw StepFailureError("backtracking_step: 60 rejections; gradient inconsistent with J");
}

namespace detail {

inline IterationRecord make_record(int k, const GainPolicy& p, double J, double gnorm,
                                   double eta, const std::optional<Matrix>& L_inf) {
    double gain_err = std::numeric_limits<double>::quiet_NaN();
    if (L_inf) gain_err = (p.L - *L_inf).norm();
    return IterationRecord{k, p.L, J, gnorm, eta, p.rho, gain_err};
}

}  // namespace detail

/// Exact-gradient descent L_{k+1} = L_k - eta_k grad J(L_k). Stops when
/// ||grad J||_F <= grad_tol or after max_iter steps. With Fixed step kind the
/// Armijo condition is skipped but stability rejection still halves eta.
inline OptimizerTrace gd_run(const SystemModel& model, const GainPolicy& L0,
                             const StepPolicy& step, double grad_tol, int max_iter,
                             const std::optional<Matrix>& L_inf = std::nullopt) {
    if (!L0.stabilizing) throw InstabilityError("gd_run: initial gain is not stabilizing");
    OptimizerTrace trace;
    GainPolicy p = L0;
    for (int k = 0; k <= max_iter; ++k) {
        const CostEvaluation ev = exact_gradient(model, p);
        const double gnorm = ev.grad.norm();
        if (gnorm <= grad_tol) {
            trace.iterations.push_back(detail::make_record(k, p, ev.J, gnorm, 0.0, L_inf));
            trace.terminal_status = OptimizerTrace::Status::Converged;
            return trace;
        }
        if (k == max_iter) break;
        double eta;
        GainPolicy next = p;
        if (step.kind == StepPolicy::Kind::Backtracking) {
            StepResult sr = backtracking_step(model, p, ev.grad, step);
            next = sr.next;
            eta = sr.eta;
        } else {
            eta = (step.kind == StepPolicy::Kind::Decaying) ? step.decayed(k) : step.eta0;
            GainPolicy cand = GainPolicy::make(model.A, model.H, p.L - eta * ev.grad);
            int tries = 0;
            while (!cand.stabilizing && tries++ < 60) {
                eta *= step.backtrack_factor;
                cand = GainPolicy::make(model.A, model.H, p.L - eta * ev.grad);
            }
            if (!cand.stabilizing)
                throw StepFailureError("gd_run: could not find a stabilizing step");
            next = cand;
        }
        trace.iterations.push_back(detail::make_record(k, p, ev.J, gnorm, eta, L_inf));
        p = next;
    }
    {
        const CostEvaluation ev = exact_gradient(model, p);
        trace.iterations.push_back(
            detail::make_record(max_iter, p, ev.J, ev.grad.norm(), 0.0, L_inf));
    }
    trace.terminal_status = OptimizerTrace::Status::MaxIter;
    return trace;
}

/// Explicit-Euler integration of the gradient flow dL/ds = -grad J(L) with
/// step h and stability rejection. Identical to fixed-step gd_run with
/// eta = h by construction.
inline OptimizerTrace gf_run(const SystemModel& model, const GainPolicy& L0, double step_h,
                             double grad_tol, int max_iter,
                             const std::optional<Matrix>& L_inf = std::nullopt) {
    if (!(step_h > 0.0)) throw ParameterError("gf_run: step_h must be positive");
    StepPolicy step;
    step.kind = StepPolicy::Kind::Fixed;
    step.eta0 = step_h;
    return gd_run(model, L0, step, grad_tol, max_iter, L_inf);
}

/// Seeded source of fresh measurement trajectories for SGD. Simulation reads
/// the full model (the data-generating process knows Q and R); the learner
/// side only ever sees the resulting measurements.
class TrajectorySource {
public:
    TrajectorySource(SystemModel model, int burn_in, int window_length,
                     std::uint64_t seed0)
        : model_(std::move(model)), burn_in_(burn_in), window_length_(window_length),
          seed0_(seed0) {}

    Trajectory draw(int iteration, int sample) const {
        return simulate_trajectory(model_, burn_in_, window_length_,
                                   derive_seed(seed0_, static_cast<std::uint64_t>(iteration),
                                               static_cast<std::uint64_t>(sample)));
    }

    int window_length() const { return window_length_; }
    int burn_in() const { return burn_in_; }

private:
    SystemModel model_;
    int burn_in_;
    int window_length_;
    std::uint64_t seed0_;
};

/// Smallest B with rho^B <= target, capped.
inline int mixing_length(double rho, double target = 1e-8, int cap = 1000) {
    if (rho <= 0.0) return 1;
    if (rho >= 1.0) return cap;
    const int B = static_cast<int>(std::ceil(std::log(target) / std::log(rho)));
    return std::min(std::max(B, 1), cap);
}

/// Minibatch SGD on the prediction error. Each iteration draws M fresh
/// trajectories, averages the per-sample gradients and applies the schedule
/// (default decaying). Steps leaving the stabilizing set are rejected by
/// halving. J is recorded through cost_oracle when provided (oracle mode),
/// else as the empirical batch prediction error.
inline OptimizerTrace sgd_run(const PublicModel& model, const TrajectorySource& data,
                              const GainPolicy& L0, const StepPolicy& schedule,
                              int batch_size, int iters,
                              const std::function<double(const Matrix&)>& cost_oracle = {},
                              const std::optional<Matrix>& L_inf = std::nullopt) {
    if (!L0.stabilizing) throw InstabilityError("sgd_run: initial gain is not stabilizing");
    if (batch_size < 1) throw ParameterError("sgd_run: batch size must be >= 1");
    if (iters < 1) throw ParameterError("sgd_run: need at least one iteration");

    OptimizerTrace trace;
    trace.iterations.reserve(iters + 1);
    GainPolicy p = L0;
    for (int k = 0; k < iters; ++k) {
        std::vector<Trajectory> batch;
        batch.reserve(batch_size);
        double batch_err = 0.0;
        for (int i = 0; i < batch_size; ++i) batch.push_back(data.draw(k, i));
        MinibatchGradient mb = minibatch_gradient(model, p, batch);
        if (!cost_oracle) {
            for (const Trajectory& t : batch) batch_err += prediction_error(model, p, t);
            batch_err /= batch_size;
        }
        const double J = cost_oracle ? cost_oracle(p.L) : batch_err;

        double eta = (schedule.kind == StepPolicy::Kind::Fixed) ? schedule.eta0
                                                                : schedule.decayed(k);
        GainPolicy cand = GainPolicy::make(model.A, model.H, p.L - eta * mb.mean_grad);
        int tries = 0;
        while (!cand.stabilizing && tries++ < 60) {
            eta *= 0.5;
            cand = GainPolicy::make(model.A, model.H, p.L - eta * mb.mean_grad);
        }
        if (!cand.stabilizing)
            throw StepFailureError("sgd_run: repeated rejection, no stabilizing step");

        trace.iterations.push_back(
            detail::make_record(k, p, J, mb.mean_grad.norm(), eta, L_inf));
        p = cand;
    }
    const double Jf = cost_oracle ? cost_oracle(p.L)
                                  : trace.iterations.back().J;  // carry last surrogate
    trace.iterations.push_back(detail::make_record(iters, p, Jf, 0.0, 0.0, L_inf));
    trace.terminal_status = OptimizerTrace::Status::MaxIter;
    return trace;
}

}  // namespace kalgain
