#pragma once

// Scenario orchestration: configuration parsing, (T, M, seed) sweeps of the
// optimizers, per-cell trace CSVs and an aggregate JSON record. Everything
// emitted is a deterministic function of (config, seed0).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kalgain/errors.hpp"
#include "kalgain/kalman.hpp"
#include "kalgain/model_io.hpp"
#include "kalgain/objective.hpp"
#include "kalgain/optimizer.hpp"
#include "kalgain/sgd_estimator.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
    SystemModel model;
    json model_echo;  // the "model" object as configured, echoed into outputs
    std::string mode = "sgd";  // simulate|kalman|gd|gf|sgd|grad-check|check-duality|sweep
    std::vector<int> T_grid{10, 50, 200};
    std::vector<int> M_grid{16, 64, 256};
    int num_seeds = 20;
    std::uint64_t seed0 = 1;
    StepPolicy step = default_sgd_step();
    int K = 2000;            // SGD iteration budget
    double grad_tol = 1e-9;  // GD/GF convergence threshold
    int max_iter = 500;      // GD/GF iteration cap
    int burn_in = -1;        // -1: auto from the mixing rate of the initial gain
    int window_length = 100; // simulate mode
    int num_samples = 20000; // check-duality Monte Carlo budget
    bool oracle = true;
    std::string out_dir = "out";

    static StepPolicy default_sgd_step() {
        StepPolicy s;
        s.kind = StepPolicy::Kind::Decaying;
        s.eta0 = 0.05;
        s.decay_exponent = 0.6;
        return s;
    }

    static ExperimentConfig from_json(const json& j);
    json to_json() const;

    int resolved_burn_in() const {
        if (burn_in >= 0) return burn_in;
        return mixing_length(initial_gain(model).rho);
    }
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("model")) {
        const json& jm = j["model"];
        if (jm.contains("mass_spring")) {
            const json& ms = jm["mass_spring"];
            cfg.model = mass_spring_model(
                ms.value("dt", 0.1), ms.value("omega", 1.0), ms.value("q_var", 0.1),
                ms.value("r_var", 0.1), ms.value("p0_var", 0.05));
        } else if (jm.contains("inline")) {
            cfg.model = model_from_json(jm["inline"]);
        } else {
            throw ConfigError("model: expected 'mass_spring' or 'inline'");
        }
        cfg.model_echo = jm;
    } else {
        cfg.model = mass_spring_model();
        cfg.model_echo = json{{"mass_spring", json::object()}};
    }
    cfg.mode = j.value("mode", cfg.mode);
    if (j.contains("T_grid")) cfg.T_grid = j["T_grid"].get<std::vector<int>>();
    if (j.contains("M_grid")) cfg.M_grid = j["M_grid"].get<std::vector<int>>();
    if (cfg.T_grid.empty()) throw ConfigError("T_grid: must be nonempty");
    if (cfg.M_grid.empty()) throw ConfigError("M_grid: must be nonempty");
    for (int T : cfg.T_grid)
        if (T < 2) throw ConfigError("T_grid: entries must be >= 2");
    for (int M : cfg.M_grid)
        if (M < 1) throw ConfigError("M_grid: entries must be >= 1");
    cfg.num_seeds = j.value("num_seeds", cfg.num_seeds);
    if (cfg.num_seeds < 1) throw ConfigError("num_seeds: must be >= 1");
    cfg.seed0 = j.value("seed0", cfg.seed0);
    if (j.contains("optimizer")) {
        const json& jo = j["optimizer"];
        const std::string kind = jo.value("kind", std::string("decaying"));
        if (kind == "fixed")
            cfg.step.kind = StepPolicy::Kind::Fixed;
        else if (kind == "backtracking")
            cfg.step.kind = StepPolicy::Kind::Backtracking;
        else if (kind == "decaying")
            cfg.step.kind = StepPolicy::Kind::Decaying;
        else
            throw ConfigError("optimizer.kind: unknown value '" + kind + "'");
        cfg.step.eta0 = jo.value("eta0", cfg.step.eta0);
        cfg.step.backtrack_factor = jo.value("backtrack_factor", cfg.step.backtrack_factor);
        cfg.step.armijo_c = jo.value("armijo_c", cfg.step.armijo_c);
        cfg.step.decay_exponent = jo.value("decay_exponent", cfg.step.decay_exponent);
        cfg.K = jo.value("K", cfg.K);
        cfg.grad_tol = jo.value("grad_tol", cfg.grad_tol);
        cfg.max_iter = jo.value("max_iter", cfg.max_iter);
        if (!(cfg.step.eta0 > 0.0)) throw ConfigError("optimizer.eta0: must be positive");
    }
    cfg.burn_in = j.value("burn_in", cfg.burn_in);
    cfg.window_length = j.value("window_length", cfg.window_length);
    cfg.num_samples = j.value("num_samples", cfg.num_samples);
    cfg.oracle = j.value("oracle", cfg.oracle);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    return cfg;
}

inline json ExperimentConfig::to_json() const {
    const char* kind = step.kind == StepPolicy::Kind::Fixed          ? "fixed"
                       : step.kind == StepPolicy::Kind::Backtracking ? "backtracking"
                                                                     : "decaying";
    return json{{"schema_version", kSchemaVersion},
                {"model", model_echo},
                {"mode", mode},
                {"T_grid", T_grid},
                {"M_grid", M_grid},
                {"num_seeds", num_seeds},
                {"seed0", seed0},
                {"optimizer",
                 json{{"kind", kind},
                      {"eta0", step.eta0},
                      {"backtrack_factor", step.backtrack_factor},
                      {"armijo_c", step.armijo_c},
                      {"decay_exponent", step.decay_exponent},
                      {"K", K},
                      {"grad_tol", grad_tol},
                      {"max_iter", max_iter}}},
                {"burn_in", burn_in},
                {"window_length", window_length},
                {"num_samples", num_samples},
                {"oracle", oracle},
                {"out_dir", out_dir}};
}

/// Per-iteration statistics of the normalized error J(L_k) / J(L_0) across a
/// set of traces, plus final-gain statistics. Traces of unequal length are
/// aligned to the shortest, flagged by truncated.
struct AggregateSummary {
    std::vector<double> mean, stddev, min, max;
    Matrix final_gain_mean, final_gain_std;
    bool truncated = false;
};

inline AggregateSummary aggregate(const std::vector<OptimizerTrace>& traces) {
    if (traces.empty()) throw ParameterError("aggregate: need at least one trace");
    size_t len = traces.front().iterations.size();
    for (const auto& tr : traces) {
        if (tr.iterations.size() != len) {
            len = std::min(len, tr.iterations.size());
        }
    }
    AggregateSummary agg;
    for (const auto& tr : traces) agg.truncated |= tr.iterations.size() != len;

    const double S = static_cast<double>(traces.size());
    agg.mean.resize(len);
    agg.stddev.resize(len);
    agg.min.resize(len);
    agg.max.resize(len);
    for (size_t k = 0; k < len; ++k) {
        double s = 0.0;
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (const auto& tr : traces) {
            const double norm = tr.iterations[k].J / tr.iterations.front().J;
            s += norm;
            mn = std::min(mn, norm);
            mx = std::max(mx, norm);
        }
        agg.mean[k] = s / S;
        double dev2 = 0.0;  // two-pass variance avoids cancellation
        for (const auto& tr : traces) {
            const double d = tr.iterations[k].J / tr.iterations.front().J - agg.mean[k];
            dev2 += d * d;
        }
        agg.stddev[k] = std::sqrt(dev2 / S);
        agg.min[k] = mn;
        agg.max[k] = mx;
    }
    const Matrix& g0 = traces.front().final_gain();
    Matrix gs = Matrix::Zero(g0.rows(), g0.cols());
    for (const auto& tr : traces) gs += tr.final_gain();
    agg.final_gain_mean = gs / S;
    Matrix gdev2 = Matrix::Zero(g0.rows(), g0.cols());
    for (const auto& tr : traces) {
        const Matrix d = tr.final_gain() - agg.final_gain_mean;
        gdev2 += d.cwiseProduct(d);
    }
    agg.final_gain_std = (gdev2 / S).cwiseSqrt();
    return agg;
}

inline void trace_to_csv(const OptimizerTrace& trace, std::ostream& os,
                         bool with_gain_err) {
    os << "k,J,J_norm,grad_norm,eta,rho,gain_err\n";
    const double J0 = trace.iterations.front().J;
    for (const IterationRecord& rec : trace.iterations) {
        os << rec.k << "," << format_double(rec.J) << "," << format_double(rec.J / J0)
           << "," << format_double(rec.grad_norm) << "," << format_double(rec.eta) << ","
           << format_double(rec.rho) << ",";
        if (with_gain_err && std::isfinite(rec.gain_err)) os << format_double(rec.gain_err);
        os << "\n";
    }
}

struct RunRecord {
    json record;  // full aggregate document, also written to out_dir/aggregate.json
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open output file: " + path.string());
    os << body;
}

inline json summary_to_json(const AggregateSummary& agg) {
    return json{{"mean", agg.mean},
                {"std", agg.stddev},
                {"min", agg.min},
                {"max", agg.max},
                {"final_gain_mean", matrix_to_json(agg.final_gain_mean)},
                {"final_gain_std", matrix_to_json(agg.final_gain_std)},
                {"truncated_to_shortest", agg.truncated}};
}

}  // namespace detail

/// Executes the configured mode and writes one trace CSV per (T, M, seed)
/// cell plus an aggregate JSON. Optimizer failures are recorded per cell and
/// do not abort the sweep.
inline RunRecord run_scenario(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(cfg.out_dir);

    json rec;
    rec["schema_version"] = kSchemaVersion;
    rec["config"] = cfg.to_json();
    rec["library_version"] = kLibraryVersion;
    rec["rng_algorithm"] = kRngAlgorithm;
    rec["grids_are_artifact_defaults"] = true;

    const ValidationReport vrep = validate(cfg.model);
    if (!vrep.dims_consistent) throw ConfigError("model: inconsistent dimensions");

    if (cfg.mode == "simulate") {
        const int burn = cfg.resolved_burn_in();
        json files = json::array();
        for (int s = 0; s < cfg.num_seeds; ++s) {
            const Trajectory traj =
                simulate_trajectory(cfg.model, burn, cfg.window_length,
                                    derive_seed(cfg.seed0, s), cfg.oracle);
            std::ostringstream body;
            trajectory_to_csv(traj, body);
            const std::string name = "trajectory_seed" + std::to_string(s) + ".csv";
            detail::write_file(fs::path(cfg.out_dir) / name, body.str());
            files.push_back(name);
        }
        rec["burn_in"] = burn;
        rec["files"] = files;
    } else if (cfg.mode == "kalman") {
        const KalmanSolution sol = dare_gain(cfg.model);
        rec["P_inf"] = matrix_to_json(sol.P_inf);
        rec["L_inf"] = matrix_to_json(sol.L_inf);
        rec["rho_closed_loop"] = spectral_radius(cfg.model.A - sol.L_inf * cfg.model.H);
        rec["iterations"] = sol.iterations;
        rec["residual"] = sol.residual;
    } else if (cfg.mode == "gd" || cfg.mode == "gf") {
        const GainPolicy L0 = initial_gain(cfg.model);
        const KalmanSolution sol = dare_gain(cfg.model);
        StepPolicy step = cfg.step;
        if (cfg.mode == "gd") step.kind = StepPolicy::Kind::Backtracking;
        OptimizerTrace trace =
            cfg.mode == "gd"
                ? gd_run(cfg.model, L0, step, cfg.grad_tol, cfg.max_iter, sol.L_inf)
                : gf_run(cfg.model, L0, step.eta0, cfg.grad_tol, cfg.max_iter, sol.L_inf);
        std::ostringstream body;
        trace_to_csv(trace, body, /*with_gain_err=*/true);
        const std::string name = "trace_" + cfg.mode + ".csv";
        detail::write_file(fs::path(cfg.out_dir) / name, body.str());
        rec["files"] = json::array({name});
        rec["final_gain"] = matrix_to_json(trace.final_gain());
        rec["final_J"] = trace.iterations.back().J;
        rec["final_gain_err"] = (trace.final_gain() - sol.L_inf).norm();
        rec["converged"] = trace.terminal_status == OptimizerTrace::Status::Converged;
    } else if (cfg.mode == "sgd" || cfg.mode == "sweep") {
        // sgd runs the first grid cell; sweep runs the full (T, M) grid.
        std::vector<int> Ts = cfg.mode == "sweep" ? cfg.T_grid
                                                  : std::vector<int>{cfg.T_grid.front()};
        std::vector<int> Ms = cfg.mode == "sweep" ? cfg.M_grid
                                                  : std::vector<int>{cfg.M_grid.front()};
        const PublicModel pub = public_view(cfg.model);
        const GainPolicy L0 = initial_gain(cfg.model);
        const int burn = cfg.resolved_burn_in();
        // Sealed oracle channel: J(L_k) for reporting only, never fed to the
        // learner update.
        std::function<double(const Matrix&)> cost_oracle =
            [&](const Matrix& L) {
                return cost(cfg.model, GainPolicy::make(cfg.model.A, cfg.model.H, L)).J;
            };
        const KalmanSolution sol = dare_gain(cfg.model);

        json cells = json::array();
        json groups = json::array();
        for (int T : Ts) {
            for (int M : Ms) {
                std::vector<OptimizerTrace> traces;
                for (int s = 0; s < cfg.num_seeds; ++s) {
                    const std::uint64_t cell_seed =
                        derive_seed(cfg.seed0, (static_cast<std::uint64_t>(T) << 32) | M, s);
                    TrajectorySource source(cfg.model, burn, T, cell_seed);
                    json cell{{"T", T}, {"M", M}, {"seed_index", s}};
                    try {
                        OptimizerTrace trace =
                            sgd_run(pub, source, L0, cfg.step, M, cfg.K, cost_oracle,
                                    sol.L_inf);
                        std::ostringstream body;
                        trace_to_csv(trace, body, /*with_gain_err=*/cfg.oracle);
                        const std::string name = "trace_T" + std::to_string(T) + "_M" +
                                                 std::to_string(M) + "_seed" +
                                                 std::to_string(s) + ".csv";
                        detail::write_file(fs::path(cfg.out_dir) / name, body.str());
                        cell["file"] = name;
                        cell["final_gain"] = matrix_to_json(trace.final_gain());
                        cell["final_J"] = trace.iterations.back().J;
                        cell["final_gain_err"] = (trace.final_gain() - sol.L_inf).norm();
                        traces.push_back(std::move(trace));
                    } catch (const std::exception& e) {
                        cell["error"] = e.what();  // recorded, not fatal to the sweep
                    }
                    cells.push_back(cell);
                }
                if (!traces.empty()) {
                    json g{{"T", T}, {"M", M}};
                    g["normalized_error"] = detail::summary_to_json(aggregate(traces));
                    groups.push_back(g);
                }
            }
        }
        rec["burn_in"] = burn;
        rec["cells"] = cells;
        rec["aggregates"] = groups;
        rec["L_inf"] = matrix_to_json(sol.L_inf);
    } else if (cfg.mode == "grad-check") {
        // Exact gradient vs central finite differences at perturbations of the
        // reference gain.
        const KalmanSolution sol = dare_gain(cfg.model);
        GaussianSampler rng(cfg.seed0);
        json checks = json::array();
        bool all_ok = true;
        for (int trial = 0; trial < 10; ++trial) {
            Matrix L = sol.L_inf;
            for (Eigen::Index i = 0; i < L.rows(); ++i)
                for (Eigen::Index j = 0; j < L.cols(); ++j)
                    L(i, j) += 0.2 * rng.normal();
            GainPolicy p = GainPolicy::make(cfg.model.A, cfg.model.H, L);
            if (!p.stabilizing) continue;
            const Matrix g = exact_gradient(cfg.model, p).grad;
            double max_rel = 0.0;
            for (Eigen::Index i = 0; i < L.rows(); ++i) {
                for (Eigen::Index j = 0; j < L.cols(); ++j) {
                    const double h = 1e-6 * (1.0 + std::abs(L(i, j)));
                    Matrix Lp = L, Lm = L;
                    Lp(i, j) += h;
                    Lm(i, j) -= h;
                    const double fd =
                        (cost(cfg.model, GainPolicy::make(cfg.model.A, cfg.model.H, Lp)).J -
                         cost(cfg.model, GainPolicy::make(cfg.model.A, cfg.model.H, Lm)).J) /
                        (2.0 * h);
                    max_rel = std::max(max_rel, std::abs(g(i, j) - fd) /
                                                    std::max(1.0, std::abs(fd)));
                }
            }
            const bool ok = max_rel <= 1e-6;
            all_ok &= ok;
            checks.push_back(json{{"trial", trial}, {"max_rel_err", max_rel}, {"pass", ok}});
        }
        rec["checks"] = checks;
        rec["pass"] = all_ok;
        if (!all_ok) throw NumericalError("grad-check failed");
    } else if (cfg.mode == "check-duality") {
        const GainPolicy L0 = initial_gain(cfg.model);
        Vector a = cfg.model.H.row(0).transpose();
        const DualityReport drep = duality_check(cfg.model, L0, a, cfg.T_grid.front(),
                                                 cfg.num_samples, cfg.seed0);
        rec["pairing_max_rel_err"] = drep.pairing_max_rel_err;
        rec["pairing_pass"] = drep.pairing_ok;
        rec["state_mc_mean"] = drep.state_mc_mean;
        rec["state_expected"] = drep.state_expected;
        rec["state_std_err"] = drep.state_std_err;
        rec["state_pass"] = drep.state_ok;
        rec["pred_mc_mean"] = drep.pred_mc_mean;
        rec["pred_expected"] = drep.pred_expected;
        rec["pred_std_err"] = drep.pred_std_err;
        rec["pred_pass"] = drep.pred_ok;
        rec["pass"] = drep.all_ok();
        if (!drep.all_ok()) throw NumericalError("check-duality failed");
    } else {
        throw ConfigError("mode: unknown value '" + cfg.mode + "'");
    }

    rec["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    detail::write_file(fs::path(cfg.out_dir) / "aggregate.json", rec.dump(2) + "\n");
    return RunRecord{rec};
}

}  // namespace kalgain
