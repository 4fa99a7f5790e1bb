#pragma once

// Deterministic Gaussian sampling. The generator is mt19937_64 with an
// explicit Box-Muller transform so that streams are fully pinned by the seed
// (std::normal_distribution is implementation-defined and would not be).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <random>

#include "kalgain/errors.hpp"

namespace kalgain {

/// Algorithm name recorded in run metadata.
inline constexpr const char* kRngAlgorithm = "mt19937_64/box-muller";

/// splitmix64 finalizer; used to derive independent per-(iteration, sample)
/// seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed0, std::uint64_t a, std::uint64_t b = 0) {
    return mix_seed(seed0 ^ mix_seed(a ^ mix_seed(b)));
}

class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : gen_(seed) {}

    /// Standard normal draw (Box-Muller, pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Eigen::VectorXd standard_normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

private:
    double uniform01() {
        // 53-bit mantissa uniform in [0, 1)
        return (gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// below -tol are rejected, small negative ones are clamped to zero. Handles
/// singular covariances (e.g. Q = 0), unlike a plain Cholesky.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double tol = 1e-10) {
    if (S.rows() != S.cols()) throw InputError("psd_sqrt: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -tol * scale)
            throw InputError("psd_sqrt: matrix is not positive semidefinite");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace kalgain
