#pragma once

#include <Eigen/Dense>

#include "kalgain/matquad.hpp"

namespace kalgain {

/// A candidate constant filter gain with its cached closed-loop matrix
/// A_L = A - L H and stability status.
struct GainPolicy {
    Matrix L;          // n x m gain
    Matrix A_L;        // A - L H
    double rho;        // spectral radius of A_L
    bool stabilizing;  // rho < 1

    static GainPolicy make(const Matrix& A, const Matrix& H, const Matrix& L) {
        if (L.rows() != A.rows() || L.cols() != H.rows())
            throw InputError("GainPolicy: L must be n x m");
        GainPolicy p;
        p.L = L;
        p.A_L = A - L * H;
        p.rho = spectral_radius(p.A_L);
        p.stabilizing = p.rho < 1.0;
        return p;
    }
};

}  // namespace kalgain
