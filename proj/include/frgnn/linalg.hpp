#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "frgnn/dense.hpp"
#include "frgnn/rng.hpp"

namespace frgnn {

struct SpectralNorm {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Largest singular value of `w` by power iteration on WᵀW.
///
/// Stops when two successive estimates agree to `tol` (relative). The start
/// vector is a fixed pseudo-random direction so results are reproducible.
inline SpectralNorm spectral_norm(const DenseMatrix& w, double tol = 1e-12, std::size_t max_iter = 10000) {
    detail::require(!w.empty(), "spectral_norm: empty matrix");
    const std::size_t n = w.cols();
    Rng rng(0x5eed);
    DenseMatrix v(n, 1);
    for (double& x : v.values()) x = rng.uniform(0.5, 1.5);
    double nv = frobenius_norm(v);
    for (double& x : v.values()) x /= nv;

    SpectralNorm out;
    double prev = -1.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const DenseMatrix wv = matmul(w, v);
        const double sigma = frobenius_norm(wv);
        out.value = sigma;
        out.iterations = it;
        if (sigma == 0.0) {
            out.converged = true;
            return out;
        }
        DenseMatrix next = matmul_tn(w, wv);
        nv = frobenius_norm(next);
        if (nv == 0.0) {
            out.converged = true;
            return out;
        }
        for (double& x : next.values()) x /= nv;
        v = std::move(next);
        if (prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) {
            out.converged = true;
            return out;
        }
        prev = sigma;
    }
    return out;
}

struct EigenPair {
    double value = 0.0;
    std::vector<double> vector;
};

/// Leading `k` eigenpairs of a symmetric positive semidefinite matrix by
/// power iteration with Hotelling deflation. Eigenvalues below
/// `floor * λ_1` are reported as zero with a zero vector.
inline std::vector<EigenPair> top_eigenpairs_psd(DenseMatrix m, std::size_t k, double tol = 1e-14,
                                                 std::size_t max_iter = 20000, double floor = 1e-12) {
    detail::require(m.rows() == m.cols(), "top_eigenpairs_psd: matrix not square");
    const std::size_t n = m.rows();
    std::vector<EigenPair> out;
    Rng rng(0xe16e);
    double lead = 0.0;
    for (std::size_t e = 0; e < k; ++e) {
        DenseMatrix v(n, 1);
        for (double& x : v.values()) x = rng.uniform(0.5, 1.5);
        double nv = frobenius_norm(v);
        for (double& x : v.values()) x /= nv;
        double lambda = 0.0;
        for (std::size_t it = 0; it < max_iter; ++it) {
            DenseMatrix mv = matmul(m, v);
            const double next = frobenius_norm(mv);
            if (next == 0.0) {
                lambda = 0.0;
                break;
            }
            for (double& x : mv.values()) x /= next;
            const bool done = std::abs(next - lambda) <= tol * next;
            lambda = next;
            v = std::move(mv);
            if (done) break;
        }
        if (e == 0) lead = lambda;
        EigenPair p;
        if (lambda <= floor * lead || lambda == 0.0) {
            p.value = 0.0;
            p.vector.assign(n, 0.0);
        } else {
            // Rayleigh quotient is a sharper eigenvalue estimate than the norm ratio.
            const DenseMatrix mv = matmul(m, v);
            double rq = 0.0;
            for (std::size_t i = 0; i < n; ++i) rq += v(i, 0) * mv(i, 0);
            p.value = rq;
            p.vector.assign(v.values().begin(), v.values().end());
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m(i, j) -= rq * p.vector[i] * p.vector[j];
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace frgnn
