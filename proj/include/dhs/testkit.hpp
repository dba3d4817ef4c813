// testkit.hpp: independent oracles and seeded generators.

#pragma once

#include "dhs/weyl.hpp"

#include <cstdint>
#include <random>

namespace dhs {

// ------------------------------ dense BVP oracle -----------------------------

struct UnsupportedError : InputError {
    using InputError::InputError;
};

struct RegularBVP {
    Site k0, ell;
    Mat H;  // m(ell-k0-1) square, Hermitian
};

inline bool is_dirichlet(const BoundaryData& g, double tol = 1e-12) {
    return g.gamma2().norm() <= tol && (g.gamma1() - identity(g.m())).norm() <= tol;
}

// Block-tridiagonal matrix of L = a S^+ + a^- S^- + b on (k0, ell) with y(k0) = y(ell) = 0.
inline RegularBVP assemble_jacobi_bvp(const HamiltonianSystem& sys, Site k0, Site ell, const BoundaryData& alpha,
                                      const BoundaryData& beta) {
    if (!sys.jacobi()) throw UnsupportedError("jacobi_bvp_oracle: system was not built by jacobi_system");
    if (!is_dirichlet(alpha) || !is_dirichlet(beta))
        throw UnsupportedError("jacobi_bvp_oracle: only Dirichlet-type data (I 0) are supported");
    if (ell - k0 < 2) throw InputError("jacobi_bvp_oracle: need at least one interior site");
    const int m = sys.m();
    const Site n = ell - k0 - 1;
    Mat H = Mat::Zero(m * n, m * n);
    for (Site i = 0; i < n; ++i) {
        const Site k = k0 + 1 + i;
        H.block(m * i, m * i, m, m) = sys.jacobi_b(k);
        if (i + 1 < n) {
            H.block(m * i, m * (i + 1), m, m) = sys.jacobi_a(k);
            H.block(m * (i + 1), m * i, m, m) = sys.jacobi_a(k).adjoint();
        }
    }
    return {k0, ell, H};
}

inline std::vector<double> jacobi_bvp_oracle(const RegularBVP& bvp) {
    Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(bvp.H), Eigen::EigenvaluesOnly);
    const RVec ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

inline std::vector<double> jacobi_bvp_oracle(const HamiltonianSystem& sys, Site k0, Site ell,
                                             const BoundaryData& alpha, const BoundaryData& beta) {
    return jacobi_bvp_oracle(assemble_jacobi_bvp(sys, k0, ell, alpha, beta));
}

// ------------------------------ det Phi scan ---------------------------------

struct DetPhiOptions {
    int grid = 4000;
    double width = 1e-10;       // golden-section bracket width
    double accept = 1e-8;       // accept when sigma_min < accept * local slope
    double rcond_min = 1e-14;
};

struct DetPhiEigenvalue {
    double lambda;
    int multiplicity;
    double sigma_min;
    double slope;
};

namespace detail {
inline RVec betaPhi_singular(const HamiltonianSystem& sys, Site k0, Site ell, const BoundaryData& alpha,
                             const BoundaryData& beta, double x, double rcond_min) {
    const FundamentalMatrix f = fundamental(sys, cplx(x, 0.0), k0, alpha, {std::min(k0, ell), std::max(k0, ell)}, rcond_min);
    return singular_values(weighted_boundary(beta, sys, ell) * f.Phi_hat(ell));
}
}  // namespace detail

// Real zeros of z -> det(beta~ Phi^(z, ell)) on [lo, hi], with multiplicities.
inline std::vector<DetPhiEigenvalue> eig_via_detPhi_detailed(const HamiltonianSystem& sys, Site k0, Site ell,
                                                             const BoundaryData& alpha, const BoundaryData& beta,
                                                             double lo, double hi, const DetPhiOptions& opt = {}) {
    if (alpha.sign_class() != SignClass::zero || beta.sign_class() != SignClass::zero)
        throw InputError("eig_via_detPhi: self-adjoint boundary data required");
    const int m = sys.m();
    auto smin = [&](double x) {
        const RVec s = detail::betaPhi_singular(sys, k0, ell, alpha, beta, x, opt.rcond_min);
        return s(m - 1);
    };
    const int n = std::max(opt.grid, 3);
    const double h = (hi - lo) / (n - 1);
    std::vector<double> xs(n), fs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = lo + h * i;
        fs[i] = smin(xs[i]);
    }
    std::vector<DetPhiEigenvalue> out;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < n; ++i) {
        const bool left = i == 0 || fs[i] < fs[i - 1];
        const bool right = i == n - 1 || fs[i] <= fs[i + 1];
        if (!(left && right)) continue;
        double a = i > 0 ? xs[i - 1] : xs[i], b = i < n - 1 ? xs[i + 1] : xs[i];
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = smin(c), fd = smin(d);
        while (b - a > opt.width) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = smin(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = smin(d);
            }
        }
        const double x = 0.5 * (a + b);
        const RVec s = detail::betaPhi_singular(sys, k0, ell, alpha, beta, x, opt.rcond_min);
        // Local slope of sigma_min from the surrounding grid values.
        double slope = 0.0;
        if (i > 0) slope = std::max(slope, fs[i - 1] / std::max(std::abs(xs[i - 1] - x), h * 1e-3));
        if (i < n - 1) slope = std::max(slope, fs[i + 1] / std::max(std::abs(xs[i + 1] - x), h * 1e-3));
        if (!(x >= lo && x <= hi)) continue;
        if (s(m - 1) < opt.accept * slope) {
            int mult = 0;
            for (Eigen::Index j = 0; j < s.size(); ++j)
                if (s(j) < opt.accept * slope) ++mult;
            out.push_back({x, mult, s(m - 1), slope});
        }
    }
    return out;
}

// Eigenvalues listed with multiplicity, ascending.
inline std::vector<double> eig_via_detPhi(const HamiltonianSystem& sys, Site k0, Site ell, const BoundaryData& alpha,
                                          const BoundaryData& beta, double lo, double hi,
                                          const DetPhiOptions& opt = {}) {
    std::vector<double> out;
    for (const auto& e : eig_via_detPhi_detailed(sys, k0, ell, alpha, beta, lo, hi, opt))
        for (int j = 0; j < e.multiplicity; ++j) out.push_back(e.lambda);
    return out;
}

// ------------------------------ Riccati fixed point --------------------------

struct FixedPointResult {
    Mat V;
    int iterations;
    double residual;
    std::vector<double> trace;  // step sizes (last few)
};

// Fixed point of the constant-coefficient Riccati recursion with -sigma Im V > 0,
// sigma = direction * sign(Im z). direction = +1 iterates the recursion backward
// (the decaying-to-the-right branch is attracting there), -1 iterates it forward.
inline FixedPointResult constant_riccati_fixed_point(const HamiltonianSystem& sys, cplx z, int direction = 1,
                                                     int max_iter = 200000, double tol = 1e-14) {
    if (z.imag() == 0.0) throw InputError("constant_riccati_fixed_point needs Im z != 0");
    const int m = sys.m();
    const Site k = sys.k_min();
    const Mat c = sys.pencil(z, k);
    const Mat c11 = c.topLeftCorner(m, m), c12 = c.topRightCorner(m, m);
    const Mat c21 = c.bottomLeftCorner(m, m), c22 = c.bottomRightCorner(m, m);
    const Mat& rho = sys.rho(k);
    const int sigma = direction * (z.imag() > 0 ? 1 : -1);
    Mat V = cplx(0, -sigma) * identity(m);
    FixedPointResult res{V, 0, 0.0, {}};
    auto fwd = [&](const Mat& Vp) {
        const Mat inner = rho * Vp.partialPivLu().solve(rho) - c22;
        return Mat(c11 + c12 * inner.partialPivLu().solve(c21));
    };
    auto bwd = [&](const Mat& Vn) {
        const Mat X = c21 * (Vn - c11).partialPivLu().solve(c12);
        return Mat(rho * (X + c22).partialPivLu().solve(rho));
    };
    for (int it = 1; it <= max_iter; ++it) {
        const Mat Vn = direction > 0 ? bwd(V) : fwd(V);
        const double step = (Vn - V).norm();
        V = Vn;
        res.iterations = it;
        if (res.trace.size() >= 8) res.trace.erase(res.trace.begin());
        res.trace.push_back(step);
        if (!all_finite(V)) throw NumericalError("constant_riccati_fixed_point: iterate diverged");
        // Converged (remaining error estimated from the observed rate), or no net
        // progress over the trace window at the roundoff floor of the map.
        const double scale = 1.0 + V.norm();
        const std::size_t n = res.trace.size();
        const double q = n >= 2 && res.trace[n - 2] > 0 ? step / res.trace[n - 2] : 1.0;
        const bool converged = step <= tol * scale || (q < 1.0 && step * q / (1.0 - q) <= tol * scale);
        const bool floor = n == 8 && step <= 1e-10 * scale && res.trace.back() >= res.trace.front();
        if (converged || floor) {
            res.V = V;
            res.residual = (V - fwd(V)).norm();
            return res;
        }
    }
    std::string msg = "constant_riccati_fixed_point: no convergence; last steps:";
    for (double s : res.trace) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3g", s);
        msg += buf;
    }
    throw NumericalError(msg);
}

// m = 1 closed form: -c22 V^2 + (rho^2 + c11 c22 - c12 c21) V - c11 rho^2 = 0, root with -sigma Im V > 0.
inline cplx scalar_riccati_root(const HamiltonianSystem& sys, cplx z, int direction = 1) {
    if (sys.m() != 1) throw InputError("scalar_riccati_root needs m = 1");
    const Mat c = sys.pencil(z, sys.k_min());
    const cplx c11 = c(0, 0), c12 = c(0, 1), c21 = c(1, 0), c22 = c(1, 1);
    const cplx r2 = sys.rho(sys.k_min())(0, 0) * sys.rho(sys.k_min())(0, 0);
    const cplx qa = -c22, qb = r2 + c11 * c22 - c12 * c21, qc = -c11 * r2;
    const int sigma = direction * (z.imag() > 0 ? 1 : -1);
    std::array<cplx, 2> roots;
    if (std::abs(qa) == 0.0) {
        roots = {-qc / qb, -qc / qb};
    } else {
        const cplx disc = std::sqrt(qb * qb - 4.0 * qa * qc);
        // Avoid cancellation: q = -(b + sign * sqrt(disc)) / 2
        const cplx s = (std::real(std::conj(qb) * disc) >= 0) ? disc : -disc;
        const cplx qq = -0.5 * (qb + s);
        roots = {qq / qa, qc / qq};
    }
    for (cplx r : roots)
        if (-sigma * r.imag() > 0) return r;
    throw NumericalError("scalar_riccati_root: no root with the required sign");
}

// Free scalar Jacobi oracle: root of V^2 - zV + z = 0 with Im V < 0 (z in C_+).
inline cplx free_jacobi_root(cplx z) {
    const cplx d = std::sqrt(z * z - 4.0 * z);
    const cplx a = 0.5 * (z + d), b = 0.5 * (z - d);
    const int sigma = z.imag() > 0 ? 1 : -1;
    return (-sigma * a.imag() > 0) ? a : b;
}

// ------------------------------ random systems -------------------------------

enum class SystemClass { jacobi, dirac, general_A12zero };

inline std::string to_string(SystemClass c) {
    switch (c) {
        case SystemClass::jacobi: return "jacobi";
        case SystemClass::dirac: return "dirac";
        case SystemClass::general_A12zero: return "general_A12zero";
    }
    return "?";
}

namespace detail {

inline Mat random_complex(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat X(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) X(i, j) = scale * cplx(u(rng), u(rng));
    return X;
}

inline Mat random_hermitian(int m, std::mt19937_64& rng, double scale = 1.0) {
    return herm_part(random_complex(m, m, rng, scale));
}

// Hermitian with spectrum in [lo, hi].
inline Mat random_hpd(int m, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    const Mat W = haar_unitary(m, rng);
    RVec d(m);
    for (int i = 0; i < m; ++i) d(i) = u(rng);
    return herm_part(Mat(W * d.cast<cplx>().asDiagonal() * W.adjoint()));
}

// Invertible with singular values in [lo, hi].
inline Mat random_invertible(int m, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    const Mat W = haar_unitary(m, rng), V = haar_unitary(m, rng);
    RVec d(m);
    for (int i = 0; i < m; ++i) d(i) = u(rng);
    return W * d.cast<cplx>().asDiagonal() * V.adjoint();
}

}  // namespace detail

struct RandomSystemOptions {
    int max_retries = 20;
    Extension extension = Extension::constant_edge;
    bool unit_rho = false;  // general class: rho = I instead of a random SPD matrix
};

inline HamiltonianSystem random_system(int m, Interval window, std::uint64_t seed, SystemClass cls,
                                       const RandomSystemOptions& opt = {}) {
    if (m < 1 || window.size() < 1) throw InputError("random_system: bad size");
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
        std::vector<Mat> A, B, rho, p, q, b;
        for (Site k = window.lo; k <= window.hi; ++k) {
            switch (cls) {
                case SystemClass::jacobi:
                    p.push_back(detail::random_hpd(m, rng, 0.5, 2.0));
                    q.push_back(detail::random_hermitian(m, rng, 1.0));
                    break;
                case SystemClass::dirac:
                    b.push_back(detail::random_invertible(m, rng, 0.5, 2.0));
                    break;
                case SystemClass::general_A12zero: {
                    const Mat A11 = detail::random_hpd(m, rng, 0.5, 2.0);
                    const Mat A22 = detail::random_hpd(m, rng, 0.0, 1.0);
                    const Mat B12 = detail::random_invertible(m, rng, 0.5, 2.0);
                    A.push_back(block_diag(A11, A22));
                    B.push_back(block2x2(detail::random_hermitian(m, rng, 0.5), B12, B12.adjoint(),
                                         detail::random_hermitian(m, rng, 0.5)));
                    rho.push_back(opt.unit_rho ? identity(m) : detail::random_hpd(m, rng, 0.5, 2.0));
                    break;
                }
            }
        }
        std::optional<HamiltonianSystem> sys;
        switch (cls) {
            case SystemClass::jacobi: sys.emplace(jacobi_system(p, q, window.lo, opt.extension)); break;
            case SystemClass::dirac: sys.emplace(dirac_system(b, window.lo, opt.extension)); break;
            case SystemClass::general_A12zero:
                sys.emplace(m, window.lo, std::move(A), std::move(B), std::move(rho), opt.extension);
                break;
        }
        bool ok = validate_pointwise(*sys, window).ok();
        const Interval probe{window.lo, std::min(window.hi, window.lo + 1)};
        for (cplx z : default_z_sample()) {
            if (!ok) break;
            ok = check_wellposed(*sys, z, window).ok() && check_definiteness(*sys, z, probe).definite;
        }
        if (ok) return *sys;
    }
    throw NumericalError("random_system: retries exhausted");
}

// Self-adjoint boundary data (cos D W^*, sin D W^*) from the given generator.
inline BoundaryData random_selfadjoint_boundary(int m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(0.0, M_PI);
    const Mat W = haar_unitary(m, rng);
    Mat C = Mat::Zero(m, m), S = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const double t = ang(rng);
        C(i, i) = std::cos(t);
        S(i, i) = std::sin(t);
    }
    Mat g(m, 2 * m);
    g << C * W.adjoint(), S * W.adjoint();
    return make_boundary_data(g);
}

// Boundary data with sigma Im(beta1 beta2^*) > 0: beta = (G, G(H - i sigma P)) with P > 0.
inline BoundaryData random_interior_boundary(int m, int sigma, std::mt19937_64& rng) {
    const Mat G = detail::random_invertible(m, rng, 0.5, 2.0);
    const Mat H = detail::random_hermitian(m, rng, 1.0);
    const Mat P = detail::random_hpd(m, rng, 0.3, 1.5);
    Mat g(m, 2 * m);
    g << G, G * (H - cplx(0, sigma) * P);
    return make_boundary_data(g);
}

}  // namespace dhs
