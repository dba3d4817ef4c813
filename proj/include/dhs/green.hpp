// green.hpp: whole-line and half-line Green's matrices, the nonhomogeneous
// system  S_rho y = (zA + B) y + A f,  and the checks that certify them.
//
// All three kernels share one shape. With roles P ("right") and N ("left"):
//
//   K(k,l) = P(z,k) w N(conj z,l)^*            k > l
//          = N(z,k) w P(conj z,l)^*            k < l
//          = ( p1 w n1^#   p1 w n2^# )         k = l,   F^#(k) = F(conj z,k)^*
//            ( n2 w p1^#   n2 w p2^# )
//
//   whole      P = U_+, N = U_-, w = (M_- - M_+)^{-1}
//   half_plus  P = U_+, N = Phi, w =  I
//   half_minus P = Phi, N = U_-, w = -I
//
// In every case w = (N^(conj z,k)^* J_rho P^(z,k))^{-1}.

#pragma once

#include "dhs/weyl.hpp"

#include <memory>

namespace dhs {

enum class KernelVariant { whole, half_plus, half_minus };

inline std::string to_string(KernelVariant v) {
    switch (v) {
        case KernelVariant::whole: return "whole";
        case KernelVariant::half_plus: return "half_plus";
        case KernelVariant::half_minus: return "half_minus";
    }
    return "?";
}

class GreensKernel {
public:
    KernelVariant variant;
    cplx z;           // as requested (may be in the lower half plane)
    Site k0;
    Interval window;  // sites where K may be evaluated
    Mat M_plus, M_minus;
    Mat omega;        // coupling matrix at the upper-half-plane point

    // Role trajectories at zu = (z or conj z, whichever has Im > 0) and at conj(zu),
    // plus the fundamental trajectories.
    Trajectory P, Pc, N, Nc, Psi, Psic;
    std::shared_ptr<const HamiltonianSystem> sys;

    bool conjugated() const { return z.imag() < 0; }
    cplx z_upper() const { return conjugated() ? std::conj(z) : z; }
    int m() const { return sys->m(); }

    // Sites y may be summed over for solve_nonhomogeneous.
    Interval source_range() const {
        switch (variant) {
            case KernelVariant::half_plus: return {k0 + 1, window.hi};
            case KernelVariant::half_minus: return {window.lo, k0 - 1};
            default: return window;
        }
    }

    Mat operator()(Site k, Site l) const {
        if (conjugated()) return upper(l, k).adjoint();
        return upper(k, l);
    }

    // Alternative fundamental-matrix form (whole-line kernel, k != l).
    Mat alternative(Site k, Site l) const {
        if (variant != KernelVariant::whole) throw InputError("alternative representation exists for the whole-line kernel");
        if (k == l) throw InputError("alternative representation needs k != l");
        if (conjugated()) return alt_upper(l, k).adjoint();
        return alt_upper(k, l);
    }

    // N^(conj z,k)^* J_rho(k) P^(z,k); constant in k and equal to omega^{-1}.
    Mat wronskian(Site k) const { return Nc.hat(k).adjoint() * sys->J_rho(k) * P.hat(k); }

private:
    Mat upper(Site k, Site l) const {
        check(k);
        check(l);
        if (k > l) return P.plain(k) * omega * Nc.plain(l).adjoint();
        if (k < l) return N.plain(k) * omega * Pc.plain(l).adjoint();
        const int mm = m();
        const Mat p1 = P.psi1(k), n2 = N.psi2(k);
        const Mat p1c = Pc.psi1(k), p2c = Pc.psi2(k), n1c = Nc.psi1(k), n2c = Nc.psi2(k);
        Mat out(2 * mm, 2 * mm);
        out << p1 * omega * n1c.adjoint(), p1 * omega * n2c.adjoint(), n2 * omega * p1c.adjoint(),
            n2 * omega * p2c.adjoint();
        return out;
    }

    Mat alt_upper(Site k, Site l) const {
        const Mat& Mp = M_plus;
        const Mat& Mm = M_minus;
        const Mat& w = omega;
        Mat mid(2 * m(), 2 * m());
        if (k > l)
            mid << w, w * Mm, Mp * w, Mp * w * Mm;
        else
            mid << w, w * Mp, Mm * w, Mm * w * Mp;
        return Psi.plain(k) * mid * Psic.plain(l).adjoint();
    }

    void check(Site k) const {
        if (!window.contains(k))
            throw DomainError("kernel not available at k=" + std::to_string(k) + " (window [" +
                              std::to_string(window.lo) + "," + std::to_string(window.hi) + "])");
    }
};

namespace detail {

// Trajectories are stored one site beyond the window on both sides so that the
// difference expression can be applied at the window edges.
inline Interval padded(Interval w, Site k0) { return {std::min(w.lo, k0) - 1, std::max(w.hi, k0) + 1}; }

inline void require_upper_signs(const Mat& M_plus, const Mat* M_minus) {
    if (M_plus.size() && !(min_herm_eig(im_part(M_plus)) > 0.0))
        throw InputError("kernel: Im M_+ must be positive definite for z in the upper half plane");
    if (M_minus && M_minus->size() && !(max_herm_eig(im_part(*M_minus)) < 0.0))
        throw InputError("kernel: Im M_- must be negative definite for z in the upper half plane");
}

inline GreensKernel assemble(KernelVariant v, const HamiltonianSystem& sys, cplx z, Site k0, const BoundaryData& alpha,
                             Interval window, const Mat& Mp, const Mat& Mm, std::optional<Trajectory> P,
                             std::optional<Trajectory> Pc, std::optional<Trajectory> N, std::optional<Trajectory> Nc,
                             double rcond_min) {
    GreensKernel K;
    K.variant = v;
    K.z = z;
    K.k0 = k0;
    K.window = window;
    K.M_plus = Mp;
    K.M_minus = Mm;
    K.sys = std::make_shared<const HamiltonianSystem>(sys);
    const cplx zu = K.z_upper();
    const Interval pad = padded(window, k0);
    const FundamentalMatrix F = fundamental(sys, zu, k0, alpha, pad, rcond_min);
    const FundamentalMatrix Fc = fundamental(sys, std::conj(zu), k0, alpha, pad, rcond_min);
    K.Psi = F.traj;
    K.Psic = Fc.traj;
    const Mat phi_sel = vstack(zeros(sys.m(), sys.m()), identity(sys.m()));
    K.P = P ? *P : F.traj.times(phi_sel);
    K.Pc = Pc ? *Pc : Fc.traj.times(phi_sel);
    K.N = N ? *N : F.traj.times(phi_sel);
    K.Nc = Nc ? *Nc : Fc.traj.times(phi_sel);
    K.omega = inverse_checked(K.wronskian(k0), rcond_min, "kernel: singular coupling");
    return K;
}

inline void require_upper_M(cplx z, Mat& M) {
    if (z.imag() < 0) M = M.adjoint().eval();  // M(conj z) = M(z)^*
}

}  // namespace detail

// From M-values: U_+/- = Psi (I; M_+/-) and U_+/-(conj z) = Psi(conj z) (I; M_+/-^*).
// M values are those at the requested z.
inline GreensKernel build_whole_kernel(const HamiltonianSystem& sys, cplx z, Site k0, const BoundaryData& alpha,
                                       Mat M_plus, Mat M_minus, Interval window, double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    detail::require_upper_M(z, M_plus);
    detail::require_upper_M(z, M_minus);
    detail::require_upper_signs(M_plus, &M_minus);
    if (rcond(M_minus - M_plus) < rcond_min) throw InputError("kernel: M_- - M_+ singular");
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    const FundamentalMatrix F = fundamental(sys, zu, k0, alpha, pad, rcond_min);
    const FundamentalMatrix Fc = fundamental(sys, std::conj(zu), k0, alpha, pad, rcond_min);
    GreensKernel K = detail::assemble(KernelVariant::whole, sys, z, k0, alpha, window, M_plus, M_minus,
                                      weyl_solution(F, M_plus), weyl_solution(Fc, M_plus.adjoint()),
                                      weyl_solution(F, M_minus), weyl_solution(Fc, M_minus.adjoint()), rcond_min);
    return K;
}

// From far-end boundary data: U_+ is started at ell_plus > k0 with beta_plus and U_- at
// ell_minus < k0 with beta_minus, each propagated toward k0 (the stable direction).
inline GreensKernel build_whole_kernel_from_endpoints(const HamiltonianSystem& sys, cplx z, Site k0,
                                                      const BoundaryData& alpha, Site ell_plus,
                                                      const BoundaryData& beta_plus, Site ell_minus,
                                                      const BoundaryData& beta_minus, Interval window,
                                                      double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    if (!(ell_minus < k0 && k0 < ell_plus)) throw InputError("kernel: need ell_minus < k0 < ell_plus");
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    auto up = weyl_solution_from_endpoint(sys, zu, k0, alpha, ell_plus, beta_plus, pad, rcond_min);
    auto upc = weyl_solution_from_endpoint(sys, std::conj(zu), k0, alpha, ell_plus, beta_plus, pad, rcond_min);
    auto um = weyl_solution_from_endpoint(sys, zu, k0, alpha, ell_minus, beta_minus, pad, rcond_min);
    auto umc = weyl_solution_from_endpoint(sys, std::conj(zu), k0, alpha, ell_minus, beta_minus, pad, rcond_min);
    detail::require_upper_signs(up.M, &um.M);
    Mat Mp = up.M, Mm = um.M;
    if (z.imag() < 0) {
        Mp = upc.M;
        Mm = umc.M;
    }
    return detail::assemble(KernelVariant::whole, sys, z, k0, alpha, window, Mp, Mm, up.U, upc.U, um.U, umc.U,
                            rcond_min);
}

inline GreensKernel build_half_kernel_plus(const HamiltonianSystem& sys, cplx z, Site k0, const BoundaryData& alpha,
                                           Mat M_plus, Interval window, double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    if (window.lo < k0) throw InputError("half_plus kernel window must lie in [k0, inf)");
    detail::require_upper_M(z, M_plus);
    detail::require_upper_signs(M_plus, nullptr);
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    const FundamentalMatrix F = fundamental(sys, zu, k0, alpha, pad, rcond_min);
    const FundamentalMatrix Fc = fundamental(sys, std::conj(zu), k0, alpha, pad, rcond_min);
    return detail::assemble(KernelVariant::half_plus, sys, z, k0, alpha, window, M_plus, Mat(),
                            weyl_solution(F, M_plus), weyl_solution(Fc, M_plus.adjoint()), std::nullopt, std::nullopt,
                            rcond_min);
}

inline GreensKernel build_half_kernel_plus_from_endpoint(const HamiltonianSystem& sys, cplx z, Site k0,
                                                         const BoundaryData& alpha, Site ell_plus,
                                                         const BoundaryData& beta_plus, Interval window,
                                                         double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    if (window.lo < k0 || ell_plus <= k0) throw InputError("half_plus kernel lives on [k0, inf)");
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    auto up = weyl_solution_from_endpoint(sys, zu, k0, alpha, ell_plus, beta_plus, pad, rcond_min);
    auto upc = weyl_solution_from_endpoint(sys, std::conj(zu), k0, alpha, ell_plus, beta_plus, pad, rcond_min);
    detail::require_upper_signs(up.M, nullptr);
    return detail::assemble(KernelVariant::half_plus, sys, z, k0, alpha, window, z.imag() > 0 ? up.M : upc.M, Mat(),
                            up.U, upc.U, std::nullopt, std::nullopt, rcond_min);
}

inline GreensKernel build_half_kernel_minus(const HamiltonianSystem& sys, cplx z, Site k0, const BoundaryData& alpha,
                                            Mat M_minus, Interval window, double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    if (window.hi > k0) throw InputError("half_minus kernel window must lie in (-inf, k0]");
    detail::require_upper_M(z, M_minus);
    detail::require_upper_signs(Mat(), &M_minus);
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    const FundamentalMatrix F = fundamental(sys, zu, k0, alpha, pad, rcond_min);
    const FundamentalMatrix Fc = fundamental(sys, std::conj(zu), k0, alpha, pad, rcond_min);
    return detail::assemble(KernelVariant::half_minus, sys, z, k0, alpha, window, Mat(), M_minus, std::nullopt,
                            std::nullopt, weyl_solution(F, M_minus), weyl_solution(Fc, M_minus.adjoint()), rcond_min);
}

inline GreensKernel build_half_kernel_minus_from_endpoint(const HamiltonianSystem& sys, cplx z, Site k0,
                                                          const BoundaryData& alpha, Site ell_minus,
                                                          const BoundaryData& beta_minus, Interval window,
                                                          double rcond_min = 1e-12) {
    if (z.imag() == 0.0) throw InputError("kernel needs Im z != 0");
    if (window.hi > k0 || ell_minus >= k0) throw InputError("half_minus kernel lives on (-inf, k0]");
    const cplx zu = z.imag() > 0 ? z : std::conj(z);
    const Interval pad = detail::padded(window, k0);
    auto um = weyl_solution_from_endpoint(sys, zu, k0, alpha, ell_minus, beta_minus, pad, rcond_min);
    auto umc = weyl_solution_from_endpoint(sys, std::conj(zu), k0, alpha, ell_minus, beta_minus, pad, rcond_min);
    detail::require_upper_signs(Mat(), &um.M);
    return detail::assemble(KernelVariant::half_minus, sys, z, k0, alpha, window, Mat(), z.imag() > 0 ? um.M : umc.M,
                            std::nullopt, std::nullopt, um.U, umc.U, rcond_min);
}

// ------------------------------ certificates ---------------------------------

// ((S_rho - zA - B) K(., l))(k) - delta_{kl} I; needs k-1, k, k+1 in the window.
inline Mat delta_residual(const GreensKernel& K, Site k, Site l) {
    const HamiltonianSystem& s = *K.sys;
    const int m = s.m();
    const Mat Kp = K(k + 1, l), Km = K(k - 1, l), K0 = K(k, l);
    Mat shifted(2 * m, 2 * m);
    shifted << s.rho(k) * Kp.bottomRows(m), s.rho(k - 1) * Km.topRows(m);
    Mat r = shifted - s.pencil(K.z, k) * K0;
    if (k == l) r -= identity(2 * m);
    return r;
}

struct DeltaReport {
    double max_residual{0.0};  // max over tested (k, l) of |residual| / max(1, |K| nearby)
    Site worst_k{0}, worst_l{0};
};

inline DeltaReport delta_check(const GreensKernel& K, Interval ks, Interval ls) {
    DeltaReport rep;
    for (Site l = ls.lo; l <= ls.hi; ++l)
        for (Site k = ks.lo; k <= ks.hi; ++k) {
            const double scale = std::max({1.0, K(k, l).norm(), K(k + 1, l).norm(), K(k - 1, l).norm()});
            const double r = delta_residual(K, k, l).norm() / scale;
            if (r > rep.max_residual) rep = {r, k, l};
        }
    return rep;
}

// max_k |wronskian(k) - omega^{-1}| / |omega^{-1}| over the window.
inline double omega_constancy(const GreensKernel& K) {
    const Mat winv = K.omega.inverse();
    double e = 0.0;
    for (Site k = K.window.lo; k <= K.window.hi; ++k)
        e = std::max(e, (K.wronskian(k) - winv).norm() / std::max(1.0, winv.norm()));
    return e;
}

// ------------------------------ nonhomogeneous solve -------------------------

struct NonhomogeneousSolve {
    Interval range;        // sites where y is stored (kernel window)
    Interval source;       // sites summed over
    std::vector<Mat> y;    // 2m x r per site
    std::vector<double> residuals;  // at interior sites of the source range
    double max_residual{0.0};
    double energy_y{0.0};  // sum y^* A y (trace)
    double energy_f{0.0};  // sum f^* A f (trace)
    double l2_bound{0.0};  // (Im z)^{-2} energy_f
    bool l2_ok{false};
    double kernel_tail{0.0};  // |sum_l K A K^*| at the window centre, finiteness report

    const Mat& at(Site k) const { return y.at(static_cast<std::size_t>(k - range.lo)); }
};

// y(k) = sum_l K(k,l) A(l) f(l); f is indexed from K.source_range().lo.
inline NonhomogeneousSolve solve_nonhomogeneous(const GreensKernel& K, const std::vector<Mat>& f,
                                                double l2_slack = 1e-6) {
    const HamiltonianSystem& s = *K.sys;
    NonhomogeneousSolve out;
    out.source = K.source_range();
    if (static_cast<Site>(f.size()) != out.source.size())
        throw InputError("solve_nonhomogeneous: f must cover the kernel source range");
    out.range = K.window;
    if (K.variant == KernelVariant::half_minus) out.range.hi = K.k0 + 1;  // y^(k0) needs y2(k0+1)
    if (K.variant == KernelVariant::half_plus) out.range.lo = K.k0;
    auto fat = [&](Site l) -> const Mat& { return f[static_cast<std::size_t>(l - out.source.lo)]; };
    const Eigen::Index r = f.front().cols();
    std::vector<Mat> Af;
    for (Site l = out.source.lo; l <= out.source.hi; ++l) Af.push_back(s.A(l) * fat(l));

    // Kernel evaluation outside the window is only needed at k0 + 1 for half_minus.
    GreensKernel Kx = K;
    Kx.window = {std::min(K.window.lo, out.range.lo), std::max(K.window.hi, out.range.hi)};
    for (Site k = out.range.lo; k <= out.range.hi; ++k) {
        Mat yk = Mat::Zero(2 * s.m(), r);
        for (Site l = out.source.lo; l <= out.source.hi; ++l)
            yk += Kx(k, l) * Af[static_cast<std::size_t>(l - out.source.lo)];
        out.y.push_back(yk);
    }
    // Residual of the nonhomogeneous system at sites with both neighbours stored.
    const int m = s.m();
    for (Site k = std::max(out.source.lo, out.range.lo + 1); k <= std::min(out.source.hi, out.range.hi - 1); ++k) {
        Mat shifted(2 * m, r);
        shifted << s.rho(k) * out.at(k + 1).bottomRows(m), s.rho(k - 1) * out.at(k - 1).topRows(m);
        const Mat res = shifted - s.pencil(K.z, k) * out.at(k) - Af[static_cast<std::size_t>(k - out.source.lo)];
        const double scale = std::max({1.0, out.at(k).norm(), fat(k).norm()});
        out.residuals.push_back(res.norm() / scale);
        out.max_residual = std::max(out.max_residual, out.residuals.back());
    }
    for (Site k = out.range.lo; k <= out.range.hi; ++k)
        if (out.source.contains(k) || K.variant == KernelVariant::whole)
            out.energy_y += (out.at(k).adjoint() * s.A(k) * out.at(k)).trace().real();
    for (Site l = out.source.lo; l <= out.source.hi; ++l) out.energy_f += (fat(l).adjoint() * s.A(l) * fat(l)).trace().real();
    out.l2_bound = out.energy_f / (K.z.imag() * K.z.imag());
    out.l2_ok = out.energy_y <= out.l2_bound + l2_slack;
    const Site mid = (K.window.lo + K.window.hi) / 2;
    Mat tail = Mat::Zero(2 * m, 2 * m);
    for (Site l = out.source.lo; l <= out.source.hi; ++l) {
        const Mat kl = K(mid, l);
        tail += kl * s.A(l) * kl.adjoint();
    }
    out.kernel_tail = tail.norm();
    return out;
}

// alpha~ y^(k0) with y^(k0) = (y1(k0); y2(k0+1)).
inline Mat boundary_residual(const GreensKernel& K, const NonhomogeneousSolve& sol, const BoundaryData& alpha) {
    const int m = K.m();
    const Mat yhat = vstack(sol.at(K.k0).topRows(m), sol.at(K.k0 + 1).bottomRows(m));
    return weighted_boundary(alpha, *K.sys, K.k0) * yhat;
}

// U_+/-^(conj z, k)^* J_rho(k) y^(k): side = +1 uses U_+, side = -1 uses U_-.
inline Mat boundary_flux(const GreensKernel& K, const NonhomogeneousSolve& sol, Site k, int side) {
    const int m = K.m();
    const Trajectory* U = nullptr;
    const bool up = !K.conjugated();
    if (side > 0) {
        if (K.variant == KernelVariant::half_minus) throw InputError("half_minus kernel has no U_+");
        U = up ? &K.Pc : &K.P;
    } else {
        if (K.variant == KernelVariant::half_plus) throw InputError("half_plus kernel has no U_-");
        U = up ? &K.Nc : &K.N;
    }
    const Mat yhat = vstack(sol.at(k).topRows(m), sol.at(k + 1).bottomRows(m));
    return U->hat(k).adjoint() * K.sys->J_rho(k) * yhat;
}

// Flux of an arbitrary hat trajectory (e.g. U_+ itself or a Theta column).
inline Mat boundary_flux_of(const GreensKernel& K, const Trajectory& Y, Site k, int side) {
    const Trajectory& U = side > 0 ? (K.conjugated() ? K.P : K.Pc) : (K.conjugated() ? K.N : K.Nc);
    return U.hat(k).adjoint() * K.sys->J_rho(k) * Y.hat(k);
}

struct FluxTrend {
    std::vector<double> magnitudes;
    double log_slope{0.0};  // least-squares slope of log|flux| per site, oriented outward
    bool monotone_decreasing{false};
};

// Trend over the outer third of the sequence (outward = increasing index).
inline FluxTrend flux_trend(const std::vector<double>& mags_outward) {
    FluxTrend t;
    const std::size_t n = mags_outward.size();
    const std::size_t start = n - n / 3;
    for (std::size_t i = start; i < n; ++i) t.magnitudes.push_back(mags_outward[i]);
    const std::size_t q = t.magnitudes.size();
    if (q < 2) return t;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < q; ++i) {
        const double x = static_cast<double>(i), y = std::log(std::max(t.magnitudes[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    t.log_slope = (q * sxy - sx * sy) / (q * sxx - sx * sx);
    t.monotone_decreasing = true;
    for (std::size_t i = 1; i < q; ++i) t.monotone_decreasing = t.monotone_decreasing && t.magnitudes[i] < t.magnitudes[i - 1];
    return t;
}

// ------------------------------ diagonal blocks via V ------------------------

struct DiagonalBlocks {
    Site k;
    Mat via_V;    // K(k,k) assembled from V_P, V_N
    Mat direct;   // K(k,k) from the role trajectories
    Mat V_P, V_N;
    double defect;
    bool ok;
};

// V = rho u2^+ u1^{-1};  p1 w n1^# = (V_P - V_N)^{-1}, p1 w n2^# = (V_P - V_N)^{-1} (n1^#)^{-1} n2^#,
// n2 w p1^# = n2 n1^{-1} (V_P - V_N)^{-1},  n2 w p2^# = n2 n1^{-1} (V_P - V_N)^{-1} (p1^#)^{-1} p2^#.
inline DiagonalBlocks diagonal_riccati_blocks(const GreensKernel& K, Site k, double rcond_min = 1e-12) {
    if (K.conjugated()) throw InputError("diagonal_riccati_blocks: use the upper-half-plane kernel");
    const HamiltonianSystem& s = *K.sys;
    DiagonalBlocks out{k, Mat(), K(k, k), Mat(), Mat(), 0.0, false};
    const Mat p1 = K.P.psi1(k), n1 = K.N.psi1(k), n2 = K.N.psi2(k);
    const Mat p1c = K.Pc.psi1(k), p2c = K.Pc.psi2(k), n1c = K.Nc.psi1(k), n2c = K.Nc.psi2(k);
    if (rcond(p1) < rcond_min || rcond(n1) < rcond_min || rcond(p1c) < rcond_min || rcond(n1c) < rcond_min)
        return out;
    out.V_P = s.rho(k) * K.P.psi2_plus(k) * p1.inverse();
    out.V_N = s.rho(k) * K.N.psi2_plus(k) * n1.inverse();
    const Mat D = out.V_P - out.V_N;
    if (rcond(D) < rcond_min) return out;
    const Mat Dinv = D.inverse();
    const Mat n1s_inv_n2s = n1c.adjoint().partialPivLu().solve(n2c.adjoint());
    const Mat p1s_inv_p2s = p1c.adjoint().partialPivLu().solve(p2c.adjoint());
    const Mat n2n1 = n2 * n1.inverse();
    const int m = s.m();
    out.via_V.resize(2 * m, 2 * m);
    out.via_V << Dinv, Dinv * n1s_inv_n2s, n2n1 * Dinv, n2n1 * Dinv * p1s_inv_p2s;
    out.defect = (out.via_V - out.direct).norm() / std::max(1.0, out.direct.norm());
    out.ok = true;
    return out;
}

}  // namespace dhs
