// propagate.hpp: stepping the eigenvalue equation, fundamental systems,
// the Lagrange bilinear form and the Jacobi-form check.
//
// Canonical state at site k is the hat matrix  Psi^(k) = ( psi1(k) ; psi2(k+1) ).

#pragma once

#include "dhs/system.hpp"

#include <array>
#include <functional>
#include <vector>

namespace dhs {

inline constexpr double scale_warning_threshold = 1e150;

struct HatState {
    Site k;
    cplx z;
    Mat data;  // 2m x r

    Mat top(int m) const { return data.topRows(m); }
    Mat bottom(int m) const { return data.bottomRows(m); }
};

namespace detail {

inline Mat rho_solve(const Mat& rho, const Mat& rhs) { return rho.partialPivLu().solve(rhs); }

// (psi1(k), psi2(k+1)) -> (psi1(k+1), psi2(k+2)); returns rcond of c21(k+1) via *rc.
inline Mat forward(const HamiltonianSystem& sys, cplx z, Site k, const Mat& hat, double rcond_min,
                   double* rc = nullptr) {
    const int m = sys.m();
    const Mat c = sys.pencil(z, k + 1);
    const Mat c21 = c.bottomLeftCorner(m, m);
    if (rc) *rc = rcond(c21);
    const Mat p1 = checked_solve(c21, sys.rho(k) * hat.topRows(m) - c.bottomRightCorner(m, m) * hat.bottomRows(m),
                                 rcond_min, k + 1, "step_forward: zA21+B21 singular");
    const Mat p2 = rho_solve(sys.rho(k + 1), c.topLeftCorner(m, m) * p1 + c.topRightCorner(m, m) * hat.bottomRows(m));
    return vstack(p1, p2);
}

// psi2(k) from the hat state at k (first row of the system at k).
inline Mat psi2_here(const HamiltonianSystem& sys, cplx z, Site k, const Mat& hat, double rcond_min) {
    const int m = sys.m();
    const Mat c = sys.pencil(z, k);
    return checked_solve(c.topRightCorner(m, m), sys.rho(k) * hat.bottomRows(m) - c.topLeftCorner(m, m) * hat.topRows(m),
                         rcond_min, k, "step_backward: zA12+B12 singular");
}

// (psi1(k), psi2(k+1)) -> (psi1(k-1), psi2(k)).
inline Mat backward(const HamiltonianSystem& sys, cplx z, Site k, const Mat& hat, double rcond_min) {
    const int m = sys.m();
    const Mat c = sys.pencil(z, k);
    const Mat p2 = psi2_here(sys, z, k, hat, rcond_min);
    const Mat p1 = rho_solve(sys.rho(k - 1), c.bottomLeftCorner(m, m) * hat.topRows(m) + c.bottomRightCorner(m, m) * p2);
    return vstack(p1, p2);
}

}  // namespace detail

inline HatState step_forward(const HamiltonianSystem& sys, const HatState& s, double rcond_min = 1e-12) {
    return {s.k + 1, s.z, detail::forward(sys, s.z, s.k, s.data, rcond_min)};
}

// Inverts the (1,2) pencil at the current site k (the row of the system that
// links psi2(k) to psi2(k+1)).
inline HatState step_backward(const HamiltonianSystem& sys, const HatState& s, double rcond_min = 1e-12) {
    return {s.k - 1, s.z, detail::backward(sys, s.z, s.k, s.data, rcond_min)};
}

// Dense hat-state trajectory over [lo, hi] at a single z.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(int m, cplx z, Site lo, std::vector<Mat> hats, Mat psi2_lo)
        : m_(m), z_(z), lo_(lo), hats_(std::move(hats)), psi2_lo_(std::move(psi2_lo)) {
        for (const auto& h : hats_) max_norm_ = std::max(max_norm_, max_col_norm(h));
    }

    int m() const { return m_; }
    cplx z() const { return z_; }
    Site lo() const { return lo_; }
    Site hi() const { return lo_ + static_cast<Site>(hats_.size()) - 1; }
    Interval range() const { return {lo(), hi()}; }
    Eigen::Index cols() const { return hats_.front().cols(); }

    const Mat& hat(Site k) const { return hats_.at(slot(k)); }
    HatState state(Site k) const { return {k, z_, hat(k)}; }
    Mat psi1(Site k) const { return hat(k).topRows(m_); }
    Mat psi2_plus(Site k) const { return hat(k).bottomRows(m_); }
    Mat psi2(Site k) const { return k == lo_ ? psi2_lo_ : hat(k - 1).bottomRows(m_); }
    // Plain state (psi1(k); psi2(k)).
    Mat plain(Site k) const { return vstack(psi1(k), psi2(k)); }

    double max_norm() const { return max_norm_; }
    bool scale_warning() const { return !(max_norm_ <= scale_warning_threshold); }

    Trajectory times(const Mat& right) const {
        std::vector<Mat> h;
        h.reserve(hats_.size());
        for (const auto& x : hats_) h.push_back(x * right);
        return Trajectory(m_, z_, lo_, std::move(h), psi2_lo_ * right);
    }

private:
    std::size_t slot(Site k) const {
        if (k < lo() || k > hi())
            throw DomainError("trajectory has no state at k=" + std::to_string(k) + " (range [" +
                              std::to_string(lo()) + "," + std::to_string(hi()) + "])");
        return static_cast<std::size_t>(k - lo_);
    }

    int m_{1};
    cplx z_{};
    Site lo_{0};
    std::vector<Mat> hats_;
    Mat psi2_lo_;
    double max_norm_{0.0};
};

// Propagate an initial hat state to every site of `range` (which must contain init.k).
inline Trajectory propagate(const HamiltonianSystem& sys, const HatState& init, Interval range,
                            double rcond_min = 1e-12) {
    if (!range.contains(init.k)) throw InputError("propagate: range must contain the initial site");
    require_reachable(sys, range);
    std::vector<Mat> hats(static_cast<std::size_t>(range.size()));
    auto at = [&](Site k) -> Mat& { return hats[static_cast<std::size_t>(k - range.lo)]; };
    at(init.k) = init.data;
    for (Site k = init.k; k < range.hi; ++k) at(k + 1) = detail::forward(sys, init.z, k, at(k), rcond_min);
    for (Site k = init.k; k > range.lo; --k) at(k - 1) = detail::backward(sys, init.z, k, at(k), rcond_min);
    Mat p2 = detail::psi2_here(sys, init.z, range.lo, at(range.lo), rcond_min);
    return Trajectory(sys.m(), init.z, range.lo, std::move(hats), std::move(p2));
}

// Propagates the column space of init.data over `range`, re-orthonormalizing after every
// step so that the columns cannot collapse onto the dominant growth direction. The stored
// hats are Y(k) C for one fixed invertible C, Y the plain propagation, with C chosen so
// that hat(anchor) has orthonormal columns.
inline Trajectory propagate_span(const HamiltonianSystem& sys, const HatState& init, Interval range, Site anchor,
                                 double rcond_min = 1e-12) {
    if (!range.contains(init.k) || !range.contains(anchor))
        throw InputError("propagate_span: range must contain the initial site and the anchor");
    require_reachable(sys, range);
    const auto n = static_cast<std::size_t>(range.size());
    const Eigen::Index r = init.data.cols();
    std::vector<Mat> Q(n), R(n);  // R[k]: triangular factor of the step that produced Q[k]
    auto slot = [&](Site k) { return static_cast<std::size_t>(k - range.lo); };
    auto orth = [&](const Mat& x, Site k) {
        Eigen::HouseholderQR<Mat> qr(x);
        Q[slot(k)] = qr.householderQ() * Mat::Identity(x.rows(), r);
        R[slot(k)] = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
        const double rc = rcond(R[slot(k)]);
        if (rc < rcond_min) throw SteppingError("propagate_span: columns became dependent", k, rc);
    };
    orth(init.data, init.k);
    for (Site k = init.k; k < range.hi; ++k) orth(detail::forward(sys, init.z, k, Q[slot(k)], rcond_min), k + 1);
    for (Site k = init.k; k > range.lo; --k) orth(detail::backward(sys, init.z, k, Q[slot(k)], rcond_min), k - 1);

    // Y(k) = Q(k) G(k) with G(next) = R(next) G(prev); the hat is Q(k) G(k) G(anchor)^{-1}.
    std::vector<Mat> H(n);
    const int toward = anchor >= init.k ? 1 : -1;
    H[slot(anchor)] = Mat::Identity(r, r);
    for (Site k = anchor; k != init.k; k -= toward) {
        const auto& Rk = R[slot(k)];
        H[slot(k - toward)] = Rk.triangularView<Eigen::Upper>().solve(H[slot(k)]);
    }
    for (Site k = anchor + toward; range.contains(k); k += toward) H[slot(k)] = R[slot(k)] * H[slot(k - toward)];
    for (Site k = init.k - toward; range.contains(k); k -= toward) H[slot(k)] = R[slot(k)] * H[slot(k + toward)];

    std::vector<Mat> hats(n);
    for (std::size_t i = 0; i < n; ++i) hats[i] = Q[i] * H[i];
    Mat p2 = detail::psi2_here(sys, init.z, range.lo, hats.front(), rcond_min);
    return Trajectory(sys.m(), init.z, range.lo, std::move(hats), std::move(p2));
}

// --------------------------- fundamental systems -----------------------------

// Psi^(z, k0) = I_rho(k0)^{-1/2} (alpha^*  J alpha^*)
inline Mat fundamental_initial(const HamiltonianSystem& sys, Site k0, const BoundaryData& alpha) {
    const int m = sys.m();
    const Mat a = alpha.gamma().adjoint();
    Mat init(2 * m, 2 * m);
    init << a, symplectic_unit(m) * a;
    const Mat w = hpd_inv_sqrt(sys.rho(k0));
    return block_diag(w, w) * init;
}

struct FundamentalMatrix {
    Site k0;
    BoundaryData alpha;
    Trajectory traj;

    int m() const { return traj.m(); }
    cplx z() const { return traj.z(); }
    const Mat& hat(Site k) const { return traj.hat(k); }
    Mat Theta_hat(Site k) const { return traj.hat(k).leftCols(m()); }
    Mat Phi_hat(Site k) const { return traj.hat(k).rightCols(m()); }
    Mat Theta(Site k) const { return traj.plain(k).leftCols(m()); }
    Mat Phi(Site k) const { return traj.plain(k).rightCols(m()); }
    Mat theta1(Site k) const { return Theta_hat(k).topRows(m()); }
    Mat theta2(Site k) const { return Theta(k).bottomRows(m()); }
    Mat phi1(Site k) const { return Phi_hat(k).topRows(m()); }
    Mat phi2(Site k) const { return Phi(k).bottomRows(m()); }
};

inline FundamentalMatrix fundamental(const HamiltonianSystem& sys, cplx z, Site k0,
                                     const BoundaryData& alpha, Interval range,
                                     double rcond_min = 1e-12) {
    if (alpha.m() != sys.m()) throw InputError("fundamental: boundary data size mismatch");
    return {k0, alpha, propagate(sys, {k0, z, fundamental_initial(sys, k0, alpha)}, range, rcond_min)};
}

// U = Psi (I; M): the Weyl solution for a given M.
inline Trajectory weyl_solution(const FundamentalMatrix& fund, const Mat& M) {
    return fund.traj.times(vstack(identity(fund.m()), M));
}

// ------------------------------ Lagrange form --------------------------------

inline Mat lagrange_bilinear(const HamiltonianSystem& sys, const HatState& a, const HatState& b) {
    if (a.k != b.k) throw InputError("lagrange_bilinear: states live at different sites");
    return a.data.adjoint() * sys.J_rho(a.k) * b.data;
}

struct LagrangeCheck {
    double max_step_error{0.0};       // per-site relative defect
    double max_telescope_error{0.0};  // cumulative W(k) - W(lo) vs (z2 - conj z1) sum
    Site worst_k{0};
};

// W(k) - W(k-1) = (z2 - conj(z1)) Psi1(k)^* A(k) Psi2(k), with W = Psi1^^* J_rho Psi2^.
// Errors are relative to the sum of the magnitudes of the participating terms; stable norms
// because W grows like the square of the solutions.
inline LagrangeCheck lagrange_check(const HamiltonianSystem& sys, const Trajectory& t1, const Trajectory& t2) {
    const Site lo = std::max(t1.lo(), t2.lo()), hi = std::min(t1.hi(), t2.hi());
    const cplx dz = t2.z() - std::conj(t1.z());
    LagrangeCheck out;
    auto W = [&](Site k) { return Mat(t1.hat(k).adjoint() * sys.J_rho(k) * t2.hat(k)); };
    auto wscale = [&](Site k) { return t1.hat(k).stableNorm() * op_norm(sys.rho(k)) * t2.hat(k).stableNorm(); };
    const Mat W0 = W(lo);
    Mat sum = Mat::Zero(W0.rows(), W0.cols());
    double sum_scale = 0.0;
    Mat Wprev = W0;
    for (Site k = lo + 1; k <= hi; ++k) {
        const Mat p1 = t1.plain(k), p2 = t2.plain(k);
        const Mat rhs = dz * (p1.adjoint() * sys.A(k) * p2);
        const double rscale = std::abs(dz) * p1.stableNorm() * op_norm(sys.A(k)) * p2.stableNorm();
        const Mat Wk = W(k);
        const double step_scale = wscale(k) + wscale(k - 1) + rscale;
        const double step_err = (Wk - Wprev - rhs).stableNorm() / std::max(step_scale, 1e-300);
        sum += rhs;
        sum_scale += rscale;
        const double tel_scale = wscale(k) + wscale(lo) + sum_scale;
        const double tel_err = (Wk - W0 - sum).stableNorm() / std::max(tel_scale, 1e-300);
        if (tel_err > out.max_telescope_error) out.worst_k = k;
        out.max_step_error = std::max(out.max_step_error, step_err);
        out.max_telescope_error = std::max(out.max_telescope_error, tel_err);
        Wprev = Wk;
    }
    return out;
}

// -------------------------------- Jacobi form --------------------------------

// (L y)(k) = a(k) y(k+1) + a(k-1) y(k-1) + b(k) y(k)
inline Mat jacobi_apply(const HamiltonianSystem& sys, const std::function<Mat(Site)>& y, Site k) {
    return sys.jacobi_a(k) * y(k + 1) + sys.jacobi_a(k - 1) * y(k - 1) + sys.jacobi_b(k) * y(k);
}

// ------------------------------ definiteness ---------------------------------

struct DefinitenessReport {
    cplx z;
    Mat gram;
    double min_eig;
    double max_eig;
    bool definite;
};

// G = sum_{k in [c,d]} Psi(k)^* A(k) Psi(k) for the full fundamental solution with Psi^(c) = I.
inline DefinitenessReport check_definiteness(const HamiltonianSystem& sys, cplx z, Interval cd,
                                             const Tolerances& tol = {}) {
    const int m = sys.m();
    const Trajectory t = propagate(sys, {cd.lo, z, identity(2 * m)}, cd, tol.rcond_min);
    Mat G = Mat::Zero(2 * m, 2 * m);
    for (Site k = cd.lo; k <= cd.hi; ++k) {
        const Mat p = t.plain(k);
        G += p.adjoint() * sys.A(k) * p;
    }
    G = herm_part(G);
    const RVec ev = herm_eigenvalues(G);
    const double lo = ev(0), hi = ev(ev.size() - 1);
    return {z, G, lo, hi, lo > tol.def * std::max(1.0, hi)};
}

inline const std::array<cplx, 3>& default_z_sample() {
    static const std::array<cplx, 3> s{cplx{0, 1}, cplx{1, 1}, cplx{-2, 0.5}};
    return s;
}

}  // namespace dhs
