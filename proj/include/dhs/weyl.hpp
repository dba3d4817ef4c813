// weyl.hpp: Weyl-Titchmarsh M-functions, Weyl disks and their limits,
// Herglotz checks, spectral measures and the Riccati recursion.

#pragma once

#include "dhs/propagate.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dhs {

// beta~ Phi^(z, ell) was singular: z is (numerically) an eigenvalue of the regular problem.
struct EigenvalueHit : NumericalError {
    EigenvalueHit(cplx at, double smin)
        : NumericalError("eigenvalue hit: beta~ Phi^(z,ell) singular at z=(" + std::to_string(at.real()) + "," +
                         std::to_string(at.imag()) + "), sigma_min=" + std::to_string(smin)),
          z(at), sigma_min(smin) {}
    cplx z;
    double sigma_min;
};

// sign((ell - k) Im z)
inline int sigma_of(Site ell, Site k, cplx z) {
    const double v = static_cast<double>(ell - k) * z.imag();
    if (v == 0.0) throw InputError("sigma undefined: need ell != k and Im z != 0");
    return v > 0 ? 1 : -1;
}

// ------------------------------ contexts -------------------------------------

struct DiskContext {
    cplx z;
    Site k0;
    Site ell;
    BoundaryData alpha;
    int sigma;

    Interval span() const { return {std::min(k0, ell), std::max(k0, ell)}; }
    // The summation range [min+1, max].
    Interval plus_span() const { return {std::min(k0, ell) + 1, std::max(k0, ell)}; }
};

inline DiskContext make_context(cplx z, Site k0, Site ell, const BoundaryData& alpha) {
    if (z.imag() == 0.0) throw InputError("disk context needs Im z != 0");
    if (ell == k0) throw InputError("disk context needs ell != k0");
    if (alpha.sign_class() != SignClass::zero)
        throw InputError("disk context needs self-adjoint alpha (Im(alpha1 alpha2^*) = 0)");
    return {z, k0, ell, alpha, sigma_of(ell, k0, z)};
}

struct MFunction {
    Mat M;
    DiskContext ctx;
    std::optional<BoundaryData> beta;
    double sigma_min_betaPhi{0.0};
    double rcond_betaPhi{0.0};
};

// M = -(beta~ Phi^(ell))^{-1} beta~ Theta^(ell), from the hat matrix at ell.
inline Mat m_from_hat(const HamiltonianSystem& sys, const Mat& hat_ell, Site ell, const BoundaryData& beta,
                      cplx z, double rcond_min = 1e-12, double* smin_out = nullptr, double* rc_out = nullptr) {
    const int m = sys.m();
    const Mat bt = weighted_boundary(beta, sys, ell);
    const Mat bphi = bt * hat_ell.rightCols(m);
    const Mat btheta = bt * hat_ell.leftCols(m);
    const RVec s = singular_values(bphi);
    const double smin = s(m - 1);
    // Angle between span Phi^(ell) and ker beta~: scale free, so neither growth that differs
    // between columns nor m = 1 fools it.
    const Eigen::HouseholderQR<Mat> qr(hat_ell.rightCols(m));
    const Mat basis = Mat(qr.householderQ()).leftCols(m);
    const double scale = op_norm(bt);
    const RVec sb = singular_values(Mat(bt * basis));
    const double rc = scale > 0 ? sb(m - 1) / scale : 0.0;
    if (smin_out) *smin_out = smin;
    if (rc_out) *rc_out = rc;
    if (!(rc >= rcond_min)) throw EigenvalueHit(z, smin);
    return -bphi.partialPivLu().solve(btheta);
}

inline FundamentalMatrix fundamental_for(const HamiltonianSystem& sys, const DiskContext& ctx,
                                         double rcond_min = 1e-12) {
    return fundamental(sys, ctx.z, ctx.k0, ctx.alpha, ctx.span(), rcond_min);
}

// The Weyl solution U = Psi (I; M) with M = M(z, ell, k0, alpha, beta), built by propagating
// a basis Y^(ell) of ker beta~ away from ell (column span only) and normalizing at k0:
// U = Y (alpha~ Y^(k0))^{-1},  M = -alpha J I_rho(k0)^{1/2} U^(k0).
// This stays accurate where U decays away from k0, unlike Theta + Phi M.
struct WeylSolution {
    Mat M;
    Trajectory U;
};

inline WeylSolution weyl_solution_from_endpoint(const HamiltonianSystem& sys, cplx z, Site k0,
                                                const BoundaryData& alpha, Site ell, const BoundaryData& beta,
                                                Interval range, double rcond_min = 1e-12) {
    const int m = sys.m();
    const Interval hull{std::min({range.lo, k0, ell}), std::max({range.hi, k0, ell})};
    // Columns spanning the null space of beta~: the last m columns of a full QR of beta~^*.
    const Mat bt = weighted_boundary(beta, sys, ell);
    const Eigen::HouseholderQR<Mat> qr(bt.adjoint());
    const Mat init = Mat(qr.householderQ()).rightCols(m);
    const Trajectory Y = propagate_span(sys, {ell, z, init}, hull, k0, rcond_min);
    // Y^(k0) is orthonormal, so this is the angle between span Y^(k0) and ker alpha~.
    const Mat at = weighted_boundary(alpha, sys, k0);
    const Mat C1 = at * Y.hat(k0);
    if (!(min_singular(C1) >= rcond_min * op_norm(at))) throw EigenvalueHit(z, min_singular(C1));
    const Mat C1inv = C1.inverse();
    const Trajectory U = Y.times(C1inv);
    const Mat r = hpd_sqrt(sys.rho(k0));
    const Mat M = -alpha.gamma() * symplectic_unit(m) * block_diag(r, r) * U.hat(k0);
    return {M, U};
}

inline MFunction m_regular(const HamiltonianSystem& sys, const DiskContext& ctx, const BoundaryData& beta,
                           double rcond_min = 1e-12) {
    const FundamentalMatrix f = fundamental_for(sys, ctx, rcond_min);
    MFunction out{Mat(), ctx, beta};
    m_from_hat(sys, f.hat(ctx.ell), ctx.ell, beta, ctx.z, rcond_min, &out.sigma_min_betaPhi, &out.rcond_betaPhi);
    // The value itself from the endpoint side: -(beta~ Phi)^{-1} beta~ Theta cancels badly once
    // the columns of Phi grow at very different rates.
    out.M = weyl_solution_from_endpoint(sys, ctx.z, ctx.k0, ctx.alpha, ctx.ell, beta, ctx.span(), rcond_min).M;
    return out;
}

// Plain M value for any (z, k0, ell), no self-adjointness requirement on beta.
inline Mat m_value(const HamiltonianSystem& sys, cplx z, Site k0, Site ell, const BoundaryData& alpha,
                   const BoundaryData& beta, double rcond_min = 1e-12) {
    return weyl_solution_from_endpoint(sys, z, k0, alpha, ell, beta, {std::min(k0, ell), std::max(k0, ell)}, rcond_min)
        .M;
}

// ------------------------------ disk geometry --------------------------------

// E_ell(M) = 2 sigma Im(u1^* rho u2^+) at ell = -sigma U^^*(i J_rho)U^.
// Circle: E = 0; open disk: E < 0.
inline Mat e_at_site(const HamiltonianSystem& sys, const Mat& uhat, Site k, int sigma) {
    const int m = sys.m();
    const Mat x = uhat.topRows(m).adjoint() * sys.rho(k) * uhat.bottomRows(m);
    return herm_part(2.0 * sigma * im_part(x));
}

inline Mat e_functional(const HamiltonianSystem& sys, const DiskContext& ctx, const Mat& M,
                        double rcond_min = 1e-12) {
    const FundamentalMatrix f = fundamental_for(sys, ctx, rcond_min);
    const Mat uhat = f.hat(ctx.ell) * vstack(identity(sys.m()), M);
    return e_at_site(sys, uhat, ctx.ell, ctx.sigma);
}

// sum over [min(k0,ell)+1, max(k0,ell)] of U^* A U
inline Mat weighted_energy(const HamiltonianSystem& sys, const Trajectory& U, Interval plus_span) {
    Mat s = Mat::Zero(U.cols(), U.cols());
    for (Site k = plus_span.lo; k <= plus_span.hi; ++k) {
        const Mat p = U.plain(k);
        s += p.adjoint() * sys.A(k) * p;
    }
    return herm_part(s);
}

enum class DiskVerdict { circle, interior, exterior, boundary_ambiguous };

inline std::string to_string(DiskVerdict v) {
    switch (v) {
        case DiskVerdict::circle: return "circle";
        case DiskVerdict::interior: return "interior";
        case DiskVerdict::exterior: return "exterior";
        case DiskVerdict::boundary_ambiguous: return "boundary_ambiguous";
    }
    return "?";
}

inline DiskVerdict disk_membership(const Mat& E, double tol) {
    if (op_norm(E) <= tol) return DiskVerdict::circle;
    const double top = max_herm_eig(E);
    if (top < -tol) return DiskVerdict::interior;
    if (top > tol) return DiskVerdict::exterior;
    return DiskVerdict::boundary_ambiguous;
}

// M_alpha = (-alpha J gamma^* + alpha gamma^* M_gamma)(alpha gamma^* + alpha J gamma^* M_gamma)^{-1}
struct LftPole : NumericalError {
    using NumericalError::NumericalError;
};

inline Mat lft_alpha_change(const Mat& M_gamma, const BoundaryData& alpha, const BoundaryData& gamma,
                            double rcond_min = 1e-12) {
    const int m = alpha.m();
    const Mat J = symplectic_unit(m);
    const Mat a = alpha.gamma(), g = gamma.gamma();
    const Mat agJ = a * J * g.adjoint();
    const Mat ag = a * g.adjoint();
    const Mat den = ag + agJ * M_gamma;
    const double rc = rcond(den);
    if (!(rc >= rcond_min)) throw LftPole("lft_alpha_change: denominator singular (rcond=" + std::to_string(rc) + ")");
    const Mat num = -agJ + ag * M_gamma;
    // num den^{-1} = (den^{-*} num^*)^*
    return den.adjoint().partialPivLu().solve(num.adjoint()).adjoint();
}

// Self-adjoint boundary data for circle sampling. m = 1: (cos t, sin t), t = j pi / n.
// m > 1: (cos(D) W^*, sin(D) W^*) with Haar W and uniform angles D, drawn sequentially
// from a fixed seed so that smaller sample sets are prefixes of larger ones.
inline Mat haar_unitary(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat Z(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) Z(i, j) = cplx(g(rng), g(rng));
    Eigen::HouseholderQR<Mat> qr(Z);
    Mat Q = qr.householderQ();
    const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < m; ++j) {
        const cplx d = R(j, j);
        Q.col(j) *= d / std::abs(d);
    }
    return Q;
}

inline std::vector<BoundaryData> beta_family(int m, int n, std::uint64_t seed = 20240917) {
    std::vector<BoundaryData> out;
    if (m == 1) {
        for (int j = 0; j < n; ++j) {
            const double t = M_PI * j / n;
            Mat g(1, 2);
            g << std::cos(t), std::sin(t);
            out.push_back(make_boundary_data(g));
        }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(0.0, M_PI);
    for (int j = 0; j < n; ++j) {
        const Mat W = haar_unitary(m, rng);
        Mat C = Mat::Zero(m, m), S = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            const double t = ang(rng);
            C(i, i) = std::cos(t);
            S(i, i) = std::sin(t);
        }
        Mat g(m, 2 * m);
        g << C * W.adjoint(), S * W.adjoint();
        out.push_back(make_boundary_data(g));
    }
    return out;
}

inline double max_pairwise_distance(const std::vector<Mat>& Ms) {
    double d = 0.0;
    for (std::size_t i = 0; i < Ms.size(); ++i)
        for (std::size_t j = i + 1; j < Ms.size(); ++j) d = std::max(d, op_norm(Ms[i] - Ms[j]));
    return d;
}

inline double diameter_from_hat(const HamiltonianSystem& sys, const Mat& hat_ell, Site ell, cplx z, int n_samples,
                                double rcond_min = 1e-12) {
    std::vector<Mat> Ms;
    for (const auto& b : beta_family(sys.m(), n_samples)) Ms.push_back(m_from_hat(sys, hat_ell, ell, b, z, rcond_min));
    return max_pairwise_distance(Ms);
}

inline double disk_diameter_estimate(const HamiltonianSystem& sys, const DiskContext& ctx, int n_samples = 8,
                                     double rcond_min = 1e-12) {
    const FundamentalMatrix f = fundamental_for(sys, ctx, rcond_min);
    return diameter_from_hat(sys, f.hat(ctx.ell), ctx.ell, ctx.z, n_samples, rcond_min);
}

// ------------------------------ half-line limits -----------------------------

enum class EndpointClass { limit_point, limit_circle, inconclusive };

inline std::string to_string(EndpointClass c) {
    switch (c) {
        case EndpointClass::limit_point: return "limit_point";
        case EndpointClass::limit_circle: return "limit_circle";
        case EndpointClass::inconclusive: return "inconclusive";
    }
    return "?";
}

struct LimitOptions {
    Site ell_step = 10;
    Site ell_max = 2000;  // distance from k0
    double tol = 1e-13;   // Cauchy gap relative to 1 + |M|
    int n_samples = 8;
    std::optional<BoundaryData> beta;  // default (I 0)
    double lp_threshold = 1e-6;
    double lc_threshold = 1e-2;
    double rcond_min = 1e-12;
};

struct HalfLineLimit {
    Mat M_pm;
    int direction;  // +1 or -1
    std::vector<Site> ell_sequence;
    double cauchy_gap{0.0};
    double diameter_estimate{0.0};
    std::vector<double> recent_diameters;
    EndpointClass classification{EndpointClass::inconclusive};
    bool converged{false};
    bool herglotz_ok{false};  // Im(+/- M) > 0 ; the value is reported unmodified
    BoundaryData beta;
};

// M(z, ell_n, k0, alpha, beta) along ell_n -> +/- infinity. The fundamental matrix is
// rescaled by a common scalar whenever it grows, which leaves every M unchanged.
inline HalfLineLimit limit_m(const HamiltonianSystem& sys, cplx z, Site k0, const BoundaryData& alpha, int direction,
                             const LimitOptions& opt = {}) {
    if (z.imag() == 0.0) throw InputError("limit_m needs Im z != 0");
    if (direction != 1 && direction != -1) throw InputError("limit_m: direction must be +1 or -1");
    const int m = sys.m();
    BoundaryData beta = opt.beta ? *opt.beta : dirichlet(m);
    Site far = k0 + direction * opt.ell_max;
    if (sys.extension() == Extension::error) far = direction > 0 ? std::min(far, sys.k_max()) : std::max(far, sys.k_min());
    if (far == k0) throw DomainError("limit_m: no room in the requested direction");

    HalfLineLimit out{Mat(), direction, {}, 0.0, 0.0, {}, EndpointClass::inconclusive, false, false, beta};
    Mat hat = fundamental_initial(sys, k0, alpha);
    Site k = k0;
    Mat prev;
    const Site step = std::max<Site>(1, opt.ell_step);
    auto advance_to = [&](Site target) {
        while (k != target) {
            hat = direction > 0 ? detail::forward(sys, z, k, hat, opt.rcond_min)
                                : detail::backward(sys, z, k, hat, opt.rcond_min);
            k += direction;
            const double n = hat.norm();
            if (n > 1e100) hat /= n;
        }
    };
    std::vector<std::pair<Site, Mat>> recent;  // (ell, hat) of the last three stops
    while (true) {
        Site target = k + direction * step;
        if ((direction > 0 && target > far) || (direction < 0 && target < far)) target = far;
        if (target == k) break;
        advance_to(target);
        Mat M = m_from_hat(sys, hat, k, beta, z, opt.rcond_min);
        out.ell_sequence.push_back(k);
        recent.emplace_back(k, hat);
        if (recent.size() > 3) recent.erase(recent.begin());
        if (prev.size()) {
            out.cauchy_gap = op_norm(M - prev);
            if (out.cauchy_gap <= opt.tol * (1.0 + op_norm(M))) {
                out.converged = true;
                out.M_pm = M;
                break;
            }
        }
        prev = M;
        out.M_pm = M;
        if (k == far) break;
    }
    const double scale = 1.0 + op_norm(out.M_pm);
    for (const auto& [ell, h] : recent) out.recent_diameters.push_back(diameter_from_hat(sys, h, ell, z, opt.n_samples, opt.rcond_min));
    out.diameter_estimate = out.recent_diameters.back();
    if (out.diameter_estimate < opt.lp_threshold * scale) {
        out.classification = EndpointClass::limit_point;
    } else {
        bool stable = out.recent_diameters.size() == 3;
        for (double d : out.recent_diameters) stable = stable && d > opt.lc_threshold * scale;
        if (stable) {
            const double lo = *std::min_element(out.recent_diameters.begin(), out.recent_diameters.end());
            const double hi = *std::max_element(out.recent_diameters.begin(), out.recent_diameters.end());
            stable = (hi - lo) <= 0.1 * hi;
        }
        if (stable) out.classification = EndpointClass::limit_circle;
    }
    const int s = direction * (z.imag() > 0 ? 1 : -1);
    out.herglotz_ok = min_herm_eig(double(s) * im_part(out.M_pm)) > 0.0;
    return out;
}

// ------------------------------ Herglotz checks ------------------------------

struct HerglotzPoint {
    cplx z;
    double min_im_eig;       // of sign * Im M(z)
    double conj_defect;      // |M(conj z) - M(z)^*| / (1 + |M|)
    double min_singular;
    bool ok;
};

struct HerglotzReport {
    std::vector<HerglotzPoint> points;
    std::size_t violations{0};
    bool ok() const { return violations == 0; }
};

// Checks sign*Im M(z) > 0, M(conj z) = M(z)^*, rank M = m at every grid point.
inline HerglotzReport herglotz_check(const std::function<Mat(cplx)>& m_eval, const std::vector<cplx>& grid, int sign,
                                     double tol = 1e-10) {
    HerglotzReport rep;
    for (cplx z : grid) {
        const Mat M = m_eval(z);
        const Mat Mc = m_eval(std::conj(z));
        HerglotzPoint p{z, min_herm_eig(double(sign) * im_part(M)), op_norm(Mc - M.adjoint()) / (1.0 + op_norm(M)),
                        min_singular(M), true};
        p.ok = p.min_im_eig > 0.0 && p.conj_defect <= tol && p.min_singular > tol * (1.0 + op_norm(M));
        if (!p.ok) ++rep.violations;
        rep.points.push_back(p);
    }
    return rep;
}

// ------------------------------ spectral measure -----------------------------

namespace detail {

// Adaptive Gauss-Kronrod (7/15 pair) for matrix-valued integrands on [a, b].
inline Mat gk_adaptive(const std::function<Mat(double)>& f, double a, double b, double abs_tol, int depth = 0,
                       int max_depth = 18) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Mat f0 = f(c);
    Mat K = wk[0] * f0;
    Mat Gs = wg[0] * f0;
    double fmax = f0.norm();
    for (std::size_t i = 1; i < x.size(); ++i) {
        const Mat fl = f(c - h * x[i]), fr = f(c + h * x[i]);
        fmax = std::max({fmax, fl.norm(), fr.norm()});
        const Mat fs = fl + fr;
        K += wk[i] * fs;
        if (i % 2 == 0) Gs += wg[i / 2] * fs;
    }
    K *= h;
    Gs *= h;
    const double err = (K - Gs).norm();
    // Below the roundoff floor of the panel (or a 1e-12 relative accuracy) further
    // bisection cannot help: near poles the integrand itself carries that much noise.
    const double floor = std::max(1e3 * std::numeric_limits<double>::epsilon() * h * fmax, 1e-12 * K.norm());
    if (err <= std::max(abs_tol, floor) || depth >= max_depth || h < 1e-15 * std::max(1.0, std::abs(c))) return K;
    return gk_adaptive(f, a, c, 0.5 * abs_tol, depth + 1, max_depth) +
           gk_adaptive(f, c, b, 0.5 * abs_tol, depth + 1, max_depth);
}

}  // namespace detail

struct MeasureOptions {
    int sign = 1;                // measure of sign*M
    double delta = -1.0;         // grid offset; < 0 means eps_final / 2
    double top_height = 1.0;     // height of the upper contour edge
    double quad_tol = 1e-13;     // absolute tolerance per contour piece
    double tol_psd = 1e-10;
    double measure_tol = 1e-6;   // Richardson convergence flag threshold
};

struct SpectralMeasure {
    std::vector<double> grid;               // bin edges lambda_i (before the offset)
    double delta{0.0};
    std::vector<Mat> increments;            // Richardson-combined Omega((lambda_i+delta, lambda_{i+1}+delta])
    std::vector<double> first_moments;      // trace of int nu dOmega over each bin (Richardson-combined)
    std::vector<double> epsilon_schedule;
    std::vector<std::vector<Mat>> per_eps;  // raw increments per epsilon
    double max_change{0.0};                 // between the last two extrapolated estimates
    bool converged{true};
    std::size_t clipped{0};                 // increments whose negative eigenvalues were clipped

    double total_trace() const {
        double s = 0.0;
        for (const auto& w : increments) s += w.trace().real();
        return s;
    }
};

// Omega_eps((a,b]) = pi^{-1} Im int_a^b M(nu + i eps) dnu. Since M is analytic in the upper
// half plane, the segment is replaced by the path a+i eps -> a+iH -> b+iH -> b+i eps; the
// vertical legs are integrated in log(y), which resolves the Lorentzian peaks of width eps.
// The first moment uses the analytic integrand (zeta - i eps) M(zeta).
inline SpectralMeasure spectral_measure(const std::function<Mat(cplx)>& m_eval, double lam_a, double lam_b,
                                        int grid_n, std::vector<double> eps_schedule, const MeasureOptions& opt = {}) {
    if (!(lam_b > lam_a) || grid_n < 1) throw InputError("spectral_measure: bad interval or grid");
    if (eps_schedule.empty()) throw InputError("spectral_measure: empty epsilon schedule");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
        if (!(eps_schedule[i] > 0)) throw InputError("spectral_measure: epsilons must be positive");
        if (i && !(eps_schedule[i] < eps_schedule[i - 1])) throw InputError("spectral_measure: schedule must decrease");
    }
    SpectralMeasure out;
    out.epsilon_schedule = eps_schedule;
    const double eps_final = eps_schedule.back();
    out.delta = opt.delta >= 0 ? opt.delta : 0.5 * eps_final;
    for (int i = 0; i <= grid_n; ++i) out.grid.push_back(lam_a + (lam_b - lam_a) * i / grid_n);
    const double H = opt.top_height;
    if (!(eps_schedule.front() < H)) throw InputError("spectral_measure: epsilons must lie below the contour top");
    const double s = opt.sign;
    const Eigen::Index m = m_eval(cplx(0.5 * (lam_a + lam_b), H)).rows();
    const double inv_pi = 1.0 / M_PI;

    // The contour integrand [M, zeta M] does not depend on eps, so the top edge is
    // integrated once and each vertical leg is extended downward from the previous eps.
    auto G = [&](cplx zeta) {
        const Mat M = s * m_eval(zeta);
        Mat out2(m, 2 * m);
        out2 << M, zeta * M;
        return out2;
    };
    std::vector<Mat> top;
    for (int i = 0; i < grid_n; ++i) {
        const double a = out.grid[i] + out.delta, b = out.grid[i + 1] + out.delta;
        top.push_back(detail::gk_adaptive([&](double x) { return G(cplx(x, H)); }, a, b, opt.quad_tol));
    }
    std::vector<Mat> leg(grid_n + 1, Mat::Zero(m, 2 * m));  // int_{x+i eps}^{x+iH} G dzeta
    double y_hi = H;
    std::vector<std::vector<Mat>> incs;
    std::vector<std::vector<double>> moms;
    for (double eps : eps_schedule) {
        if (eps < y_hi) {
            for (int i = 0; i <= grid_n; ++i) {
                const double x = out.grid[i] + out.delta;
                leg[i] += detail::gk_adaptive(
                    [&](double t) {
                        const double y = std::exp(t);
                        return Mat(G(cplx(x, y)) * cplx(0, y));
                    },
                    std::log(eps), std::log(y_hi), opt.quad_tol);
            }
            y_hi = eps;
        }
        std::vector<Mat> inc;
        std::vector<double> mom;
        for (int i = 0; i < grid_n; ++i) {
            const Mat total = leg[i] + top[i] - leg[i + 1];
            inc.push_back(inv_pi * im_part(Mat(total.leftCols(m))));
            // (zeta - i eps) M = zeta M - i eps M
            const Mat first = total.rightCols(m) - cplx(0, eps) * total.leftCols(m);
            mom.push_back(inv_pi * im_part(first).trace().real());
        }
        incs.push_back(std::move(inc));
        moms.push_back(std::move(mom));
    }
    out.per_eps = incs;
    const std::size_t n = eps_schedule.size();
    for (int i = 0; i < grid_n; ++i) {
        Mat w = incs[n - 1][i];
        double mu = moms[n - 1][i];
        if (n >= 2) {
            // Richardson: the O(eps) Lorentzian tails cancel.
            const double r = eps_schedule[n - 2] / eps_schedule[n - 1];
            const Mat& w1 = incs[n - 2][i];
            const Mat rich = (r * w - w1) / (r - 1.0);
            // Convergence: agreement of consecutive Richardson estimates when three
            // epsilons are available, else of the last two raw values.
            if (n >= 3) {
                const double r0 = eps_schedule[n - 3] / eps_schedule[n - 2];
                const Mat prev = (r0 * w1 - incs[n - 3][i]) / (r0 - 1.0);
                out.max_change = std::max(out.max_change, (rich - prev).norm());
            } else {
                out.max_change = std::max(out.max_change, (w - w1).norm());
            }
            w = rich;
            mu = (r * mu - moms[n - 2][i]) / (r - 1.0);
        }
        w = herm_part(w);
        Eigen::SelfAdjointEigenSolver<Mat> es(w);
        RVec ev = es.eigenvalues();
        if (ev(0) < -opt.tol_psd) {
            ++out.clipped;
            for (Eigen::Index j = 0; j < ev.size(); ++j) ev(j) = std::max(ev(j), -opt.tol_psd);
            w = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
        }
        out.increments.push_back(w);
        out.first_moments.push_back(mu);
    }
    out.converged = out.max_change <= opt.measure_tol;
    return out;
}

struct Atom {
    double location;  // trace-weighted centroid
    double mass;      // trace of the merged increments
    std::size_t first_bin, last_bin;
};

// Merge runs of adjacent bins whose trace mass exceeds `threshold`.
inline std::vector<Atom> measure_atoms(const SpectralMeasure& mu, double threshold) {
    std::vector<Atom> atoms;
    const std::size_t n = mu.increments.size();
    std::size_t i = 0;
    while (i < n) {
        if (mu.increments[i].trace().real() <= threshold) {
            ++i;
            continue;
        }
        Atom a{0.0, 0.0, i, i};
        double moment = 0.0;
        while (i < n && mu.increments[i].trace().real() > threshold) {
            a.mass += mu.increments[i].trace().real();
            moment += mu.first_moments[i];
            a.last_bin = i;
            ++i;
        }
        a.location = moment / a.mass;
        atoms.push_back(a);
    }
    return atoms;
}

// C2 = lim M(iy)/(iy), estimated at a single large y (Hermitian part kept).
inline Mat fit_linear_part(const std::function<Mat(cplx)>& m_eval, double y = 1e6) {
    return herm_part(Mat(m_eval(cplx(0, y)) / cplx(0, y)));
}

struct XiPoint {
    double lambda;
    Mat xi;
    double min_eig, max_eig;
    bool in_range;
    bool skipped;
};

// Xi = pi^{-1} Im log(sign M(lambda + i eps)), principal matrix logarithm.
inline std::vector<XiPoint> xi_function(const std::function<Mat(cplx)>& m_eval, const std::vector<double>& lambdas,
                                        double eps, int sign = 1, double tol = 1e-8) {
    std::vector<XiPoint> out;
    for (double lam : lambdas) {
        XiPoint p{lam, Mat(), 0.0, 0.0, false, false};
        try {
            const Mat M = double(sign) * m_eval(cplx(lam, eps));
            if (rcond(M) < 1e-14) {
                p.skipped = true;
            } else {
                const Mat L = M.log();
                p.xi = herm_part(Mat(im_part(L) / M_PI));
                const RVec ev = herm_eigenvalues(p.xi);
                p.min_eig = ev(0);
                p.max_eig = ev(ev.size() - 1);
                p.in_range = p.min_eig >= -tol && p.max_eig <= 1.0 + tol;
            }
        } catch (const NumericalError&) {
            p.skipped = true;
        }
        out.push_back(p);
    }
    return out;
}

// ------------------------------ Riccati recursion ----------------------------

struct RiccatiSite {
    Site k;
    Mat V;
    double min_sign_eig;  // of -sigma Im V
    bool ok;              // u1 invertible
};

// V(k) = rho(k) u2^+(k) u1(k)^{-1}; sign check -sigma Im V > 0 with sigma the direction of the disk.
inline std::vector<RiccatiSite> riccati_from_solution(const HamiltonianSystem& sys, const Trajectory& U, int sigma,
                                                      double rcond_min = 1e-12) {
    std::vector<RiccatiSite> out;
    for (Site k = U.lo(); k <= U.hi(); ++k) {
        const Mat u1 = U.psi1(k);
        RiccatiSite r{k, Mat(), 0.0, false};
        if (rcond(u1) >= rcond_min) {
            r.V = u1.adjoint().partialPivLu().solve((sys.rho(k) * U.psi2_plus(k)).adjoint()).adjoint();
            r.min_sign_eig = min_herm_eig(-double(sigma) * im_part(r.V));
            r.ok = true;
        }
        out.push_back(r);
    }
    return out;
}

// V - c11 - c12 [rho^- (V^-)^{-1} rho^- - c22]^{-1} c21 at site k (pencil at k).
inline Mat riccati_map(const HamiltonianSystem& sys, cplx z, Site k, const Mat& V_prev) {
    const int m = sys.m();
    const Mat c = sys.pencil(z, k);
    const Mat& rm = sys.rho(k - 1);
    const Mat inner = rm * V_prev.partialPivLu().solve(rm) - c.bottomRightCorner(m, m);
    if (rcond(inner) < 1e-14) throw NumericalError("riccati: inner matrix singular at k=" + std::to_string(k));
    return c.topLeftCorner(m, m) + c.topRightCorner(m, m) * inner.partialPivLu().solve(c.bottomLeftCorner(m, m));
}

struct RiccatiResidual {
    Site k;
    double residual;  // absolute
    double relative;  // residual / max(1, |V(k)|)
    bool ok;
};

// V given on consecutive sites starting at k_first; residuals for k_first+1 ... .
inline std::vector<RiccatiResidual> riccati_residual(const HamiltonianSystem& sys, cplx z, Site k_first,
                                                     const std::vector<Mat>& V) {
    std::vector<RiccatiResidual> out;
    for (std::size_t i = 1; i < V.size(); ++i) {
        const Site k = k_first + static_cast<Site>(i);
        RiccatiResidual r{k, 0.0, 0.0, false};
        try {
            const double res = (V[i] - riccati_map(sys, z, k, V[i - 1])).norm();
            r = {k, res, res / std::max(1.0, V[i].norm()), true};
        } catch (const NumericalError&) {
        }
        out.push_back(r);
    }
    return out;
}

// Per-site condition -sigma Im V(k) > 0 on the span of the disk; its verdict is
// "interior" when the condition holds strictly at every site.
struct RiccatiMembership {
    bool all_sites_positive;
    double worst_eig;  // smallest eigenvalue of -sigma Im V over the span (scaled by |V|)
    Site worst_k;
};

inline RiccatiMembership riccati_membership(const HamiltonianSystem& sys, const DiskContext& ctx, const Mat& M,
                                            double tol = 0.0, double rcond_min = 1e-12) {
    const FundamentalMatrix f = fundamental_for(sys, ctx, rcond_min);
    const Trajectory U = weyl_solution(f, M);
    RiccatiMembership out{true, std::numeric_limits<double>::infinity(), ctx.k0};
    for (const auto& r : riccati_from_solution(sys, U, ctx.sigma, rcond_min)) {
        if (!r.ok) {
            out.all_sites_positive = false;
            continue;
        }
        const double e = r.min_sign_eig / std::max(1.0, op_norm(r.V));
        if (e < out.worst_eig) {
            out.worst_eig = e;
            out.worst_k = r.k;
        }
        if (!(e > tol)) out.all_sites_positive = false;
    }
    return out;
}

// --------------------------- endpoint-started Weyl solutions ------------------

}  // namespace dhs
