#include "dhs/testkit.hpp"
#include "dhs/green.hpp"

#include <gtest/gtest.h>

using namespace dhs;

namespace {

HamiltonianSystem free_jacobi() {
    return jacobi_system({Mat::Constant(1, 1, 1.0)}, {Mat::Constant(1, 1, 0.0)});
}

GreensKernel whole(const HamiltonianSystem& sys, cplx z, Interval w, Site far = 150) {
    return build_whole_kernel_from_endpoints(sys, z, 0, dirichlet(sys.m()), far, dirichlet(sys.m()), -far,
                                             dirichlet(sys.m()), w);
}

std::vector<Mat> smooth_source(int m, Interval src, double decay) {
    std::vector<Mat> f;
    for (Site l = src.lo; l <= src.hi; ++l) {
        Mat v(2 * m, 1);
        for (int i = 0; i < 2 * m; ++i) v(i) = cplx(1.0 + i, 0.5 - i) * std::exp(-decay * std::abs(double(l)));
        f.push_back(v);
    }
    return f;
}

}  // namespace

TEST(Kernel, DeltaResidualAllVariants) {
    const cplx z(0.3, 0.5);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
        for (auto cls : {SystemClass::jacobi, SystemClass::general_A12zero}) {
            const auto sys = random_system(2, {-40, 40}, seed, cls);
            const BoundaryData a = dirichlet(2);
            const auto Kw = whole(sys, z, {-15, 15});
            EXPECT_LT(delta_check(Kw, {-14, 14}, {-14, 14}).max_residual, 1e-9) << to_string(cls);
            const auto Kp = build_half_kernel_plus_from_endpoint(sys, z, 0, a, 150, a, {0, 20});
            EXPECT_LT(delta_check(Kp, {1, 19}, {1, 19}).max_residual, 1e-9);
            const auto Km = build_half_kernel_minus_from_endpoint(sys, z, 0, a, -150, a, {-20, 0});
            EXPECT_LT(delta_check(Km, {-19, -1}, {-19, -1}).max_residual, 1e-9);
        }
}

TEST(Kernel, DeltaResidualFromMValuesInLowerHalfPlane) {
    const auto sys = free_jacobi();
    const cplx z(0.4, -0.6);
    const Mat Mp = limit_m(sys, z, 0, dirichlet(1), +1, {}).M_pm;
    const Mat Mm = limit_m(sys, z, 0, dirichlet(1), -1, {}).M_pm;
    const auto K = build_whole_kernel(sys, z, 0, dirichlet(1), Mp, Mm, {-10, 10});
    EXPECT_TRUE(K.conjugated());
    EXPECT_LT(delta_check(K, {-9, 9}, {-9, 9}).max_residual, 1e-9);
}

TEST(Kernel, CouplingIsConstantAndMatchesM) {
    const auto sys = random_system(2, {-60, 60}, 4, SystemClass::dirac);
    const cplx z(-0.2, 0.7);
    const auto K = whole(sys, z, {-50, 50});
    EXPECT_LT(omega_constancy(K), 1e-10);
    const Mat diff = K.M_minus - K.M_plus;
    EXPECT_LT((K.omega - diff.inverse()).norm() / K.omega.norm(), 1e-10);
    for (Site k : {-50, 0, 50}) EXPECT_LT((K.wronskian(k) - diff).norm() / diff.norm(), 1e-10);
    const auto Kp = build_half_kernel_plus_from_endpoint(sys, z, 0, dirichlet(2), 150, dirichlet(2), {0, 40});
    EXPECT_LT((Kp.omega - identity(2)).norm(), 1e-10);
    EXPECT_LT(omega_constancy(Kp), 1e-10);
    const auto Km = build_half_kernel_minus_from_endpoint(sys, z, 0, dirichlet(2), -150, dirichlet(2), {-40, 0});
    EXPECT_LT((Km.omega + identity(2)).norm(), 1e-10);
    EXPECT_LT(omega_constancy(Km), 1e-10);
}

TEST(Kernel, ConstructorChecksHerglotzSigns) {
    const auto sys = free_jacobi();
    const cplx z(0, 1);
    const Mat Mp = limit_m(sys, z, 0, dirichlet(1), +1, {}).M_pm;
    const Mat Mm = limit_m(sys, z, 0, dirichlet(1), -1, {}).M_pm;
    EXPECT_THROW(build_whole_kernel(sys, z, 0, dirichlet(1), Mm, Mp, {-3, 3}), InputError);
    EXPECT_THROW(build_half_kernel_plus(sys, z, 0, dirichlet(1), Mm, {0, 3}), InputError);
    EXPECT_THROW(build_whole_kernel(sys, cplx(1, 0), 0, dirichlet(1), Mp, Mm, {-3, 3}), InputError);
    EXPECT_THROW(build_half_kernel_plus(sys, z, 0, dirichlet(1), Mp, {-1, 3}), InputError);
}

TEST(Kernel, ConjugationSymmetry) {
    const auto sys = random_system(2, {-30, 30}, 9, SystemClass::general_A12zero);
    const cplx z(0.1, 0.4);
    const auto K = whole(sys, z, {-8, 8});
    const auto Kc = whole(sys, std::conj(z), {-8, 8});
    for (Site k = -8; k <= 8; k += 2)
        for (Site l = -8; l <= 8; l += 3) {
            const Mat a = K(k, l).adjoint(), b = Kc(l, k);
            EXPECT_LT((a - b).norm() / std::max(1.0, a.norm()), 1e-9) << k << "," << l;
        }
}

TEST(Kernel, MIdentityBehindAlternativeForm) {
    const auto sys = random_system(3, {-30, 30}, 2, SystemClass::jacobi);
    const auto K = whole(sys, cplx(0.5, 0.3), {-2, 2});
    const Mat& Mp = K.M_plus;
    const Mat& Mm = K.M_minus;
    const Mat w = (Mm - Mp).inverse();
    EXPECT_LT((Mp * w * Mm - Mm * w * Mp).norm() / (Mp * w * Mm).norm(), 1e-12);
}

TEST(Kernel, AlternativeRepresentationNearCentre) {
    for (auto cls : {SystemClass::jacobi, SystemClass::dirac, SystemClass::general_A12zero}) {
        const auto sys = random_system(2, {-40, 40}, 3, cls);
        const auto K = whole(sys, cplx(0.2, 0.6), {-5, 5});
        for (Site k = -5; k <= 5; ++k)
            for (Site l = -5; l <= 5; ++l) {
                if (k == l) continue;
                const Mat d = K(k, l), a = K.alternative(k, l);
                EXPECT_LT((d - a).norm() / std::max(1.0, d.norm()), 1e-9) << to_string(cls) << " " << k << "," << l;
            }
    }
}

TEST(Kernel, AlternativeRepresentationIsCancellationLimited) {
    // Far from k0 the fundamental-matrix form subtracts growing terms; its error stays
    // at rounding level relative to the size of those terms.
    const auto sys = free_jacobi();
    const auto K = whole(sys, cplx(0.5, 0.5), {-15, 15});
    for (Site k : {-15, 15})
        for (Site l : {-14, 14}) {
            if (k == l) continue;
            const double scale = K.Psi.plain(k).norm() * K.Psic.plain(l).norm() *
                                 (1 + K.M_plus.norm()) * (1 + K.M_minus.norm()) * K.omega.norm();
            EXPECT_LT((K(k, l) - K.alternative(k, l)).norm() / scale, 1e-13);
        }
    EXPECT_THROW(K.alternative(1, 1), InputError);
}

TEST(Solve, ZeroSourceGivesZero) {
    const auto sys = free_jacobi();
    const auto K = whole(sys, cplx(0, 1), {-10, 10});
    const auto sol = solve_nonhomogeneous(K, std::vector<Mat>(21, zeros(2, 1)));
    for (Site k = sol.range.lo; k <= sol.range.hi; ++k) EXPECT_EQ(sol.at(k).norm(), 0.0);
}

TEST(Solve, ImpulseResidualAndBoundaryConditions) {
    const auto sys = random_system(2, {-40, 40}, 5, SystemClass::jacobi);
    const cplx z(0.3, 0.4);
    const BoundaryData a = dirichlet(2);
    Mat imp = zeros(4, 1);
    imp(0) = 1;
    imp(3) = cplx(0, 2);

    const auto Kw = whole(sys, z, {-10, 10});
    std::vector<Mat> fw(21, zeros(4, 1));
    fw[12] = imp;
    EXPECT_LT(solve_nonhomogeneous(Kw, fw).max_residual, 1e-9);

    const auto Kp = build_half_kernel_plus_from_endpoint(sys, z, 0, a, 150, a, {0, 12});
    std::vector<Mat> fp(12, zeros(4, 1));
    fp[3] = imp;
    const auto sp = solve_nonhomogeneous(Kp, fp);
    EXPECT_LT(sp.max_residual, 1e-9);
    EXPECT_LT(boundary_residual(Kp, sp, a).norm(), 1e-10);

    const auto Km = build_half_kernel_minus_from_endpoint(sys, z, 0, a, -150, a, {-12, 0});
    std::vector<Mat> fm(12, zeros(4, 1));
    fm[8] = imp;
    const auto sm = solve_nonhomogeneous(Km, fm);
    EXPECT_LT(sm.max_residual, 1e-9);
    EXPECT_LT(boundary_residual(Km, sm, a).norm(), 1e-10);
}

TEST(Solve, EnergyBoundOnFreeJacobi) {
    const auto sys = free_jacobi();
    std::mt19937_64 rng(17);
    for (cplx z : {cplx(0, 1), cplx(1.5, 0.3), cplx(-0.5, 0.1)}) {
        const auto K = whole(sys, z, {-50, 49}, 400);
        std::vector<Mat> f;
        for (int i = 0; i < 100; ++i) f.push_back(detail::random_complex(2, 1, rng));
        const auto sol = solve_nonhomogeneous(K, f);
        EXPECT_TRUE(sol.l2_ok) << sol.energy_y << " vs " << sol.l2_bound;
        EXPECT_LT(sol.max_residual, 1e-9);
        EXPECT_TRUE(std::isfinite(sol.kernel_tail));
    }
}

TEST(Flux, VanishesForWeylSolutionAndNotForTheta) {
    const auto sys = random_system(2, {-30, 30}, 6, SystemClass::general_A12zero);
    const auto K = whole(sys, cplx(0.2, 0.5), {-10, 10});
    const Trajectory theta = K.Psi.times(vstack(identity(2), zeros(2, 2)));
    for (Site k = -9; k <= 9; ++k) {
        EXPECT_LT(boundary_flux_of(K, K.P, k, +1).norm(), 1e-10) << k;
        EXPECT_LT(boundary_flux_of(K, K.N, k, -1).norm(), 1e-10) << k;
        EXPECT_GT(boundary_flux_of(K, theta, k, +1).norm(), 1e-3) << k;
    }
}

TEST(Flux, DecaysForSolveOnFreeJacobi) {
    const auto sys = free_jacobi();
    const auto K = whole(sys, cplx(0, 1), {-20, 20});
    const auto sol = solve_nonhomogeneous(K, smooth_source(1, {-20, 20}, 0.4));
    std::vector<double> right, left;
    for (Site k = 0; k < sol.range.hi; ++k) right.push_back(boundary_flux(K, sol, k, +1).norm());
    for (Site k = 0; k > sol.range.lo; --k) left.push_back(boundary_flux(K, sol, k, -1).norm());
    const FluxTrend tr = flux_trend(right), tl = flux_trend(left);
    EXPECT_TRUE(tr.monotone_decreasing);
    EXPECT_LT(tr.log_slope, 0.0);
    EXPECT_TRUE(tl.monotone_decreasing);
}

TEST(DiagonalBlocks, AgreeWithDirectBlock) {
    const auto sys = random_system(2, {-60, 60}, 8, SystemClass::jacobi);
    const cplx z(0.4, 0.5);
    const auto K = whole(sys, z, {-25, 25});
    int checked = 0;
    for (Site k = -25; k < 25; ++k) {
        const auto d = diagonal_riccati_blocks(K, k);
        if (!d.ok) continue;
        ++checked;
        EXPECT_LT(d.defect, 1e-9) << k;
        const auto next = diagonal_riccati_blocks(K, k + 1);
        if (!next.ok) continue;
        EXPECT_LT(riccati_residual(sys, z, k, {d.V_P, next.V_P})[0].relative, 1e-10);
        EXPECT_LT(riccati_residual(sys, z, k, {d.V_N, next.V_N})[0].relative, 1e-10);
    }
    EXPECT_GE(checked, 45);
}

TEST(DiagonalBlocks, FreeJacobiRootOracle) {
    const auto sys = free_jacobi();
    const cplx z(0.7, 0.6);
    const auto K = whole(sys, z, {-5, 5}, 300);
    const cplx Vp = free_jacobi_root(z);
    const auto d = diagonal_riccati_blocks(K, 0);
    ASSERT_TRUE(d.ok);
    EXPECT_LT(std::abs(d.V_P(0, 0) - Vp), 1e-9);
    EXPECT_LT(std::abs(d.V_N(0, 0) - (z - Vp)), 1e-9);
    EXPECT_LT(std::abs(d.via_V(0, 0) - 1.0 / (2.0 * Vp - z)), 1e-9);
}

TEST(Solve, UniquenessAcrossCircleSurrogates) {
    const auto sys = random_system(1, {-30, 30}, 11, SystemClass::jacobi);
    const cplx z(0.3, 0.6);
    std::mt19937_64 rng(2);
    const auto f = smooth_source(1, {-30, 30}, 0.3);
    const auto K1 = build_whole_kernel_from_endpoints(sys, z, 0, dirichlet(1), 120, random_selfadjoint_boundary(1, rng),
                                                      -120, random_selfadjoint_boundary(1, rng), {-30, 30});
    const auto K2 = build_whole_kernel_from_endpoints(sys, z, 0, dirichlet(1), 170, random_selfadjoint_boundary(1, rng),
                                                      -170, random_selfadjoint_boundary(1, rng), {-30, 30});
    const auto s1 = solve_nonhomogeneous(K1, f), s2 = solve_nonhomogeneous(K2, f);
    for (Site k = -10; k <= 10; ++k) EXPECT_LT((s1.at(k) - s2.at(k)).norm(), 1e-6) << k;
}

TEST(Kernel, WindowIsEnforced) {
    const auto K = whole(free_jacobi(), cplx(0, 1), {-3, 3});
    EXPECT_THROW(K(4, 0), DomainError);
}
