#include "dhs/testkit.hpp"

#include <gtest/gtest.h>

using namespace dhs;

namespace {

const SystemClass kClasses[] = {SystemClass::jacobi, SystemClass::dirac, SystemClass::general_A12zero};

}  // namespace

TEST(Propagate, StepBackwardInvertsStepForward) {
    for (auto cls : kClasses)
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            const auto sys = random_system(2, {0, 30}, seed, cls);
            const cplx z(0.3, -0.4);
            std::mt19937_64 rng(seed);
            const HatState s0{10, z, detail::random_complex(4, 3, rng)};
            const HatState s1 = step_backward(sys, step_forward(sys, s0));
            EXPECT_LT((s1.data - s0.data).norm() / s0.data.norm(), 1e-13);
            EXPECT_EQ(s1.k, 10);
        }
}

TEST(Propagate, HatStatesSatisfyBothBlockRows) {
    const auto sys = random_system(2, {0, 20}, 8, SystemClass::general_A12zero);
    const cplx z(-0.7, 0.25);
    const Trajectory t = propagate(sys, {5, z, identity(4)}, {1, 18});
    const int m = 2;
    for (Site k = 2; k <= 17; ++k) {
        const Mat c = sys.pencil(z, k);
        // rho(k) psi2(k+1) = c11 psi1(k) + c12 psi2(k)
        const Mat r1 = sys.rho(k) * t.psi2_plus(k) - c.topLeftCorner(m, m) * t.psi1(k) - c.topRightCorner(m, m) * t.psi2(k);
        // rho(k-1) psi1(k-1) = c21 psi1(k) + c22 psi2(k)
        const Mat r2 = sys.rho(k - 1) * t.psi1(k - 1) - c.bottomLeftCorner(m, m) * t.psi1(k) -
                       c.bottomRightCorner(m, m) * t.psi2(k);
        const double scale = t.hat(k).norm() + t.hat(k - 1).norm();
        EXPECT_LT(r1.norm() / scale, 1e-13);
        EXPECT_LT(r2.norm() / scale, 1e-13);
    }
}

TEST(Propagate, JacobiThreeTermEquivalence) {
    const auto sys = random_system(2, {0, 25}, 2, SystemClass::jacobi);
    const cplx z(1.1, 0.3);
    const Trajectory t = propagate(sys, {0, z, identity(4)}, {0, 25});
    for (Site k = 1; k <= 24; ++k) {
        const Mat Ly = jacobi_apply(sys, [&](Site j) { return t.psi1(j); }, k);
        EXPECT_LT((Ly - z * t.psi1(k)).norm() / (t.psi1(k + 1).norm() + t.psi1(k).norm()), 1e-13);
    }
}

TEST(Propagate, FreeJacobiDirichletSolutionIsChebyshev) {
    // psi1(k) = sin(k t) / sin t with z = 2 - 2 cos t, Dirichlet at 0.
    const auto sys = jacobi_system(std::vector<Mat>(40, identity(1)), std::vector<Mat>(40, zeros(1, 1)));
    const double th = 0.37;
    const cplx z = 2.0 - 2.0 * std::cos(th);
    const FundamentalMatrix f = fundamental(sys, z, 0, dirichlet(1), {0, 30});
    // Phi column: psi1(0) = 0 under Dirichlet; normalize by psi1(1).
    const cplx s1 = f.phi1(1)(0, 0);
    for (Site k = 0; k <= 30; ++k) {
        const cplx expect = std::sin(k * th) / std::sin(th);
        EXPECT_NEAR(std::abs(f.phi1(k)(0, 0) / s1 - expect), 0.0, 1e-11) << "k=" << k;
    }
}

TEST(Propagate, FundamentalInitialSatisfiesBoundaryCondition) {
    std::mt19937_64 rng(11);
    const auto sys = random_system(3, {0, 10}, 6, SystemClass::general_A12zero);
    for (int i = 0; i < 5; ++i) {
        const BoundaryData a = random_selfadjoint_boundary(3, rng);
        const Mat init = fundamental_initial(sys, 4, a);
        const Mat at = weighted_boundary(a, sys, 4);
        // Phi satisfies the boundary condition at k0; Theta is normalized against it.
        EXPECT_LT((at * init.rightCols(3)).norm(), 1e-12);
        EXPECT_LT((at * init.leftCols(3) - identity(3)).norm(), 1e-12);
    }
}

TEST(Propagate, SymplecticIdentityOnShortWindows) {
    for (auto cls : kClasses) {
        const auto sys = random_system(2, {0, 30}, 13, cls);
        const cplx z(0.5, 0.35);
        const BoundaryData a = dirichlet(2);
        const FundamentalMatrix F = fundamental(sys, z, 10, a, {5, 20});
        const FundamentalMatrix Fc = fundamental(sys, std::conj(z), 10, a, {5, 20});
        const Mat J = symplectic_unit(2);
        for (Site k = 5; k <= 20; ++k) {
            const Mat W = Fc.hat(k).adjoint() * sys.J_rho(k) * F.hat(k);
            const double scale = Fc.hat(k).norm() * F.hat(k).norm();
            EXPECT_LT((W + J).norm() / scale, 1e-13) << to_string(cls) << " k=" << k;
        }
    }
}

TEST(Propagate, LagrangeIdentityProperty) {
    const std::pair<cplx, cplx> zs[] = {{{0.3, 0.2}, {-0.5, 0.1}}, {{1.0, -0.3}, {0.2, 0.4}}};
    for (auto cls : kClasses)
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto sys = random_system(2, {0, 60}, seed, cls);
            for (const auto& [z1, z2] : zs) {
                const Trajectory t1 = propagate(sys, {0, z1, identity(4)}, {0, 60});
                const Trajectory t2 = propagate(sys, {0, z2, identity(4)}, {0, 60});
                const LagrangeCheck lc = lagrange_check(sys, t1, t2);
                EXPECT_LT(lc.max_step_error, 1e-12);
                EXPECT_LT(lc.max_telescope_error, 1e-11);
            }
        }
}

TEST(Propagate, SingularCouplingRaisesSteppingError) {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 1;
    Mat B(2, 2);
    B << 0, 1, 1, 1;
    Mat Bs = Mat::Zero(2, 2);
    Bs(1, 1) = 1;  // c21 = 0 at z with A21 = 0
    const HamiltonianSystem sys(1, 0, {A, A, A, A}, {B, B, Bs, B}, std::vector<Mat>(4, identity(1)),
                                Extension::constant_edge);
    try {
        propagate(sys, {0, cplx(0, 1), identity(2)}, {0, 3});
        FAIL() << "expected SteppingError";
    } catch (const SteppingError& e) {
        EXPECT_NE(std::string(e.what()).find("k=2"), std::string::npos) << e.what();
    }
}

TEST(Propagate, ScaleWarningOnGrowth) {
    const auto sys = jacobi_system({Mat::Constant(1, 1, 1.0)}, {Mat::Constant(1, 1, 0.0)});
    const Trajectory t = propagate(sys, {0, cplx(-30.0, 0.0), identity(2)}, {0, 120});
    EXPECT_TRUE(t.scale_warning());
    const Trajectory s = propagate(sys, {0, cplx(1.0, 0.0), identity(2)}, {0, 120});
    EXPECT_FALSE(s.scale_warning());
}

TEST(Definiteness, SingleJacobiSiteIsNotDefinite) {
    const auto sys = random_system(2, {0, 10}, 3, SystemClass::jacobi);
    EXPECT_FALSE(check_definiteness(sys, cplx(0, 1), {4, 4}).definite);
    EXPECT_TRUE(check_definiteness(sys, cplx(0, 1), {4, 5}).definite);
}

TEST(Definiteness, GramMatrixIsHermitianPsd) {
    const auto sys = random_system(2, {0, 10}, 7, SystemClass::dirac);
    const auto d = check_definiteness(sys, cplx(0.4, 0.9), {0, 6});
    EXPECT_LT(hermitian_defect(d.gram), 1e-12);
    EXPECT_GE(d.min_eig, -1e-12);
}

TEST(Propagate, SpanPropagationKeepsOneBasis) {
    const auto sys = random_system(2, {0, 40}, 3, SystemClass::general_A12zero);
    const cplx z(0.2, 0.6);
    std::mt19937_64 rng(4);
    const Mat init = detail::random_complex(4, 2, rng);
    const Trajectory plain = propagate(sys, {20, z, init}, {12, 28});
    const Trajectory span = propagate_span(sys, {20, z, init}, {12, 28}, 15);
    EXPECT_LT((span.hat(15).adjoint() * span.hat(15) - identity(2)).norm(), 1e-12);
    const Mat C = plain.hat(15).colPivHouseholderQr().solve(span.hat(15));
    for (Site k = 12; k <= 28; ++k)
        EXPECT_LT((plain.hat(k) * C - span.hat(k)).norm() / span.hat(k).norm(), 1e-10) << k;
    EXPECT_LT((plain.psi2(12) * C - span.psi2(12)).norm() / span.hat(12).norm(), 1e-10);
}

TEST(Propagate, SpanPropagationSurvivesLongDecay) {
    // 150 steps toward the anchor: the plain columns collapse, the span version does not.
    const auto sys = random_system(2, {0, 10}, 5, SystemClass::jacobi);
    const Trajectory span = propagate_span(sys, {150, cplx(0.3, 0.5), vstack(identity(2), zeros(2, 2))}, {0, 150}, 0);
    const Mat h = span.hat(0);
    EXPECT_GT(min_singular(h) / op_norm(h), 0.99);
}
