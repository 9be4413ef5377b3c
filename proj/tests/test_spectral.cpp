#include <gtest/gtest.h>

#include "specsurg/spectrum.hpp"
#include "specsurg/surgery.hpp"
#include "specsurg/verify.hpp"

using namespace specsurg;

namespace {

Mat m1(Cplx v) { return Mat::Constant(1, 1, v); }

Mat diag2(Real a, Real b) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// Zero potential with A = I, B = -diag(beta): J(k) = B - i k A, states at kappa = beta_j > 0.
ProblemSpec free_robin(Real b1) { return make_problem(zero_potential(1), m1(1), m1(-b1)); }

const std::vector<Cplx>& k_probe() {
    static const std::vector<Cplx> ks{Cplx(0.4L, 0), Cplx(1.7L, 0), Cplx(-2.2L, 0), Cplx(0.6L, 0.5L),
                                      Cplx(-1.1L, 2.3L)};
    return ks;
}

}  // namespace

TEST(Spectrum, FreeDirichletHasNoStates) {
    auto rep = assemble_spectrum(make_problem(zero_potential(2), Mat::Zero(2, 2), -identity(2)));
    EXPECT_EQ(rep.N(), 0u);
}

TEST(Spectrum, FreeRobinStateAndNormalizations) {
    // phi = e^{-beta x} and f = e^{-beta x}, both with squared norm 1/(2 beta).
    const Real beta = 1.5L;
    auto rep = assemble_spectrum(free_robin(beta));
    ASSERT_EQ(rep.N(), 1u);
    const BoundState& s = rep.states()[0];
    EXPECT_NEAR(double(s.kappa), double(beta), 1e-9);
    EXPECT_EQ(s.multiplicity, 1);
    EXPECT_NEAR(double(std::abs(s.C(0, 0))), double(std::sqrt(2 * beta)), 1e-8);
    EXPECT_NEAR(double(std::abs(s.M(0, 0))), double(std::sqrt(2 * beta)), 1e-8);
    EXPECT_NEAR(double(std::abs(s.P.matrix()(0, 0))), 1.0, 1e-12);
}

TEST(Spectrum, DiagonalRobinSplitsIntoTwoSimpleStates) {
    auto rep = assemble_spectrum(make_problem(zero_potential(2), identity(2), -diag2(1, 2)));
    ASSERT_EQ(rep.N(), 2u);
    // Sorted by decreasing kappa.
    EXPECT_NEAR(double(rep.states()[0].kappa), 2.0, 1e-9);
    EXPECT_NEAR(double(rep.states()[1].kappa), 1.0, 1e-9);
    EXPECT_LT((rep.states()[0].P.matrix() - diag2(0, 1)).norm(), 1e-8L);
    EXPECT_LT((rep.states()[1].P.matrix() - diag2(1, 0)).norm(), 1e-8L);
}

TEST(Spectrum, EqualRobinParametersGiveDoubleState) {
    auto rep = assemble_spectrum(make_problem(zero_potential(2), identity(2), -identity(2)));
    ASSERT_EQ(rep.N(), 1u);
    EXPECT_EQ(rep.states()[0].multiplicity, 2);
    EXPECT_EQ(rep.total_N(), 2);
}

TEST(SpectrumProperty, InvariantBatteryOnRobinProblem) {
    VerifyOptions vo;
    vo.gauge_trials = 4;
    auto r = verify_problem(make_problem(zero_potential(2), identity(2), -diag2(1, 2)), vo);
    for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << " residual " << double(c.residual);
}

TEST(Surgery, SignConvention) {
    EXPECT_EQ(surgery_sign(SurgeryKind::remove), -1);
    EXPECT_EQ(surgery_sign(SurgeryKind::lower), -1);
    EXPECT_EQ(surgery_sign(SurgeryKind::add), 1);
    EXPECT_EQ(surgery_sign(SurgeryKind::raise), 1);
}

TEST(SurgeryProperty, FactorDeterminantMatchesScalarLaw) {
    // det(I + a P) = 1 + a for a rank-one projection P.
    Mat p(2, 2);
    p << 0.5L, Cplx(0, 0.5L), Cplx(0, -0.5L), 0.5L;
    const Real kappa = 0.7L;
    for (Cplx k : k_probe()) {
        Cplx ik = I_unit * kappa;
        EXPECT_LT(std::abs(jost_factor(-1, kappa, p, k).determinant() - (k + ik) / (k - ik)), 1e-15L);
        EXPECT_LT(std::abs(jost_factor(1, kappa, p, k).determinant() - (k - ik) / (k + ik)), 1e-15L);
    }
}

TEST(Surgery, RemoveFromFreeRobinLeavesNoStates) {
    const Real beta = 1.5L;
    auto rep = assemble_spectrum(free_robin(beta));
    TransformResult r = remove_bound_state(rep, beta);
    EXPECT_EQ(assemble_spectrum(r.spec()).N(), 0u);
    // det law against an independent solve of the perturbed problem
    for (Cplx k : k_probe()) {
        Cplx ratio = jost_matrix(r.spec(), k).determinant() / jost_matrix(*r.base_spec, k).determinant();
        EXPECT_LT(std::abs(ratio - r.det_factor(k)) / std::abs(r.det_factor(k)), 1e-6L);
    }
}

TEST(SurgeryProperty, AddThenRemoveRestoresTheProblem) {
    const Real kappa = 1.5L;
    auto base = make_problem(zero_potential(1), m1(1), m1(kappa));
    ComposeResult c = compose(base, {AddPlan{kappa, m1(0.8L), {}, {}}, RemovePlan{kappa}});
    ASSERT_EQ(c.steps.size(), 2u);
    for (Real x : {Real(0.2L), Real(1), Real(3)}) EXPECT_LT(c.final_spec.potential()(x).norm(), 1e-6L);
    Cplx robin = c.final_spec.B()(0, 0) / c.final_spec.A()(0, 0);
    EXPECT_LT(std::abs(robin - Cplx(kappa)), 1e-6L);
    EXPECT_EQ(assemble_spectrum(c.final_spec).N(), 0u);
}

TEST(Surgery, LowerDoubleStateToSimple) {
    auto rep = assemble_spectrum(make_problem(zero_potential(2), identity(2), -identity(2)));
    TransformResult r = lower_multiplicity(rep, 1, diag2(1, 0));
    auto after = assemble_spectrum(r.spec());
    ASSERT_EQ(after.N(), 1u);
    EXPECT_EQ(after.states()[0].multiplicity, 1);
    EXPECT_NEAR(double(after.states()[0].kappa), 1.0, 1e-7);
}

TEST(Surgery, PlanAgainstMissingStateReportsCause) {
    try {
        compose(free_robin(1.5L), {RemovePlan{0.9L}});
        FAIL() << "expected plan_step_failed";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::plan_step_failed);
        EXPECT_EQ(e.cause(), ErrorKind::no_such_state);
        EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
    }
}

TEST(Surgery, AddingAtOccupiedLevelCollides) {
    auto rep = assemble_spectrum(free_robin(1.5L));
    try {
        add_bound_state(rep, AddPlan{1.5L, m1(1), {}, {}});
        FAIL() << "expected collision";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::collision);
    }
}

TEST(SurgeryProperty, ClosureMatchesDirectSolveAfterAddition) {
    auto base = make_problem(family_exponential(1, 1, 1), m1(0), m1(-1));
    auto rep = assemble_spectrum(base);
    TransformResult r = add_bound_state(rep, AddPlan{2, m1(3), {}, {}});
    for (Cplx k : {Cplx(0.8L, 0), Cplx(0.3L, 0.9L)})
        for (Real x : {Real(0.5L), Real(2)}) {
            Mat closure = r.phi_tilde(k, x).first;
            Mat direct = solve_regular(r.spec(), k, {}, x).value(x);
            EXPECT_LT((closure - direct).norm() / std::max(Real(1), direct.norm()), 1e-6L);
        }
}
