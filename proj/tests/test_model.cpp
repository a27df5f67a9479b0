#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ddlab/model.hpp"
#include "generators.hpp"

using namespace ddlab;
using std::numbers::pi;

namespace {

SystemSpec qubit(const Matrix& q = pauli::z()) { return {2, {0.0, 1.0}, q}; }

}  // namespace

TEST(SystemHamiltonian, DescendingDiagonal) {
    Matrix expect = Matrix::Zero(2, 2);
    expect(0, 0) = 1.0;
    EXPECT_EQ(max_abs(build_hs(qubit()) - expect), 0.0);
    SystemSpec three{3, {0.0, 1.0, 2.5}, Matrix::Zero(3, 3)};
    EXPECT_DOUBLE_EQ(op_norm(build_hs(three)), 2.5);
    EXPECT_DOUBLE_EQ(build_hs(three)(2, 2).real(), 0.0);
}

TEST(SystemHamiltonian, RejectsInvalidSpecs) {
    EXPECT_THROW(build_hs(SystemSpec{2, {1.0, 1.0}, pauli::z()}), Error);
    EXPECT_THROW(build_hs(SystemSpec{2, {-0.5, 1.0}, pauli::z()}), Error);
    EXPECT_THROW(build_hs(SystemSpec{2, {0.0, 1.0, 2.0}, pauli::z()}), Error);
    EXPECT_THROW(build_hs(SystemSpec{2, {0.0, 1.0}, pauli::y() * I}), Error);
    EXPECT_THROW(build_hs(SystemSpec{1, {0.0}, Matrix::Zero(1, 1)}), Error);
}

TEST(Interaction, ZeroCouplingMatrix) {
    auto b = build_basis(1, 3);
    EXPECT_EQ(max_abs(build_interaction(qubit(Matrix::Zero(2, 2)), ModeSet::single(1.0, 1.0), b)), 0.0);
}

TEST(Interaction, TensorNormFactorizes) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        auto m = testgen::random_modes(rng, 1 + trial % 2);
        auto b = build_basis(m.count(), 4);
        const Matrix q = testgen::random_hermitian(rng, 3);
        SystemSpec spec{3, {0.0, 0.5, 2.0}, q};
        Model model(spec, m, b);
        EXPECT_LE(hermitian_defect(model.hi()), 1e-12 * max_abs(model.hi()));
        EXPECT_EQ(model.dim(), static_cast<Eigen::Index>(3 * b->dim()));
        EXPECT_NEAR(op_norm(model.hi()), op_norm(q) * op_norm(model.field()), 1e-8);
    }
}

TEST(Interaction, SingleModeKroneckerLayout) {
    auto b = build_basis(1, 1);
    const Matrix hi = build_interaction(qubit(), ModeSet::single(1.0, 1.0), b);
    Matrix expect(4, 4);
    expect << 0, 1, 0, 0,
              1, 0, 0, 0,
              0, 0, 0, -1,
              0, 0, -1, 0;
    EXPECT_EQ(max_abs(hi - expect), 0.0);
}

TEST(TotalHamiltonian, UncoupledUncontrolledIsDiagonal) {
    auto b = build_basis(1, 3);
    auto m = ModeSet::single(1.0, 1.0);
    const Matrix h = build_total(qubit(), m, b, ControlSchedule::zero(2, 0.1), 0.0, 0.03);
    EXPECT_EQ(max_abs(h - Matrix(h.diagonal().asDiagonal())), 0.0);
    // ground level ⊗ vacuum sits at composite index (N−1)·dim(Fock)
    EXPECT_EQ(h(4, 4).real(), 0.0);
    EXPECT_EQ(h(0, 0).real(), 1.0);
    EXPECT_EQ(h(1, 1).real(), 2.0);
}

TEST(TotalHamiltonian, PeriodicAndHermitian) {
    std::mt19937 rng(2);
    auto m = testgen::random_modes(rng, 2);
    auto b = build_basis(2, 3);
    ControlSchedule s(0.4, {{0.1, testgen::random_hermitian(rng, 2, 3.0)},
                            {0.3, testgen::random_hermitian(rng, 2, 3.0)}});
    Model model(qubit(), m, b);
    for (double t : {0.05, 0.2, 0.39}) {
        const Matrix h = model.total(s, 0.3, t);
        EXPECT_LE(hermitian_defect(h), 1e-12 * max_abs(h));
        EXPECT_EQ(max_abs(h - model.total(s, 0.3, t + 0.4)), 0.0);
    }
    EXPECT_THROW(build_total(qubit(), m, b, s, -0.1, 0.0), Error);
}

TEST(Constants, SingleModeValues) {
    auto c = compute_constants(qubit(), ModeSet::single(1.0, 1.0), ControlSchedule::zero(2, 1.0), 0);
    EXPECT_DOUBLE_EQ(c.m_minus_half, 4.0);
    EXPECT_DOUBLE_EQ(c.m(2), 12.0);
    EXPECT_DOUBLE_EQ(c.M, 16.0);
    EXPECT_DOUBLE_EQ(c.opnorm_q, 1.0);
    EXPECT_DOUBLE_EQ(c.C0, 2.0);
}

TEST(Constants, ZeroAmplitudeGivesZeroM) {
    auto c = compute_constants(qubit(), ModeSet::single(1.0, 0.0), ControlSchedule::zero(2, 1.0), 2);
    EXPECT_EQ(c.M, 0.0);
}

TEST(Constants, ControlEntersC0) {
    const double T = 0.1;
    auto s = ControlSchedule::constant((pi / T) * pauli::x(), T);
    auto c = compute_constants(qubit(), ModeSet::single(1.0, 1.0), s, 0);
    EXPECT_NEAR(c.C0, 2.0 + 10.0 * pi, 1e-12);
    EXPECT_NEAR(c.C0, 33.4159, 1e-4);
}

TEST(Constants, MonotoneInLAndAmplitude) {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = testgen::random_modes(rng, 3);
        auto s = ControlSchedule::zero(2, 1.0);
        double prev = 0.0;
        for (int L = 0; L <= 4; ++L) {
            const double M = compute_constants(qubit(), m, s, L).M;
            EXPECT_GE(M, prev);
            prev = M;
        }
        std::vector<cplx> bigger(m.amplitudes().begin(), m.amplitudes().end());
        bigger[trial % 3] *= 1.5;
        ModeSet m2(std::vector<double>(m.frequencies().begin(), m.frequencies().end()), bigger);
        EXPECT_GE(compute_constants(qubit(), m2, s, 1).M, compute_constants(qubit(), m, s, 1).M);
    }
}

TEST(Hypotheses, SmallCouplingArithmetic) {
    auto c = compute_constants(qubit(), ModeSet::single(1.0, 1.0), ControlSchedule::zero(2, 0.1), 0);
    auto ok = check_hypotheses(c, 1e-3, 0.1, 0.0, 1e-9);
    EXPECT_TRUE(ok.passed());
    EXPECT_NEAR(ok.items[2].measured, 1.6e-3, 1e-15);

    auto bad = check_hypotheses(c, 1.0, 0.1, 0.0, 1e-9);
    EXPECT_FALSE(bad.passed());
    ASSERT_EQ(bad.reasons().size(), 1u);
    EXPECT_EQ(bad.reasons()[0], "g‖Q‖MT = 1.6 > 1");

    auto undecoupled = check_hypotheses(c, 1e-3, 0.1, 0.1, 1e-9);
    EXPECT_FALSE(undecoupled.passed());
}

TEST(RelativeBounds, SingleModePauli) {
    auto m = ModeSet::single(1.0, 1.0);
    Model model(qubit(), m, build_basis(1, 10));
    const double T = 0.1;
    auto s = ControlSchedule::constant((pi / T) * pauli::x(), T);
    auto rs = relative_bounds_check(model, s, 0.5, 0);
    ASSERT_FALSE(rs.empty());
    EXPECT_EQ(rs[0].name, "weighted_interaction[l=0,j=1]");
    EXPECT_DOUBLE_EQ(rs[0].bound, 8.0);  // ‖Q‖(M₋₁/₂ + M₁) = 4 + 4
    EXPECT_LT(rs[0].measured, 8.0);
    for (const auto& r : rs) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured << " " << r.bound;
}

TEST(RelativeBounds, NoCouplingNoCommutator) {
    auto m = ModeSet::single(1.0, 1.0);
    Model model(qubit(), m, build_basis(1, 6));
    auto rs = relative_bounds_check(model, ControlSchedule::zero(2, 1.0), 0.0, 1);
    for (const auto& r : rs)
        if (r.name.rfind("theta_commutator", 0) == 0) EXPECT_EQ(r.measured, 0.0);
}

TEST(RelativeBounds, RandomizedInputs) {
    std::mt19937 rng(404);
    for (int trial = 0; trial < 12; ++trial) {
        auto m = testgen::random_modes(rng, 1 + trial % 3);
        auto b = build_basis(m.count(), m.count() == 3 ? 4 : 6);
        const int n = 2 + trial % 2;
        std::vector<double> e(n);
        for (int i = 0; i < n; ++i) e[i] = 0.7 * i;
        Model model(SystemSpec{n, e, testgen::random_hermitian(rng, n)}, m, b);
        ControlSchedule s(0.5, {{0.2, testgen::random_hermitian(rng, n, 4.0)},
                                {0.3, testgen::random_hermitian(rng, n, 4.0)}});
        for (const auto& r : relative_bounds_check(model, s, 0.05, 2))
            EXPECT_TRUE(r.passed()) << r.name << " " << r.measured << " " << r.bound;
    }
}
