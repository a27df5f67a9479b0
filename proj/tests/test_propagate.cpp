#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ddlab/propagate.hpp"
#include "generators.hpp"

using namespace ddlab;
using std::numbers::pi;

namespace {

SystemSpec qubit(const Matrix& q = pauli::z()) { return {2, {0.0, 1.0}, q}; }

Scenario pauli_scenario(double T = 0.1, int cutoff = 6) {
    return {qubit(), ModeSet::single(1.0, 1.0), ControlSchedule::constant((pi / T) * pauli::x(), T), cutoff};
}

Scenario random_scenario(std::mt19937& rng) {
    auto m = testgen::random_modes(rng, 2);
    const Matrix q = testgen::random_hermitian(rng, 2);
    ControlSchedule s(0.3, {{0.1, testgen::random_hermitian(rng, 2, 3.0)},
                            {0.2, testgen::random_hermitian(rng, 2, 3.0)}});
    return {SystemSpec{2, {0.0, 0.8}, q}, m, s, 3};
}

}  // namespace

TEST(SplitTime, FloorAndSnap) {
    auto a = split_time(0.37, 0.1);
    EXPECT_EQ(a.n, 3);
    EXPECT_NEAR(a.delta, 0.07, 1e-15);
    auto b = split_time(1.0, 0.1);
    EXPECT_EQ(b.n, 10);
    EXPECT_EQ(b.delta, 0.0);
    auto c = split_time(0.0, 0.1);
    EXPECT_EQ(c.n, 0);
    EXPECT_EQ(c.delta, 0.0);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double t = u(rng), T = 0.05 + u(rng) / 10;
        auto s = split_time(t, T);
        EXPECT_GE(s.delta, 0.0);
        EXPECT_LT(s.delta, T);
        EXPECT_NEAR(s.n * T + s.delta, t, 1e-12 * std::max(1.0, t));
    }
    EXPECT_THROW(split_time(-1.0, 0.1), Error);
}

TEST(Evolve, UncoupledUncontrolledIsDiagonalExponential) {
    Scenario sc{qubit(), ModeSet::single(1.0, 1.0), ControlSchedule::zero(2, 0.25), 4};
    auto dyn = sc.coarse();
    auto pair = evolve(dyn, 0.0, 1.0);
    const Matrix h = dyn.model().hs() + dyn.model().hf();
    Matrix expect = Matrix::Zero(dyn.dim(), dyn.dim());
    for (Eigen::Index i = 0; i < dyn.dim(); ++i) expect(i, i) = std::exp(-I * h(i, i).real());
    EXPECT_LE(max_abs(pair.u_0 - expect), 1e-10);
    EXPECT_EQ(max_abs(pair.u_g - pair.u_0), 0.0);
}

TEST(Evolve, ZeroCouplingSharesThePath) {
    auto dyn = pauli_scenario().coarse();
    for (Path p : {Path::direct, Path::periodic}) {
        auto pair = evolve(dyn, 0.0, 0.73, p);
        EXPECT_EQ(max_abs(pair.u_g - pair.u_0), 0.0);
    }
}

TEST(Evolve, RejectsBadArguments) {
    auto dyn = pauli_scenario().coarse();
    EXPECT_THROW(evolve(dyn, 0.1, -1.0), Error);
    EXPECT_THROW(evolve(dyn, -0.1, 1.0), Error);
    EXPECT_THROW(dyn.propagator(0.1, 0.2, 0.3), Error);
    auto sc = pauli_scenario();
    sc.substeps = 0;
    EXPECT_THROW(sc.coarse(), Error);
}

TEST(Evolve, FactorizedUncoupledAgrees) {
    std::mt19937 rng(91);
    for (int trial = 0; trial < 6; ++trial) {
        auto sc = random_scenario(rng);
        auto dyn = sc.coarse();
        for (double t : {0.0, 0.05, 0.3, 0.71, 2.0}) {
            auto pair = evolve(dyn, 0.2, t);
            EXPECT_LE(pair.factorized_deviation, 1e-9) << t;
        }
    }
}

TEST(Evolve, UnitarityAndCocycle) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.5);
    for (int trial = 0; trial < 8; ++trial) {
        auto sc = random_scenario(rng);
        auto dyn = sc.coarse();
        double a = u(rng), b = u(rng), c = u(rng);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        for (const auto& r : algebra_check(dyn, 0.4, a, b, c)) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured;
        const Matrix full = dyn.propagator(0.4, 1.0);
        EXPECT_LE(op_norm(full - dyn.propagator(0.4, 1.0, 0.5) * dyn.propagator(0.4, 0.5)), 1e-9);
    }
}

TEST(Evolve, SubstepsOnlyAffectConditioning) {
    auto sc = pauli_scenario();
    auto one = sc.coarse();
    sc.substeps = 2;
    auto two = sc.coarse();
    EXPECT_LE(op_norm(one.propagator(0.05, 0.37) - two.propagator(0.05, 0.37)), 1e-12);
}

TEST(Evolve, PeriodicPathMatchesDirect) {
    std::mt19937 rng(19);
    for (int trial = 0; trial < 4; ++trial) {
        auto dyn = random_scenario(rng).coarse();
        for (double t : {0.29, 0.3, 1.23, 2.4}) {
            auto d = evolve(dyn, 0.3, t, Path::direct);
            auto p = evolve(dyn, 0.3, t, Path::periodic);
            EXPECT_LE(op_norm(d.u_g - p.u_g), 1e-9);
            EXPECT_LE(op_norm(d.u_0 - p.u_0), 1e-9);
        }
    }
}

TEST(Periodicity, SinglePeriodIsExact) {
    auto dyn = pauli_scenario().coarse();
    for (const auto& r : periodicity_check(dyn, 0.01, 1)) EXPECT_EQ(r.measured, 0.0);
}

TEST(Periodicity, RandomModelsUpToSixteen) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        auto dyn = random_scenario(rng).coarse();
        for (int n : {3, 7, 16})
            for (const auto& r : periodicity_check(dyn, 0.2, n)) EXPECT_TRUE(r.passed()) << r.name << " " << r.measured;
    }
}

TEST(Periodicity, TamperedPeriodIsCaught) {
    std::mt19937 rng(3);
    auto sc = random_scenario(rng);
    auto dyn = sc.coarse();
    const auto rs = periodicity_check(dyn, 0.2, 3, 0.9 * sc.schedule.period());
    for (const auto& r : rs) {
        EXPECT_FALSE(r.passed());
        EXPECT_GT(r.measured, 1e-3);
    }
}

TEST(WeightedDeviation, TrivialCases) {
    auto dyn = pauli_scenario().coarse();
    EXPECT_EQ(weighted_deviation(evolve(dyn, 0.0, 0.5), dyn.model(), 0), 0.0);
    EXPECT_EQ(weighted_deviation(evolve(dyn, 1e-3, 0.0), dyn.model(), 1), 0.0);
    EXPECT_THROW(weighted_deviation(evolve(dyn, 1e-3, 0.1), dyn.model(), -1), Error);
}

TEST(WeightedDeviation, MatchesBruteForceWeighting) {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 4; ++trial) {
        auto dyn = random_scenario(rng).coarse();
        for (int L = 0; L <= 2; ++L) {
            auto pair = evolve(dyn, 0.5, 3.0);
            const double brute = op_norm(dyn.model().theta(L).asDiagonal() * (pair.u_g - pair.u_0) *
                                         dyn.model().theta(-L - 2).asDiagonal());
            const double w = weighted_deviation(pair, dyn.model(), L);
            EXPECT_DOUBLE_EQ(w, brute);
            // Θ⁻² ≤ 1, so only the unweighted-left case is capped by ‖U_g − U_0‖ ≤ 2
            if (L == 0) EXPECT_LE(w, 2.0);
        }
    }
}

TEST(WeightedDeviation, LinearInSmallCoupling) {
    auto dyn = pauli_scenario().coarse();
    const double a = weighted_deviation(evolve(dyn, 1e-4, 0.5), dyn.model(), 0);
    const double b = weighted_deviation(evolve(dyn, 2e-4, 0.5), dyn.model(), 0);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(b / a, 2.0, 0.2);
}

TEST(WeightedPropagator, ZeroCouplingGivesUnitNorm) {
    auto sc = pauli_scenario();
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 1);
    for (const auto& r : weighted_propagator_bound_check(sc, c, 0.0, 1, {{0.3, 0.1}, {0.2, 0.2}})) {
        EXPECT_NEAR(r.measured, 1.0, 1e-12);
        EXPECT_EQ(r.bound, 1.0);
    }
}

TEST(WeightedPropagator, DefaultScenarioSmallCoupling) {
    auto sc = pauli_scenario(0.1, 8);
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 2);
    auto rs = weighted_propagator_bound_check(sc, c, 1e-3, 2, {{0.1, 0.0}, {0.25, 0.05}});
    ASSERT_EQ(rs.size(), 12u);
    for (const auto& r : rs) {
        EXPECT_TRUE(r.cutoff_stable) << r.name;
        EXPECT_TRUE(r.passed()) << r.name << " " << r.measured << " " << r.bound;
    }
}

TEST(UncoupledPropagator, CommutesWithTheta) {
    std::mt19937 rng(8);
    auto dyn = random_scenario(rng).coarse();
    const RealVector th = dyn.model().theta(1);
    for (double t : {0.1, 0.77, 2.5}) {
        const Matrix u = dyn.propagator(0.0, t);
        EXPECT_LE(op_norm(th.asDiagonal() * u - u * th.asDiagonal()), 1e-10);
    }
}

TEST(Telescoping, ReconstructsTheDifference) {
    auto dyn = pauli_scenario().coarse();
    for (double t : {0.0, 0.05, 0.1, 0.37, 1.0}) EXPECT_LE(telescoping_defect(dyn, 1e-2, t), 1e-8) << t;
    std::mt19937 rng(12);
    auto rdyn = random_scenario(rng).coarse();
    EXPECT_LE(telescoping_defect(rdyn, 0.3, 1.45), 1e-8);
}

TEST(WDiagnostics, RepresentationAndBound) {
    auto sc = pauli_scenario(0.1, 8);
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 0);
    auto pts = w_diagnostics(sc, c, 1e-3, {0.0, 0.025, 0.05, 0.1}, 0);
    ASSERT_EQ(pts.size(), 4u);
    EXPECT_EQ(pts[0].direct_norm, 0.0);
    EXPECT_TRUE(pts[0].bound.passed());
    for (const auto& p : pts) {
        EXPECT_LE(p.representation_error, 1e-4) << p.s;
        EXPECT_TRUE(p.bound.passed()) << p.s << " " << p.bound.measured << " " << p.bound.bound;
    }
}

TEST(WDiagnostics, ZeroCouplingVanishes) {
    auto sc = pauli_scenario();
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 0);
    for (const auto& p : w_diagnostics(sc, c, 0.0, {0.03, 0.1}, 0)) {
        EXPECT_EQ(p.direct_norm, 0.0);
        EXPECT_EQ(p.representation_error, 0.0);
    }
}

TEST(KeyEstimate, DecoupledScheduleIsQuadratic) {
    auto sc = pauli_scenario(0.1, 6);
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 0);
    auto r = key_decoupling_estimate_check(sc, c, 0);
    EXPECT_TRUE(r.decoupled);
    EXPECT_TRUE(r.check.passed()) << r.check.measured << " " << r.check.bound;
    EXPECT_NEAR(r.bound, 4.0 * (2.0 + 10.0 * pi) * 0.01 * 16.0, 1e-12);
    EXPECT_GE(r.ratio, 3.0);
}

TEST(KeyEstimate, UncontrolledScheduleIsLinear) {
    Scenario sc{qubit(), ModeSet::single(1.0, 1.0), ControlSchedule::zero(2, 0.1), 6};
    auto c = compute_constants(sc.system, sc.modes, sc.schedule, 0);
    auto r = key_decoupling_estimate_check(sc, c, 0);
    EXPECT_FALSE(r.decoupled);
    EXPECT_EQ(r.check.status, Status::skipped);
    EXPECT_NEAR(r.ratio, 2.0, 0.2);
}
