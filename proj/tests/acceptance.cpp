// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddlab/commands.hpp"
#include "ddlab/experiments.hpp"
#include "generators.hpp"

using namespace ddlab;
using std::numbers::pi;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= budget_s) {
        o.ok = false;
        o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
    }
    if (!o.ok) ++failures;
    std::printf("criterion %d %s  %s: %s (%.2f s)\n", id, o.ok ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::mt19937 rng_for(int criterion) { return std::mt19937(20240 + criterion); }

// J ≤ 3 modes and a cutoff ≤ 8 keeping the Fock dimension moderate.
std::pair<ModeSet, int> random_fock_input(std::mt19937& rng, int min_cutoff) {
    std::uniform_int_distribution<int> modes(1, 3);
    const int J = modes(rng);
    const int max_cut = J == 3 ? 6 : 8;
    std::uniform_int_distribution<int> cut(min_cutoff, max_cut);
    return {testgen::random_modes(rng, static_cast<std::size_t>(J)), cut(rng)};
}

Outcome operator_identities() {
    auto rng = rng_for(1);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto [modes, cutoff] = random_fock_input(rng, 4);
        const auto basis = build_basis(modes.count(), cutoff);
        worst = std::max(worst, check_ccr(basis, modes).measured);
        for (int n = 1; n <= 4; ++n)
            for (const auto& r : check_commutator_identities(basis, modes, n)) worst = std::max(worst, r.measured);
    }
    return {worst <= 1e-12, "worst entrywise deviation " + fmt("%.3g", worst) + " ≤ 1e-12 over 50 inputs, n = 1..4"};
}

Outcome field_bounds() {
    auto rng = rng_for(2);
    int strict_violations = 0, monotone_violations = 0, checks = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto [modes, max_cut] = random_fock_input(rng, 2);
        std::vector<double> prev;
        for (int cutoff = 1; cutoff <= max_cut; ++cutoff) {
            const auto basis = build_basis(modes.count(), cutoff);
            std::vector<double> cur;
            for (int n = 1; n <= 3; ++n)
                for (const auto& r : check_field_bounds(basis, modes, n)) {
                    ++checks;
                    if (!r.passed()) ++strict_violations;
                    cur.push_back(r.measured);
                }
            for (std::size_t k = 0; k < prev.size(); ++k)
                if (cur[k] < prev[k] * (1 - 1e-12)) ++monotone_violations;
            prev = cur;
        }
    }
    return {strict_violations == 0 && monotone_violations == 0,
            std::to_string(checks) + " strict checks, " + std::to_string(strict_violations) +
                " violations, " + std::to_string(monotone_violations) + " compression-monotonicity violations"};
}

Outcome corollary_suite() {
    const auto sc = default_scenario();
    const double g = 1e-3;
    const int L = 2;
    const auto c = compute_constants(sc.system, sc.modes, sc.schedule, L);
    int failed = 0, stable = 0, unconverged = 0;
    for (const auto& r : relative_bounds_check(sc.fine().model(), sc.schedule, g, L))
        if (!r.passed()) ++failed;
    const auto rs = weighted_propagator_bound_check(sc, c, g, L, {{0.1, 0.0}, {0.5, 0.0}, {1.0, 0.5}, {0.35, 0.2}});
    for (const auto& r : rs) {
        if (r.status == Status::unconverged) {
            ++unconverged;
            continue;
        }
        ++stable;
        if (!r.passed()) ++failed;
    }
    return {failed == 0 && stable > 0,
            "relative bounds ℓ ≤ 2 and " + std::to_string(stable) + " cutoff-stable propagator bounds, " +
                std::to_string(failed) + " failures, " + std::to_string(unconverged) + " unconverged"};
}

Outcome decoupling_and_action() {
    const double T = 0.1;
    const auto constant = ControlSchedule::constant((pi / T) * pauli::x(), T);
    const double residual = decoupling_residual(constant, pauli::z()).residual_norm;
    bool ok = residual <= 1e-8 * T;
    std::string d = "constant σ_x residual " + fmt("%.3g", residual);

    double min_action = decoupling_residual(constant, pauli::z()).action;
    int feasible = 0;
    const auto bb = design_bangbang(pauli::z(), T, pauli::x());
    const auto bbr = decoupling_residual(bb, pauli::z());
    if (bbr.satisfied) {
        ++feasible;
        min_action = std::min(min_action, bbr.action);
    }
    for (double period : {0.1, 1.0})
        for (int pieces : {3, 4})
            for (unsigned seed : {1u, 2u}) {
                const auto dsg = design_optimized(pauli::z(), period, pieces, 100.0, seed);
                if (dsg.feasible) {
                    ++feasible;
                    min_action = std::min(min_action, dsg.action);
                }
            }
    ok = ok && feasible > 0 && min_action >= 0.5 - 1e-3;
    d += "; " + std::to_string(feasible) + " feasible designs, least action " + fmt("%.4f", min_action);

    const auto coarse = action_identity_check(constant, pauli::z());
    const auto fine = action_identity_check(constant, pauli::z(), 2 * coarse.panels);
    ok = ok && coarse.relative_error <= 1e-4 && fine.relative_error <= 0.5 * coarse.relative_error;
    d += "; double-integral identity " + fmt("%.3g", coarse.relative_error) + " → " + fmt("%.3g", fine.relative_error);
    return {ok, d};
}

Outcome propagator_algebra() {
    auto rng = rng_for(5);
    double unit = 0, cocycle = 0, period_ratio = 0, telescoping = 0, factorized = 0;
    std::size_t max_dim = 0;
    const std::vector<std::tuple<int, int, int>> shapes = {{2, 2, 8}, {2, 3, 6}, {3, 2, 7}, {3, 1, 8}};
    for (const auto& [levels, J, cutoff] : shapes) {
        std::vector<double> e(levels);
        for (int i = 0; i < levels; ++i) e[i] = 0.6 * i;
        const double T = 0.25;
        ControlSchedule s(T, {{0.1, testgen::random_hermitian(rng, levels, 4.0)},
                              {0.15, testgen::random_hermitian(rng, levels, 4.0)}});
        Scenario sc{SystemSpec{levels, e, testgen::random_hermitian(rng, levels)},
                    testgen::random_modes(rng, static_cast<std::size_t>(J)), s, cutoff};
        const Dynamics dyn = sc.coarse();
        max_dim = std::max(max_dim, static_cast<std::size_t>(dyn.dim()));
        const double g = 0.1;
        for (const auto& r : algebra_check(dyn, g, 0.07, 0.31, 0.9))
            (r.name == "cocycle" ? cocycle : unit) = std::max(r.name == "cocycle" ? cocycle : unit, r.measured);
        for (int n = 1; n <= 16; ++n)
            for (const auto& r : periodicity_check(dyn, g, n)) period_ratio = std::max(period_ratio, r.measured / (n * 1e-9));
        telescoping = std::max(telescoping, telescoping_defect(dyn, g, 2.6 * T));
        for (double t : {0.4, 1.3}) factorized = std::max(factorized, evolve(dyn, g, t).factorized_deviation);
    }
    const bool ok = unit <= 1e-9 && cocycle <= 1e-9 && period_ratio <= 1.0 && telescoping <= 1e-8 &&
                    factorized <= 1e-9 && max_dim <= 200;
    return {ok, "dim ≤ " + std::to_string(max_dim) + "; unitarity " + fmt("%.2g", unit) + ", cocycle " +
                    fmt("%.2g", cocycle) + ", periodicity/(n·1e-9) " + fmt("%.2g", period_ratio) +
                    ", telescoping " + fmt("%.2g", telescoping) + ", factorized U_0 " + fmt("%.2g", factorized)};
}

Outcome decoherence_bound() {
    const auto sc = default_scenario();
    bool ok = true;
    std::string d;
    for (double t : {0.1, 0.5, 1.0}) {
        const auto r = verify_bound(sc, 1e-3, t, 0);
        ok = ok && r.status == Status::pass && r.cutoff_stable && r.lhs <= r.rhs_tight;
        d += "t=" + fmt("%g", t) + ": " + fmt("%.3g", r.lhs) + " ≤ " + fmt("%.3g", r.rhs_tight) + "; ";
    }
    // independent arithmetic at t = T: n = 1, δ = 0, M = 16, ‖Q‖ = 1, C0 = 2 + 10π
    const double c0 = 2.0 + 10.0 * pi, a = 16.0 * 1e-3;
    const double expect = 0.1 * a * (4.0 * c0 + 3.0 * a) * 0.1 * std::exp(a * 0.1);
    const double got = verify_bound(sc, 1e-3, 0.1, 0).rhs_tight;
    ok = ok && std::abs(got - 2.14e-2) <= 1e-4 && std::abs(got - expect) <= 1e-12;
    d += "rhs(T) = " + fmt("%.6g", got) + " vs 2.14e-2 ± 1e-4";
    return {ok, d};
}

Outcome scaling_laws() {
    const auto base = default_scenario();
    SweepSettings s;
    s.t = 1.0;
    const auto ts = sweep(base, Axis::T, {0.025, 0.05, 0.1}, s);
    const auto gs = sweep(base, Axis::g, {2.5e-4, 5e-4, 1e-3}, s);
    const double controlled = verify_bound(base, 1e-3, 1.0, 0).lhs;
    const double uncontrolled = verify_bound(base.with_schedule(ControlSchedule::zero(2, 0.1)), 1e-3, 1.0, 0).lhs;
    const double factor = uncontrolled / controlled;
    const bool ok = ts.converged && gs.converged && std::abs(ts.fit_full.slope - 1.0) <= 0.25 &&
                    std::abs(gs.fit_full.slope - 1.0) <= 0.25 && factor >= 5.0;
    return {ok, "slope vs T " + fmt("%.4f", ts.fit_full.slope) + ", slope vs g " + fmt("%.4f", gs.fit_full.slope) +
                    ", uncontrolled/decoupled at t=1 " + fmt("%.3g", factor)};
}

Outcome key_estimate() {
    const auto sc = default_scenario();
    const auto c = compute_constants(sc.system, sc.modes, sc.schedule, 0);
    const auto dec = key_decoupling_estimate_check(sc, c, 0);
    const auto neg_sc = sc.with_schedule(ControlSchedule::zero(2, 0.1));
    const auto neg = key_decoupling_estimate_check(neg_sc, compute_constants(neg_sc.system, neg_sc.modes, neg_sc.schedule, 0), 0);
    const bool ok = dec.decoupled && dec.check.passed() && dec.ratio >= 3.0 && !neg.decoupled &&
                    std::abs(neg.ratio - 2.0) <= 0.5;
    return {ok, "decoupled norm " + fmt("%.3g", dec.norm_T) + " ≤ " + fmt("%.3g", dec.bound) + ", T→T/2 ratio " +
                    fmt("%.3f", dec.ratio) + "; uncontrolled ratio " + fmt("%.3f", neg.ratio) + " (linear in T)"};
}

Outcome determinism(const std::string& config) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "ddlab_acceptance";
    fs::remove_all(root);
    auto once = [&](const char* name) {
        std::ostringstream out, err;
        const int code = cmd_sweep({config, {"experiment.threads=2"}, (root / name).string()}, out, err);
        if (code != 0) throw std::runtime_error("cmd_sweep exit " + std::to_string(code) + ": " + err.str());
        std::ifstream in(root / name / "sweep_T.csv", std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = once("run1"), b = once("run2");
    return {!a.empty() && a == b, std::to_string(a.size()) + "-byte CSVs " + (a == b ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string config = argc > 1 ? argv[1] : std::string(DDLAB_SOURCE_DIR) + "/configs/default.yaml";
    criterion(1, "operator identities", 10, operator_identities);
    criterion(2, "field inequalities", 30, field_bounds);
    criterion(3, "relative and weighted-propagator bounds", 120, corollary_suite);
    criterion(4, "decoupling and action", 60, decoupling_and_action);
    criterion(5, "propagator algebra", 120, propagator_algebra);
    criterion(6, "decoherence bound", 300, decoherence_bound);
    criterion(7, "scaling laws", 900, scaling_laws);
    criterion(8, "key decoupling estimate", 180, key_estimate);
    criterion(9, "sweep determinism", 60, [&] { return determinism(config); });
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
