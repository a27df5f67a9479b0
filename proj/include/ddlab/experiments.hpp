// experiments.hpp: the decoherence-bound verifier, parameter sweeps with
// log-log fits, and the control comparison and truncation studies.

#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "ddlab/control.hpp"
#include "ddlab/error.hpp"
#include "ddlab/model.hpp"
#include "ddlab/propagate.hpp"
#include "ddlab/report.hpp"

namespace ddlab {

// N=2, H_S = diag(1,0), Q = σ_z, one mode ω=1, f=1, control (π/T)σ_x.
inline Scenario default_scenario(double period = 0.1, int cutoff = 8) {
    SystemSpec sys{2, {0.0, 1.0}, pauli::z()};
    return {sys, ModeSet::single(1.0, 1.0),
            ControlSchedule::constant((std::numbers::pi / period) * pauli::x(), period), cutoff};
}

// C̃_g = M‖Q‖g · max{1, 4C0 + 3M‖Q‖g}
inline double c_tilde(const ModelConstants& c, double g) {
    const double a = c.M * c.opnorm_q * g;
    return a * std::max(1.0, 4.0 * c.C0 + 3.0 * a);
}

struct BoundRhs {
    double tight = 0.0;
    double simple = 0.0;
};

// Both forms of the right-hand side, without the hypothesis gate.
inline BoundRhs rhs_formula(const ModelConstants& c, double g, double period, double t) {
    const auto sp = split_time(t, period);
    const double a = c.M * c.opnorm_q * g;
    const double growth = std::exp(c.opnorm_q * c.M * g * t);
    BoundRhs r;
    r.tight = period * a * (sp.delta + (4.0 * c.C0 + 3.0 * a) * static_cast<double>(sp.n) * period) * growth;
    r.simple = period * c_tilde(c, g) * t * growth;
    return r;
}

inline BoundRhs bound_rhs(const ModelConstants& c, const HypothesisVerdict& verdict, double t) {
    require(verdict.passed(), ErrorKind::precondition,
            "bound_rhs: hypotheses not verified; run check_hypotheses first");
    const BoundRhs r = rhs_formula(c, verdict.g, verdict.period, t);
    require(r.tight <= r.simple * (1 + 1e-14), ErrorKind::precondition,
            "bound_rhs: tight form exceeds simple form");
    return r;
}

struct BoundReport {
    double t = 0.0, T = 0.0, g = 0.0;
    int L = 0;
    long long n = 0;
    double delta = 0.0;
    double lhs = 0.0;          // fine cutoff
    double lhs_coarse = 0.0;
    int cutoff_coarse = 0, cutoff_fine = 0;
    double rhs_tight = 0.0, rhs_simple = 0.0;
    double M = 0.0, C0 = 0.0, opnorm_q = 0.0, c_tilde = 0.0;
    double decoupling_residual = 0.0;
    double margin = 0.0;
    bool cutoff_stable = false;
    bool hypotheses_passed = false;
    std::vector<std::string> hypothesis_failures;
    Status status = Status::skipped;

    // rhs_tight from the stored snapshot alone.
    double recompute_rhs() const {
        const double a = M * opnorm_q * g;
        return T * a * (delta + (4.0 * C0 + 3.0 * a) * static_cast<double>(n) * T) *
               std::exp(opnorm_q * M * g * t);
    }
};

inline double default_decoupling_tolerance(const Scenario& sc) {
    return default_decoupling_tol * sc.schedule.period() * op_norm(sc.system.coupling);
}

// Θ-weighted deviation at both cutoffs.
inline CutoffPair measure_deviation(const Scenario& sc, double g, double t, int L) {
    return at_two_cutoffs(sc, [&](const Dynamics& d) { return weighted_deviation(evolve(d, g, t), d.model(), L); });
}

inline BoundReport verify_bound(const Scenario& sc, double g, double t, int L) {
    BoundReport r;
    r.t = t;
    r.T = sc.schedule.period();
    r.g = g;
    r.L = L;
    const auto sp = split_time(t, r.T);
    r.n = sp.n;
    r.delta = sp.delta;
    const ModelConstants c = compute_constants(sc.system, sc.modes, sc.schedule, L);
    r.M = c.M;
    r.C0 = c.C0;
    r.opnorm_q = c.opnorm_q;
    r.c_tilde = c_tilde(c, g);
    r.decoupling_residual = decoupling_residual(sc.schedule, sc.system.coupling).residual_norm;
    const auto verdict = check_hypotheses(c, g, r.T, r.decoupling_residual, default_decoupling_tolerance(sc));
    r.hypotheses_passed = verdict.passed();
    r.hypothesis_failures = verdict.reasons();

    const auto m = measure_deviation(sc, g, t, L);
    r.lhs = m.value();
    r.lhs_coarse = m.coarse;
    r.cutoff_coarse = sc.cutoff;
    r.cutoff_fine = sc.cutoff + sc.cutoff_step;
    r.cutoff_stable = m.stable;
    if (!r.hypotheses_passed) {
        r.status = Status::skipped;
        return r;
    }
    const BoundRhs rhs = bound_rhs(c, verdict, t);
    r.rhs_tight = rhs.tight;
    r.rhs_simple = rhs.simple;
    r.margin = rhs.tight - r.lhs;
    if (!m.stable)
        r.status = Status::unconverged;
    else
        r.status = r.lhs <= rhs.tight ? Status::pass : Status::fail;
    return r;
}

enum class Axis { T, g, t };

inline std::string to_string(Axis a) {
    switch (a) {
        case Axis::T: return "T";
        case Axis::g: return "g";
        case Axis::t: return "t";
    }
    return "?";
}

inline Axis parse_axis(const std::string& s) {
    if (s == "T") return Axis::T;
    if (s == "g") return Axis::g;
    if (s == "t") return Axis::t;
    fail(ErrorKind::invalid_input, "unknown sweep axis '" + s + "' (expected T, g or t)");
}

struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int points = 0;
};

// Least squares of log y on log x; nonpositive samples are skipped.
inline LogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    LogFit f;
    f.points = static_cast<int>(lx.size());
    if (f.points < 2) return f;
    const double k = f.points;
    double mx = 0, my = 0;
    for (int i = 0; i < f.points; ++i) {
        mx += lx[i] / k;
        my += ly[i] / k;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < f.points; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

struct SweepSettings {
    double g = 1e-3;
    double T = 0.1;
    double t = 1.0;
    int L = 0;
    bool enforce_hypotheses = true;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepPoint {
    double value = 0.0;
    BoundReport report;
};

struct SweepResult {
    Axis axis = Axis::T;
    std::vector<SweepPoint> points;
    LogFit fit_full;
    LogFit fit_asymptotic;
    bool converged = true;

    std::string csv() const {
        std::string out = "axis,value,lhs,rhs_tight,rhs_simple,n,delta,cutoff_stable\n";
        for (const auto& p : points) {
            const auto& r = p.report;
            out += to_string(axis) + "," + format_double(p.value) + "," + format_double(r.lhs) + "," +
                   format_double(r.rhs_tight) + "," + format_double(r.rhs_simple) + "," +
                   std::to_string(r.n) + "," + format_double(r.delta) + "," +
                   (r.cutoff_stable ? "true" : "false") + "\n";
        }
        return out;
    }
};

// Runs fn(i) for i in [0, count) on up to `threads` workers; results land by index.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, unsigned threads, F fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<R> out(count);
    std::size_t next = 0;
    while (next < count) {
        std::vector<std::future<R>> batch;
        for (unsigned w = 0; w < threads && next < count; ++w, ++next)
            batch.push_back(std::async(std::launch::async, fn, next));
        const std::size_t base = next - batch.size();
        for (std::size_t k = 0; k < batch.size(); ++k) out[base + k] = batch[k].get();
    }
    return out;
}

inline Scenario sweep_point_scenario(const Scenario& base, Axis axis, double value, const SweepSettings& s) {
    const double period = axis == Axis::T ? value : s.T;
    if (std::abs(period - base.schedule.period()) <= 1e-15 * period) return base;
    return base.with_schedule(base.schedule.rescaled(period));
}

inline SweepResult sweep(const Scenario& base, Axis axis, std::vector<double> grid, const SweepSettings& s) {
    require(!grid.empty(), ErrorKind::invalid_input, "sweep: empty grid");
    std::sort(grid.begin(), grid.end());
    require(std::adjacent_find(grid.begin(), grid.end()) == grid.end(), ErrorKind::invalid_input,
            "sweep: grid values must be distinct");
    SweepResult res;
    res.axis = axis;
    auto reports = parallel_map<BoundReport>(grid.size(), s.threads, [&](std::size_t i) {
        const double v = grid[i];
        const Scenario sc = sweep_point_scenario(base, axis, v, s);
        return verify_bound(sc, axis == Axis::g ? v : s.g, axis == Axis::t ? v : s.t, s.L);
    });
    std::vector<double> lhs;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (s.enforce_hypotheses && !reports[i].hypotheses_passed)
            fail(ErrorKind::precondition, "sweep: hypotheses fail at " + to_string(axis) + " = " +
                                              format_double(grid[i]) + ": " +
                                              (reports[i].hypothesis_failures.empty()
                                                   ? std::string("?")
                                                   : reports[i].hypothesis_failures.front()));
        res.converged = res.converged && reports[i].cutoff_stable;
        lhs.push_back(reports[i].lhs);
        res.points.push_back({grid[i], std::move(reports[i])});
    }
    res.fit_full = loglog_fit(grid, lhs);
    if (axis == Axis::t) {
        res.fit_asymptotic = res.fit_full;
    } else {
        const std::size_t half = std::max<std::size_t>(2, (grid.size() + 1) / 2);
        const std::size_t k = std::min(half, grid.size());
        res.fit_asymptotic = loglog_fit({grid.begin(), grid.begin() + k}, {lhs.begin(), lhs.begin() + k});
    }
    return res;
}

struct ComparisonRow {
    std::string label;
    double lhs = 0.0;
    bool cutoff_stable = false;
    double decoupling_residual = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;   // decoupled, uncontrolled, half amplitude
    double rhs_decoupled = 0.0;
    double reference = 0.0;            // g t ‖Θ^L H_I Θ^{−L−2}‖
    bool margin_holds = false;         // rhs_decoupled < reference
    bool ordering_holds = false;       // decoupled row strictly smallest
};

inline ComparisonTable comparison_experiment(const Scenario& sc, double g, double t, int L) {
    ComparisonTable tab;
    const std::vector<std::pair<std::string, ControlSchedule>> variants = {
        {"decoupled", sc.schedule},
        {"uncontrolled", ControlSchedule::zero(sc.system.levels, sc.schedule.period())},
        {"half_amplitude", sc.schedule.scaled(0.5)},
    };
    for (const auto& [label, sched] : variants) {
        const Scenario v = sc.with_schedule(sched);
        const auto m = measure_deviation(v, g, t, L);
        tab.rows.push_back({label, m.value(), m.stable, decoupling_residual(sched, sc.system.coupling).residual_norm});
    }
    const ModelConstants c = compute_constants(sc.system, sc.modes, sc.schedule, L);
    tab.rhs_decoupled = rhs_formula(c, g, sc.schedule.period(), t).tight;
    const Dynamics fine = sc.fine();
    tab.reference = g * t * op_norm(fine.model().weighted(fine.model().hi(), L, -L - 2));
    tab.margin_holds = tab.rhs_decoupled < tab.reference;
    tab.ordering_holds = tab.rows[0].lhs < tab.rows[1].lhs && tab.rows[0].lhs < tab.rows[2].lhs;
    return tab;
}

struct ConvergenceEntry {
    int cutoff = 0;
    int modes = 0;
    std::size_t dim = 0;
    double lhs = 0.0;
    double cauchy = -1.0;  // |lhs − lhs at the previous cutoff|, −1 for the first
};

struct ConvergenceTable {
    std::vector<ConvergenceEntry> entries;
    int converged_cutoff = -1;
    int converged_modes = -1;
};

// lhs per (cutoff, J), each reservoir mode split into J equal copies.
inline ConvergenceTable convergence_study(const Scenario& sc, const std::vector<int>& cutoffs,
                                          const std::vector<int>& mode_counts, double g, double t, int L,
                                          double rel = 0.01) {
    require(!cutoffs.empty() && !mode_counts.empty(), ErrorKind::invalid_input,
            "convergence_study: empty lists");
    require(std::is_sorted(cutoffs.begin(), cutoffs.end()) &&
                std::is_sorted(mode_counts.begin(), mode_counts.end()),
            ErrorKind::invalid_input, "convergence_study: lists must be ascending");
    ConvergenceTable tab;
    for (int J : mode_counts) {
        require(J >= 1, ErrorKind::invalid_input, "convergence_study: mode counts must be ≥ 1");
        const Scenario sj = sc.with_modes(sc.modes.split(static_cast<std::size_t>(J)));
        double prev = 0.0;
        for (std::size_t k = 0; k < cutoffs.size(); ++k) {
            const Dynamics d = sj.dynamics(cutoffs[k]);
            ConvergenceEntry e;
            e.cutoff = cutoffs[k];
            e.modes = static_cast<int>(sj.modes.count());
            e.dim = static_cast<std::size_t>(d.dim());
            e.lhs = weighted_deviation(evolve(d, g, t), d.model(), L);
            if (k > 0) {
                e.cauchy = std::abs(e.lhs - prev);
                if (tab.converged_cutoff < 0 && e.cauchy <= rel * std::max(std::abs(e.lhs), 1e-300)) {
                    tab.converged_cutoff = cutoffs[k - 1];
                    tab.converged_modes = e.modes;
                }
            }
            prev = e.lhs;
            tab.entries.push_back(e);
        }
    }
    return tab;
}

}  // namespace ddlab
