// commands.hpp: the subcommands of the ddlab tool.
//
// Exit codes: 0 success (unconverged results included), 1 hard failure,
// 2 unreadable or malformed config, 3 invalid values, 4 hypotheses unmet.

#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ddlab/config.hpp"
#include "ddlab/experiments.hpp"
#include "ddlab/io.hpp"
#include "ddlab/propagate.hpp"

namespace ddlab {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_parse = 2, exit_semantic = 3, exit_hypotheses = 4 };

struct CommandArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;  // replaces output.directory when nonempty
};

namespace detail {

// Loaded config plus the artefacts every command needs.
struct Session {
    RunConfig cfg;
    ControlSchedule schedule;
    Scenario scenario;
    ModelConstants constants;
    std::filesystem::path out;
};

inline Session open_session(const CommandArgs& a) {
    auto overrides = a.overrides;
    if (!a.output_dir.empty()) overrides.push_back("output.directory=" + a.output_dir);
    RunConfig cfg = load_config(a.config_path, overrides);
    ControlSchedule sched = build_schedule(cfg);
    Scenario sc = build_scenario(cfg, sched);
    (void)build_basis(sc.modes.count(), sc.cutoff + sc.cutoff_step, sc.dim_ceiling);
    ModelConstants c = compute_constants(cfg.system, sc.modes, sched, cfg.L);
    return {std::move(cfg), std::move(sched), std::move(sc), std::move(c), {}};
}

inline json header(const Session& s, const char* command) {
    json j;
    j["command"] = command;
    j["config_hash"] = s.cfg.hash;
    j["seed"] = s.cfg.seed;
    j["constants"] = to_json(s.constants, s.cfg.g);
    return j;
}

inline void prepare_output(Session& s) {
    s.out = output_directory(s.cfg);
    std::filesystem::create_directories(s.out);
    write_text(s.out / "effective_config.yaml",
               "# config_hash " + s.cfg.hash + "\n" + emit_yaml(s.cfg.effective));
}

inline HypothesisVerdict verdict_for(const Session& s) {
    const double res = decoupling_residual(s.schedule, s.cfg.system.coupling).residual_norm;
    return check_hypotheses(s.constants, s.cfg.g, s.schedule.period(), res,
                            default_decoupling_tolerance(s.scenario));
}

template <class F>
int guarded(std::ostream& err, F body) {
    try {
        return body();
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return exit_parse;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::invalid_input:
            case ErrorKind::incompatible:
            case ErrorKind::resource_limit:
            case ErrorKind::invalid_interval: return exit_semantic;
            case ErrorKind::precondition: return exit_hypotheses;
            default: return exit_failure;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

}  // namespace detail

inline int cmd_validate(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        const auto v = detail::verdict_for(s);
        out << "config_hash " << s.cfg.hash << "\n";
        out << "composite dimension " << s.scenario.coarse().dim() << " (cutoff " << s.scenario.cutoff << ")\n";
        for (const auto& r : v.items)
            out << "  " << r.name << ": " << format_double(r.measured) << " vs " << format_double(r.bound)
                << " " << to_string(r.status) << "\n";
        if (!v.passed()) {
            for (const auto& reason : v.reasons()) err << "hypothesis unmet: " << reason << "\n";
            return int(exit_hypotheses);
        }
        out << "ok\n";
        return int(exit_ok);
    });
}

inline int cmd_simulate(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        detail::prepare_output(s);
        const Dynamics dyn = s.scenario.coarse();
        json j = detail::header(s, "simulate");
        json runs = json::array();
        for (double t : s.cfg.times) {
            const auto pair = evolve(dyn, s.cfg.g, t);
            runs.push_back({{"t", t},
                            {"g", s.cfg.g},
                            {"step_size", pair.step_size},
                            {"weighted_deviation", weighted_deviation(pair, dyn.model(), s.cfg.L)},
                            {"unitarity_defect_g", unitarity_defect(pair.u_g)},
                            {"unitarity_defect_0", unitarity_defect(pair.u_0)},
                            {"factorized_deviation", pair.factorized_deviation}});
        }
        j["cutoff"] = s.scenario.cutoff;
        j["dimension"] = dyn.dim();
        j["runs"] = runs;
        write_json(s.out / "simulate.json", j);
        if (s.cfg.dump_operators) {
            const auto& basis = dyn.model().basis();
            const ModeSet modes = s.scenario.modes;
            write_text(s.out / "operators" / "annihilator.triplets", dump_triplets(annihilator(modes, basis)));
            write_text(s.out / "operators" / "creator.triplets", dump_triplets(creator(modes, basis)));
            write_text(s.out / "operators" / "field.triplets", dump_triplets(field_operator(modes, basis)));
            write_text(s.out / "operators" / "free_field.triplets", dump_triplets(number_weighted(modes, basis, 1.0)));
        }
        out << "wrote " << (s.out / "simulate.json").string() << "\n";
        return int(exit_ok);
    });
}

inline int cmd_design(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        detail::prepare_output(s);
        const auto dr = decoupling_residual(s.schedule, s.cfg.system.coupling);
        json j = detail::header(s, "design");
        j["designer"] = s.cfg.control.designer;
        j["schedule"] = to_json(s.schedule);
        j["decoupling"] = to_json(dr);
        j["action_lower_bound"] = 0.5;
        j["action_identity_relative_error"] =
            action_identity_check(s.schedule, s.cfg.system.coupling).relative_error;
        write_json(s.out / "schedule.json", j);
        out << "residual " << format_double(dr.residual_norm) << " action " << format_double(dr.action)
            << (dr.satisfied ? " (decoupling)" : " (not decoupling)") << "\n";
        return int(exit_ok);
    });
}

inline int cmd_verify(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        detail::prepare_output(s);
        json j = detail::header(s, "verify");
        const auto v = detail::verdict_for(s);
        j["hypotheses"] = to_json(v);
        json reports = json::array();
        std::vector<Status> statuses;
        for (double t : s.cfg.times) {
            const auto r = verify_bound(s.scenario, s.cfg.g, t, s.cfg.L);
            reports.push_back(to_json(r));
            statuses.push_back(r.status);
            out << "t=" << format_double(t) << " lhs " << format_double(r.lhs) << " rhs "
                << format_double(r.rhs_tight) << " " << reports.back()["status"].get<std::string>() << "\n";
        }
        j["reports"] = reports;
        j["comparison"] = to_json(comparison_experiment(s.scenario, s.cfg.g, s.cfg.times.back(), s.cfg.L));
        if (!s.cfg.study_cutoffs.empty() && !s.cfg.study_modes.empty())
            j["convergence"] = to_json(convergence_study(s.scenario, s.cfg.study_cutoffs, s.cfg.study_modes,
                                                         s.cfg.g, s.cfg.times.back(), s.cfg.L));
        if (!v.passed()) {
            j["status"] = "hypotheses failed";
            write_json(s.out / "bound_report.json", j);
            for (const auto& reason : v.reasons()) err << "hypothesis unmet: " << reason << "\n";
            return int(exit_hypotheses);
        }
        j["status"] = overall_status(statuses);
        write_json(s.out / "bound_report.json", j);
        return j["status"] == "fail" ? int(exit_failure) : int(exit_ok);
    });
}

inline int cmd_sweep(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        require(!s.cfg.grid.empty(), ErrorKind::invalid_input, "experiment.grid: missing or empty");
        detail::prepare_output(s);
        SweepSettings set;
        set.g = s.cfg.g;
        set.T = s.schedule.period();
        set.t = s.cfg.sweep_t;
        set.L = s.cfg.L;
        set.enforce_hypotheses = s.cfg.enforce_hypotheses;
        set.threads = s.cfg.threads;
        const auto res = sweep(s.scenario, s.cfg.axis, s.cfg.grid, set);
        const std::string stem = "sweep_" + to_string(s.cfg.axis);
        write_text(s.out / (stem + ".csv"), res.csv());
        json j = detail::header(s, "sweep");
        j["axis"] = to_string(s.cfg.axis);
        j["grid"] = s.cfg.grid;
        j["fixed"] = {{"g", set.g}, {"T", set.T}, {"t", set.t}, {"L", set.L}};
        j["fit_full"] = to_json(res.fit_full);
        j["fit_asymptotic"] = to_json(res.fit_asymptotic);
        j["status"] = res.converged ? "pass" : "unconverged";
        write_json(s.out / (stem + "_fit.json"), j);
        out << stem << ": slope " << format_double(res.fit_full.slope) << " (asymptotic "
            << format_double(res.fit_asymptotic.slope) << ")\n";
        return int(exit_ok);
    });
}

inline int cmd_propcheck(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto s = detail::open_session(a);
        detail::prepare_output(s);
        const auto& sc = s.scenario;
        const double T = s.schedule.period(), g = s.cfg.g;
        const int L = s.cfg.L;
        const Dynamics dyn = sc.coarse();
        const BasisPtr basis = dyn.model().basis();
        json j = detail::header(s, "propcheck");
        std::vector<CheckResult> all;
        auto section = [&](const char* name, std::vector<CheckResult> rs) {
            j[name] = to_json(rs);
            all.insert(all.end(), rs.begin(), rs.end());
        };

        std::vector<CheckResult> fock{check_ccr(basis, sc.modes)};
        for (int n = 1; n <= std::min(4, sc.cutoff); ++n)
            for (auto& r : check_commutator_identities(basis, sc.modes, n)) fock.push_back(r);
        for (int n = 1; n <= L + 2; ++n)
            for (auto& r : check_field_bounds(basis, sc.modes, n)) fock.push_back(r);
        section("fock", fock);
        section("relative_bounds", relative_bounds_check(dyn.model(), s.schedule, g, L));
        section("weighted_propagator",
                weighted_propagator_bound_check(sc, s.constants, g, L, {{T, 0.0}, {2.0 * T, 0.5 * T}}));

        std::vector<CheckResult> alg = algebra_check(dyn, g, 0.0, T / 3.0, 1.5 * T);
        for (auto& r : periodicity_check(dyn, g, s.cfg.periodicity_n)) alg.push_back(r);
        const double t_end = s.cfg.times.back();
        alg.push_back(CheckResult::le("telescoping", telescoping_defect(dyn, g, t_end), 1e-8));
        alg.push_back(CheckResult::le("factorized_uncoupled", evolve(dyn, g, t_end).factorized_deviation, 1e-9));
        {
            const Matrix u0 = dyn.propagator(0.0, t_end);
            const RealVector th = dyn.model().theta(1);
            alg.push_back(CheckResult::le("uncoupled_theta_commutator",
                                          op_norm(th.asDiagonal() * u0 - u0 * th.asDiagonal()), 1e-10));
        }
        section("propagator_algebra", alg);

        std::vector<CheckResult> w;
        for (const auto& p : w_diagnostics(sc, s.constants, g, {0.0, 0.25 * T, 0.5 * T, T}, L)) {
            w.push_back(p.bound);
            w.push_back(CheckResult::le("w_representation[s=" + format_double(p.s) + "]", p.representation_error, 1e-4));
        }
        section("w_diagnostics", w);

        const auto key = key_decoupling_estimate_check(sc, s.constants, L);
        j["key_estimate"] = {{"decoupled", key.decoupled},
                             {"norm_T", key.norm_T},
                             {"norm_half_T", key.norm_half},
                             {"ratio", key.ratio},
                             {"bound", key.bound},
                             {"check", to_json(key.check)}};
        if (key.decoupled) all.push_back(key.check);

        std::vector<Status> statuses;
        for (const auto& r : all) statuses.push_back(r.status);
        j["status"] = overall_status(statuses);
        write_json(s.out / "propcheck.json", j);
        int failed = 0;
        for (const auto& r : all)
            if (r.status == Status::fail) {
                ++failed;
                err << "FAIL " << r.name << ": " << format_double(r.measured) << " vs " << format_double(r.bound) << "\n";
            }
        out << all.size() << " checks, " << failed << " failed, status " << j["status"].get<std::string>() << "\n";
        return failed ? int(exit_failure) : int(exit_ok);
    });
}

}  // namespace ddlab
