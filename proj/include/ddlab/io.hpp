// io.hpp: JSON views of reports and schedules, deterministic file output.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddlab/control.hpp"
#include "ddlab/error.hpp"
#include "ddlab/experiments.hpp"
#include "ddlab/model.hpp"
#include "ddlab/propagate.hpp"
#include "ddlab/report.hpp"

namespace ddlab {

using json = nlohmann::ordered_json;

inline json to_json(const CheckResult& r) {
    json j;
    j["name"] = r.name;
    j["measured"] = r.measured;
    j["bound"] = r.bound;
    j["status"] = to_string(r.status);
    j["cutoff_stable"] = r.cutoff_stable;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline json to_json(const std::vector<CheckResult>& rs) {
    json a = json::array();
    for (const auto& r : rs) a.push_back(to_json(r));
    return a;
}

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

inline json to_json(const ModelConstants& c, double g) {
    json j;
    j["L"] = c.L;
    j["M_minus_half"] = c.m_minus_half;
    j["M_n"] = c.m_table;
    j["M"] = c.M;
    j["C0"] = c.C0;
    j["opnorm_Q"] = c.opnorm_q;
    j["opnorm_HS"] = c.hs_norm;
    j["sup_HC"] = c.hc_sup;
    j["g"] = g;
    j["C_tilde_g"] = c_tilde(c, g);
    return j;
}

inline json to_json(const ControlSchedule& s) {
    json j;
    j["period"] = s.period();
    j["levels"] = s.levels();
    json segs = json::array();
    for (const auto& seg : s.segments()) segs.push_back({{"duration", seg.duration}, {"hamiltonian", to_json(seg.hamiltonian)}});
    j["segments"] = segs;
    return j;
}

inline json to_json(const DecouplingReport& d) {
    return {{"residual_norm", d.residual_norm},
            {"action", d.action},
            {"tolerance", d.tolerance},
            {"satisfied", d.satisfied}};
}

inline json to_json(const HypothesisVerdict& v) {
    json j;
    j["passed"] = v.passed();
    j["items"] = to_json(v.items);
    j["failures"] = v.reasons();
    return j;
}

inline json to_json(const BoundReport& r) {
    json j;
    j["t"] = r.t;
    j["T"] = r.T;
    j["g"] = r.g;
    j["L"] = r.L;
    j["n"] = r.n;
    j["delta"] = r.delta;
    j["lhs"] = r.lhs;
    j["lhs_coarse"] = r.lhs_coarse;
    j["cutoffs"] = {r.cutoff_coarse, r.cutoff_fine};
    j["rhs_tight"] = r.rhs_tight;
    j["rhs_simple"] = r.rhs_simple;
    j["margin"] = r.margin;
    j["constants"] = {{"M", r.M}, {"C0", r.C0}, {"opnorm_Q", r.opnorm_q}, {"C_tilde_g", r.c_tilde}};
    j["decoupling_residual"] = r.decoupling_residual;
    j["cutoff_stable"] = r.cutoff_stable;
    j["hypotheses_passed"] = r.hypotheses_passed;
    if (!r.hypotheses_passed) j["hypothesis_failures"] = r.hypothesis_failures;
    j["status"] = r.hypotheses_passed ? to_string(r.status) : "hypotheses failed";
    return j;
}

inline json to_json(const LogFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}};
}

inline json to_json(const ComparisonTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"label", r.label},
                        {"lhs", r.lhs},
                        {"cutoff_stable", r.cutoff_stable},
                        {"decoupling_residual", r.decoupling_residual}});
    return {{"rows", rows},
            {"rhs_decoupled", t.rhs_decoupled},
            {"reference", t.reference},
            {"margin_holds", t.margin_holds},
            {"ordering_holds", t.ordering_holds}};
}

inline json to_json(const ConvergenceTable& t) {
    json rows = json::array();
    for (const auto& e : t.entries) {
        json r = {{"cutoff", e.cutoff}, {"modes", e.modes}, {"dim", e.dim}, {"lhs", e.lhs}};
        r["cauchy"] = e.cauchy < 0.0 ? json(nullptr) : json(e.cauchy);
        rows.push_back(r);
    }
    return {{"entries", rows}, {"converged_cutoff", t.converged_cutoff}, {"converged_modes", t.converged_modes}};
}

// Collapses a list of statuses: any fail wins, then unconverged, else pass.
inline std::string overall_status(const std::vector<Status>& ss) {
    bool unconverged = false;
    for (Status s : ss) {
        if (s == Status::fail) return "fail";
        if (s == Status::unconverged) unconverged = true;
    }
    return unconverged ? "unconverged" : "pass";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::resource_limit, "cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

}  // namespace ddlab
