// config.hpp: YAML run configuration with dotted-path overrides.
//
// Matrices are written as lists of rows whose entries are numbers or
// [re, im] pairs; 2×2 matrices may also be given by name (sigma_x, sigma_y,
// sigma_z, identity). Every semantic problem is reported with the dotted
// path of the offending field.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ddlab/control.hpp"
#include "ddlab/error.hpp"
#include "ddlab/experiments.hpp"
#include "ddlab/fock.hpp"
#include "ddlab/model.hpp"
#include "ddlab/propagate.hpp"

namespace ddlab {

inline constexpr const char* output_root_env = "DDLAB_OUTPUT_ROOT";

// Malformed YAML text, as opposed to well-formed text with bad values.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ControlRequest {
    std::string designer = "constant";  // constant | segments | bangbang | optimized
    double period = 0.1;
    Matrix generator;                   // constant: H_C = (π/T)·generator
    std::vector<Segment> segments;      // segments
    Matrix inverter;                    // bangbang
    double pulse_fraction = default_pulse_fraction;
    int pieces = 4;                     // optimized
    double penalty = 1.0;
    OptimizerOptions optimizer;
};

struct RunConfig {
    YAML::Node effective;
    std::string hash;
    unsigned seed = 1;

    SystemSpec system;
    std::vector<double> frequencies;
    std::vector<cplx> amplitudes;
    int cutoff = 8;
    int cutoff_step = 2;
    std::size_t dim_ceiling = default_dim_ceiling;

    ControlRequest control;

    double g = 1e-3;
    std::vector<double> times{1.0};
    int L = 0;
    int substeps = 1;

    Axis axis = Axis::T;
    std::vector<double> grid;
    double sweep_t = 1.0;
    unsigned threads = 0;
    bool enforce_hypotheses = true;
    std::vector<int> study_cutoffs;
    std::vector<int> study_modes;
    int periodicity_n = 16;

    std::string output_dir = "out";
    bool dump_operators = false;

    ModeSet modes() const { return {frequencies, amplitudes}; }
};

namespace detail {

inline std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
    fail(ErrorKind::invalid_input, path + ": " + what);
}

template <class T>
T scalar(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) bad(path, "expected a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        bad(path, "cannot read '" + n.Scalar() + "'");
    }
}

template <class T>
T opt(const YAML::Node& parent, const char* key, const std::string& path, T fallback) {
    const YAML::Node n = parent[key];
    if (!n) return fallback;
    return scalar<T>(n, join(path, key));
}

inline YAML::Node need(const YAML::Node& parent, const char* key, const std::string& path) {
    const YAML::Node n = parent[key];
    if (!n) bad(join(path, key), "missing");
    return n;
}

template <class T>
std::vector<T> list(const YAML::Node& n, const std::string& path) {
    std::vector<T> out;
    if (n.IsScalar()) {
        out.push_back(scalar<T>(n, path));
        return out;
    }
    if (!n.IsSequence()) bad(path, "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i)
        out.push_back(scalar<T>(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline cplx complex_value(const YAML::Node& n, const std::string& path) {
    if (n.IsSequence()) {
        if (n.size() != 2) bad(path, "complex entries are [re, im]");
        return {scalar<double>(n[0], path + "[0]"), scalar<double>(n[1], path + "[1]")};
    }
    return scalar<double>(n, path);
}

inline Matrix matrix_value(const YAML::Node& n, const std::string& path) {
    if (n.IsScalar()) {
        const std::string s = n.Scalar();
        if (s == "sigma_x") return pauli::x();
        if (s == "sigma_y") return pauli::y();
        if (s == "sigma_z") return pauli::z();
        if (s == "identity") return Matrix::Identity(2, 2);
        bad(path, "unknown matrix name '" + s + "'");
    }
    if (!n.IsSequence() || n.size() == 0) bad(path, "expected a list of rows");
    const auto rows = static_cast<Eigen::Index>(n.size());
    Matrix m(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        const YAML::Node row = n[static_cast<std::size_t>(r)];
        if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != rows)
            bad(rp, "expected " + std::to_string(rows) + " entries (square matrix)");
        for (Eigen::Index c = 0; c < rows; ++c)
            m(r, c) = complex_value(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
    return m;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline YAML::Node parse_text(const std::string& text, const std::string& what) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(what + ": " + e.what());
    }
}

}  // namespace detail

inline std::string emit_yaml(const YAML::Node& n) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << n;
    return std::string(out.c_str()) + "\n";
}

// "a.b.c=value": the value is parsed as YAML, so lists like [0.1, 0.2] work.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail(ErrorKind::invalid_input, "override '" + assignment + "': expected path=value");
    const std::string path = assignment.substr(0, eq);
    const YAML::Node value = detail::parse_text(assignment.substr(eq + 1), "override " + path);
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) {
        if (k.empty()) fail(ErrorKind::invalid_input, "override '" + assignment + "': empty path segment");
        keys.push_back(k);
    }
    // Node::operator= assigns content, so each level gets a fresh handle.
    std::vector<YAML::Node> chain{root};
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        YAML::Node cur = chain.back();
        if (!cur[keys[i]] || !cur[keys[i]].IsMap()) {
            if (cur[keys[i]] && !cur[keys[i]].IsNull())
                fail(ErrorKind::invalid_input, "override " + path + ": '" + keys[i] + "' is not a map");
            cur[keys[i]] = YAML::Node(YAML::NodeType::Map);
        }
        chain.push_back(cur[keys[i]]);
    }
    chain.back()[keys.back()] = value;
}

inline RunConfig parse_config(const YAML::Node& root) {
    using namespace detail;
    if (!root.IsMap()) bad("<root>", "expected a mapping");
    RunConfig c;
    c.effective = YAML::Clone(root);
    c.hash = [&] {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a(emit_yaml(c.effective))));
        return std::string(buf);
    }();
    c.seed = opt<unsigned>(root, "seed", "", 1u);

    const YAML::Node sys = need(root, "system", "");
    c.system.levels = scalar<int>(need(sys, "levels", "system"), "system.levels");
    c.system.energies = list<double>(need(sys, "energies", "system"), "system.energies");
    c.system.coupling = matrix_value(need(sys, "Q", "system"), "system.Q");
    c.system.validate();

    const YAML::Node res = need(root, "reservoir", "");
    c.frequencies = list<double>(need(res, "frequencies", "reservoir"), "reservoir.frequencies");
    const YAML::Node amps = need(res, "amplitudes", "reservoir");
    if (amps.IsScalar()) {
        c.amplitudes.push_back(complex_value(amps, "reservoir.amplitudes"));
    } else {
        if (!amps.IsSequence()) bad("reservoir.amplitudes", "expected a list");
        for (std::size_t i = 0; i < amps.size(); ++i)
            c.amplitudes.push_back(complex_value(amps[i], "reservoir.amplitudes[" + std::to_string(i) + "]"));
    }
    try {
        (void)c.modes();
    } catch (const Error& e) {
        bad("reservoir", e.what());
    }

    const YAML::Node tr = root["truncation"];
    c.cutoff = opt<int>(tr, "cutoff", "truncation", c.cutoff);
    c.cutoff_step = opt<int>(tr, "cutoff_step", "truncation", c.cutoff_step);
    c.dim_ceiling = opt<std::size_t>(tr, "dim_ceiling", "truncation", c.dim_ceiling);
    if (c.cutoff < 1) bad("truncation.cutoff", "must be ≥ 1");
    if (c.cutoff_step < 1) bad("truncation.cutoff_step", "must be ≥ 1");

    const YAML::Node ctl = need(root, "control", "");
    auto& cr = c.control;
    cr.period = scalar<double>(need(ctl, "period", "control"), "control.period");
    if (!(cr.period > 0.0)) bad("control.period", "must be positive");
    cr.designer = opt<std::string>(ctl, "designer", "control", cr.designer);
    const auto levels = static_cast<Eigen::Index>(c.system.levels);
    auto check_dim = [&](const Matrix& m, const std::string& path) {
        if (m.rows() != levels) bad(path, "expected a " + std::to_string(levels) + "x" + std::to_string(levels) + " matrix");
        if (!is_hermitian(m)) bad(path, "must be hermitian");
    };
    if (cr.designer == "constant") {
        cr.generator = matrix_value(need(ctl, "generator", "control"), "control.generator");
        check_dim(cr.generator, "control.generator");
    } else if (cr.designer == "segments") {
        const YAML::Node segs = need(ctl, "segments", "control");
        if (!segs.IsSequence() || segs.size() == 0) bad("control.segments", "expected a nonempty list");
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const std::string p = "control.segments[" + std::to_string(i) + "]";
            Segment s;
            s.duration = scalar<double>(need(segs[i], "duration", p), p + ".duration");
            s.hamiltonian = matrix_value(need(segs[i], "hamiltonian", p), p + ".hamiltonian");
            check_dim(s.hamiltonian, p + ".hamiltonian");
            cr.segments.push_back(std::move(s));
        }
    } else if (cr.designer == "bangbang") {
        cr.inverter = matrix_value(need(ctl, "inverter", "control"), "control.inverter");
        if (cr.inverter.rows() != levels) bad("control.inverter", "dimension mismatch");
        cr.pulse_fraction = opt<double>(ctl, "pulse_fraction", "control", cr.pulse_fraction);
    } else if (cr.designer == "optimized") {
        cr.pieces = opt<int>(ctl, "pieces", "control", cr.pieces);
        cr.penalty = opt<double>(ctl, "penalty", "control", cr.penalty);
        cr.optimizer.restarts = opt<int>(ctl, "restarts", "control", cr.optimizer.restarts);
        cr.optimizer.max_iterations = opt<int>(ctl, "max_iterations", "control", cr.optimizer.max_iterations);
        if (cr.pieces < 2) bad("control.pieces", "must be ≥ 2");
        if (cr.penalty < 0.0) bad("control.penalty", "must be nonnegative");
    } else {
        bad("control.designer", "unknown designer '" + cr.designer + "'");
    }

    const YAML::Node dyn = root["dynamics"];
    c.g = opt<double>(dyn, "g", "dynamics", c.g);
    if (dyn && dyn["t"]) c.times = list<double>(dyn["t"], "dynamics.t");
    c.L = opt<int>(dyn, "L", "dynamics", c.L);
    c.substeps = opt<int>(dyn, "substeps", "dynamics", c.substeps);
    if (c.g < 0.0) bad("dynamics.g", "must be nonnegative");
    if (c.L < 0) bad("dynamics.L", "must be ≥ 0");
    if (c.substeps < 1) bad("dynamics.substeps", "must be ≥ 1");
    if (c.times.empty()) bad("dynamics.t", "must not be empty");
    for (double t : c.times)
        if (t < 0.0) bad("dynamics.t", "times must be nonnegative");

    const YAML::Node ex = root["experiment"];
    try {
        c.axis = parse_axis(opt<std::string>(ex, "axis", "experiment", "T"));
    } catch (const Error& e) {
        bad("experiment.axis", e.what());
    }
    if (ex && ex["grid"]) c.grid = list<double>(ex["grid"], "experiment.grid");
    c.sweep_t = opt<double>(ex, "t", "experiment", c.times.back());
    c.threads = opt<unsigned>(ex, "threads", "experiment", 0u);
    c.enforce_hypotheses = opt<bool>(ex, "enforce_hypotheses", "experiment", true);
    if (ex && ex["cutoffs"]) c.study_cutoffs = list<int>(ex["cutoffs"], "experiment.cutoffs");
    if (ex && ex["mode_counts"]) c.study_modes = list<int>(ex["mode_counts"], "experiment.mode_counts");
    c.periodicity_n = opt<int>(ex, "periodicity_n", "experiment", c.periodicity_n);
    for (double v : c.grid)
        if (!(v > 0.0) && c.axis != Axis::g) bad("experiment.grid", "values must be positive");

    const YAML::Node out = root["output"];
    c.output_dir = opt<std::string>(out, "directory", "output", c.output_dir);
    c.dump_operators = opt<bool>(out, "operator_dumps", "output", false);
    return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot read file");
    std::stringstream buf;
    buf << in.rdbuf();
    YAML::Node root = detail::parse_text(buf.str(), path);
    if (!root || root.IsNull()) throw ParseError(path + ": empty document");
    for (const auto& o : overrides) apply_override(root, o);
    return parse_config(root);
}

inline ControlSchedule build_schedule(const RunConfig& c) {
    const auto& cr = c.control;
    if (cr.designer == "constant") return ControlSchedule::constant((std::numbers::pi / cr.period) * cr.generator, cr.period);
    if (cr.designer == "segments") return {cr.period, cr.segments};
    if (cr.designer == "bangbang") return design_bangbang(c.system.coupling, cr.period, cr.inverter, cr.pulse_fraction);
    return design_optimized(c.system.coupling, cr.period, cr.pieces, cr.penalty, c.seed, cr.optimizer).schedule;
}

inline Scenario build_scenario(const RunConfig& c, ControlSchedule sched) {
    Scenario sc{c.system, c.modes(), std::move(sched), c.cutoff};
    sc.cutoff_step = c.cutoff_step;
    sc.substeps = c.substeps;
    sc.dim_ceiling = c.dim_ceiling;
    return sc;
}

// Output directory, re-rooted under $DDLAB_OUTPUT_ROOT when that is set and
// the configured directory is relative.
inline std::filesystem::path output_directory(const RunConfig& c) {
    std::filesystem::path p(c.output_dir);
    if (const char* root = std::getenv(output_root_env); root && *root && p.is_relative())
        p = std::filesystem::path(root) / p;
    return p;
}

}  // namespace ddlab
