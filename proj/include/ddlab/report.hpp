// report.hpp: check results shared by the diagnostic suites

#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace ddlab {

enum class Status { pass, fail, unconverged, skipped };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::unconverged: return "unconverged";
        case Status::skipped: return "skipped";
    }
    return "?";
}

struct CheckResult {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    Status status = Status::fail;
    bool cutoff_stable = true;
    std::string note;

    bool passed() const { return status == Status::pass; }

    static CheckResult le(std::string name, double measured, double bound) {
        return {std::move(name), measured, bound,
                measured <= bound ? Status::pass : Status::fail, true, {}};
    }

    // measured < bound, or both exactly zero
    static CheckResult strict(std::string name, double measured, double bound) {
        const bool ok = measured < bound || (measured == 0.0 && bound == 0.0);
        return {std::move(name), measured, bound, ok ? Status::pass : Status::fail, true, {}};
    }
};

inline bool all_passed(const std::vector<CheckResult>& rs) {
    for (const auto& r : rs)
        if (!r.passed()) return false;
    return true;
}

// Relative agreement used by the two-cutoff protocol.
inline bool cutoff_stable(double a, double b, double rel = 0.01) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 || std::abs(a - b) <= rel * scale;
}

// Round-trip formatting: 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace ddlab
