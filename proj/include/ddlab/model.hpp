// model.hpp: composite system ⊗ reservoir Hamiltonians and the explicit
// constants of the decoherence bound.
//
// Kronecker convention: composite index = level · dim(Fock) + fock_index,
// i.e. the system index is slow and the Fock index fast. Every module builds
// composite operators through Model::lift_system / Model::lift_fock.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ddlab/control.hpp"
#include "ddlab/error.hpp"
#include "ddlab/fock.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/report.hpp"

namespace ddlab {

// N-level system: energies E₀ < E₁ < … < E_{N−1}, E₀ ≥ 0, hermitian coupling Q.
struct SystemSpec {
    int levels = 2;
    std::vector<double> energies;
    Matrix coupling;

    void validate() const {
        require(levels >= 2, ErrorKind::invalid_input, "system.levels: must be ≥ 2");
        require(energies.size() == static_cast<std::size_t>(levels), ErrorKind::invalid_input,
                "system.energies: expected " + std::to_string(levels) + " values");
        require(energies.front() >= 0.0, ErrorKind::invalid_input,
                "system.energies: E0 must be nonnegative");
        for (std::size_t i = 1; i < energies.size(); ++i)
            require(energies[i] > energies[i - 1], ErrorKind::invalid_input,
                    "system.energies: must be strictly increasing (nondegenerate)");
        require(coupling.rows() == levels && coupling.cols() == levels, ErrorKind::invalid_input,
                "system.Q: expected a " + std::to_string(levels) + "x" + std::to_string(levels) +
                    " matrix");
        require(hermitian_defect(coupling) <= 1e-12 * std::max(1.0, max_abs(coupling)),
                ErrorKind::invalid_input, "system.Q: must be hermitian");
    }
};

// H_S = diag(E_{N−1}, …, E₁, E₀)
inline Matrix build_hs(const SystemSpec& spec) {
    spec.validate();
    Matrix h = Matrix::Zero(spec.levels, spec.levels);
    for (int i = 0; i < spec.levels; ++i) h(i, i) = spec.energies[spec.levels - 1 - i];
    return h;
}

// Composite-space operator factory for one (system, reservoir, truncation) triple.
class Model {
public:
    Model(SystemSpec spec, ModeSet modes, BasisPtr basis)
        : spec_(std::move(spec)), modes_(std::move(modes)), basis_(std::move(basis)) {
        spec_.validate();
        require(modes_.count() == basis_->mode_count(), ErrorKind::incompatible,
                "Model: reservoir mode count does not match the Fock basis");
        const auto nf = static_cast<Eigen::Index>(basis_->dim());
        hs_sys_ = build_hs(spec_);
        hs_ = lift_system(hs_sys_);
        hf_fock_ = number_weighted(modes_, basis_, 1.0).dense();
        hf_ = lift_fock(hf_fock_);
        phi_ = field_operator(modes_, basis_).dense();
        hi_ = kron(spec_.coupling, phi_);
        theta_fock_ = Eigen::Map<const RealVector>(theta_diagonal(modes_, *basis_).data(), nf);
    }

    const SystemSpec& spec() const { return spec_; }
    const ModeSet& modes() const { return modes_; }
    const BasisPtr& basis() const { return basis_; }
    int levels() const { return spec_.levels; }
    Eigen::Index dim() const { return spec_.levels * static_cast<Eigen::Index>(basis_->dim()); }

    const Matrix& hs_system() const { return hs_sys_; }
    const Matrix& hs() const { return hs_; }       // H_S ⊗ 1
    const Matrix& hf() const { return hf_; }       // 1 ⊗ H_f
    const Matrix& hi() const { return hi_; }       // Q ⊗ φ(f)
    const Matrix& field() const { return phi_; }   // φ(f) on the Fock factor

    Matrix lift_system(const Matrix& a) const {
        return kron(a, Matrix::Identity(basis_->dim(), basis_->dim()));
    }
    Matrix lift_fock(const Matrix& b) const {
        return kron(Matrix::Identity(spec_.levels, spec_.levels), b);
    }

    // Diagonal of 1 ⊗ Θ^m on the composite space.
    RealVector theta(double m) const {
        RealVector d(dim());
        const auto nf = theta_fock_.size();
        for (int s = 0; s < spec_.levels; ++s)
            d.segment(s * nf, nf) = theta_fock_.array().pow(m).matrix();
        return d;
    }

    // Θ^left · X · Θ^right
    Matrix weighted(const Matrix& x, double left, double right) const {
        return theta(left).asDiagonal() * x * theta(right).asDiagonal();
    }

    // H_S + H_f + H_C(t) + g H_I, with H_C evaluated at t mod T.
    Matrix total(const ControlSchedule& sched, double g, double t) const {
        return generator(sched.at(t), g);
    }

    // Composite generator for a fixed control matrix.
    Matrix generator(const Matrix& hc, double g) const {
        require(hc.rows() == spec_.levels, ErrorKind::incompatible,
                "control dimension does not match the system");
        Matrix h = hs_ + hf_ + lift_system(hc);
        if (g != 0.0) h += g * hi_;
        return h;
    }

private:
    SystemSpec spec_;
    ModeSet modes_;
    BasisPtr basis_;
    Matrix hs_sys_, hs_, hf_fock_, hf_, phi_, hi_;
    RealVector theta_fock_;
};

// H_I = Q ⊗ φ(f)
inline Matrix build_interaction(const SystemSpec& spec, const ModeSet& modes, const BasisPtr& basis) {
    return Model(spec, modes, basis).hi();
}

inline Matrix build_total(const SystemSpec& spec, const ModeSet& modes, const BasisPtr& basis,
                          const ControlSchedule& sched, double g, double t) {
    require(g >= 0.0, ErrorKind::invalid_input, "build_total: g must be nonnegative");
    return Model(spec, modes, basis).total(sched, g, t);
}

struct ModelConstants {
    int L = 0;
    double m_minus_half = 0.0;
    std::vector<double> m_table;   // m_table[n] = M_n, n = 0..L+2 (M_0 = 0)
    double M = 0.0;                // M₋₁/₂ + M_{L+2}
    double C0 = 1.0;               // 1 + ‖H_S‖ + sup‖H_C‖
    double opnorm_q = 0.0;
    double hs_norm = 0.0;
    double hc_sup = 0.0;

    double m(int n) const { return m_table.at(static_cast<std::size_t>(n)); }
};

inline ModelConstants compute_constants(const SystemSpec& spec, const ModeSet& modes,
                                        const ControlSchedule& sched, int L) {
    require(L >= 0, ErrorKind::invalid_input, "compute_constants: L must be ≥ 0");
    spec.validate();
    ModelConstants c;
    c.L = L;
    c.m_minus_half = m_minus_half(modes);
    for (int n = 0; n <= L + 2; ++n) c.m_table.push_back(m_n(modes, n));
    c.M = c.m_minus_half + c.m_table.back();
    c.hs_norm = op_norm(build_hs(spec));
    c.hc_sup = sched.sup_norm();
    c.C0 = 1.0 + c.hs_norm + c.hc_sup;
    c.opnorm_q = op_norm(spec.coupling);
    return c;
}

// Outcome of the theorem's hypothesis gate; bound_rhs refuses a failed verdict.
struct HypothesisVerdict {
    double g = 0.0;
    double period = 0.0;
    std::vector<CheckResult> items;

    bool passed() const { return all_passed(items); }

    std::vector<std::string> reasons() const {
        std::vector<std::string> out;
        for (const auto& r : items)
            if (!r.passed()) out.push_back(r.note);
        return out;
    }
};

inline HypothesisVerdict check_hypotheses(const ModelConstants& c, double g, double period,
                                          double decoupling_residual, double tol) {
    HypothesisVerdict v;
    v.g = g;
    v.period = period;
    {
        auto r = CheckResult::le("g_nonnegative", -g, 0.0);
        r.note = "g = " + format_double(g) + " < 0";
        v.items.push_back(r);
    }
    {
        auto r = CheckResult::le("period_positive", -period, 0.0);
        if (period == 0.0) r.status = Status::fail;
        r.note = "T = " + format_double(period) + " is not positive";
        v.items.push_back(r);
    }
    {
        const double x = g * c.opnorm_q * c.M * period;
        auto r = CheckResult::le("small_coupling", x, 1.0);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "g‖Q‖MT = %.6g > 1", x);
        r.note = buf;
        v.items.push_back(r);
    }
    {
        auto r = CheckResult::le("decoupling", decoupling_residual, tol);
        r.note = "decoupling residual " + format_double(decoupling_residual) + " > tolerance " +
                 format_double(tol);
        v.items.push_back(r);
    }
    return v;
}

// Relative bounds on the composite space, for ℓ = 0..L and j ∈ {1, 2}:
//   ‖Θ^ℓ H_I Θ^{−(ℓ+j)}‖ ≤ ‖Q‖(M₋₁/₂ + M_{ℓ+j})
//   ‖[Θ^{ℓ+j}, H(τ)] Θ^{−(ℓ+j)}‖ ≤ g‖Q‖M_{ℓ+j}
// plus τ-independence of that commutator and ‖H_f Θ⁻¹‖ < 1.
inline std::vector<CheckResult> relative_bounds_check(const Model& model, const ControlSchedule& sched,
                                                      double g, int L) {
    require(L >= 0, ErrorKind::invalid_input, "relative_bounds_check: L must be ≥ 0");
    const double qn = op_norm(model.spec().coupling);
    const double mh = m_minus_half(model.modes());
    std::vector<CheckResult> out;
    const Matrix h0 = model.total(sched, g, 0.0);
    const Matrix h1 = model.total(sched, g, sched.period() / 3.0);
    for (int l = 0; l <= L; ++l)
        for (int j = 1; j <= 2; ++j) {
            const int k = l + j;
            const std::string tag = "[l=" + std::to_string(l) + ",j=" + std::to_string(j) + "]";
            const double mk = m_n(model.modes(), k);
            out.push_back(CheckResult::le("weighted_interaction" + tag,
                                          op_norm(model.weighted(model.hi(), l, -k)), qn * (mh + mk)));
            const RealVector tk = model.theta(k), tmk = model.theta(-k);
            auto comm = [&](const Matrix& h) -> Matrix {
                return (tk.asDiagonal() * h - h * tk.asDiagonal()) * tmk.asDiagonal();
            };
            const Matrix c0 = comm(h0), c1 = comm(h1);
            out.push_back(CheckResult::le("theta_commutator" + tag, op_norm(c0), g * qn * mk));
            out.push_back(CheckResult::le("commutator_time_independence" + tag,
                                          max_abs(c0 - c1) / std::max(1.0, max_abs(c0)), 1e-12));
        }
    out.push_back(CheckResult::strict("hf_theta_inv", op_norm(model.weighted(model.hf(), 0, -1)), 1.0));
    // Θ commutes exactly with H_S ⊗ 1, 1 ⊗ H_f and H_C ⊗ 1.
    const RealVector t1 = model.theta(1);
    auto theta_comm = [&](const Matrix& a) {
        return max_abs(t1.asDiagonal() * a - a * t1.asDiagonal());
    };
    double worst = std::max(theta_comm(model.hs()), theta_comm(model.hf()));
    for (const auto& seg : sched.segments())
        worst = std::max(worst, theta_comm(model.lift_system(seg.hamiltonian)));
    out.push_back(CheckResult::le("theta_commutes_with_free_part", worst, 0.0));
    return out;
}

}  // namespace ddlab
