// control.hpp: T-periodic piecewise-constant control schedules and pulse
// designers. The toggled coupling is Q̃(τ) = U_C(τ,0) Q U_C(τ,0)*.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <gsl/gsl_multimin.h>

#include "ddlab/error.hpp"
#include "ddlab/linalg.hpp"

namespace ddlab {

struct Segment {
    double duration = 0.0;
    Matrix hamiltonian;
};

// A run of constant generator inside [s, t]: segment index and length.
struct Piece {
    std::size_t segment = 0;
    double start = 0.0;     // absolute start time
    double duration = 0.0;
};

class ControlSchedule {
public:
    ControlSchedule(double period, std::vector<Segment> segments)
        : period_(period), segments_(std::move(segments)) {
        require(std::isfinite(period_) && period_ > 0.0, ErrorKind::invalid_input,
                "ControlSchedule: period must be positive");
        require(!segments_.empty(), ErrorKind::invalid_input, "ControlSchedule: no segments");
        const auto n = segments_.front().hamiltonian.rows();
        require(n >= 1, ErrorKind::invalid_input, "ControlSchedule: empty segment matrix");
        double sum = 0.0;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& s = segments_[i];
            const std::string where = "ControlSchedule: segment " + std::to_string(i);
            require(s.duration > 0.0 && std::isfinite(s.duration), ErrorKind::invalid_input,
                    where + " duration must be positive");
            require(s.hamiltonian.rows() == n && s.hamiltonian.cols() == n,
                    ErrorKind::invalid_input, where + " has inconsistent dimension");
            require(is_hermitian(s.hamiltonian), ErrorKind::invalid_input,
                    where + " is not hermitian");
            sum += s.duration;
        }
        require(std::abs(sum - period_) <= 1e-12 * period_, ErrorKind::invalid_input,
                "ControlSchedule: durations sum to " + std::to_string(sum) + ", period is " +
                    std::to_string(period_));
        starts_.reserve(segments_.size() + 1);
        double acc = 0.0;
        for (const auto& s : segments_) {
            starts_.push_back(acc);
            acc += s.duration;
        }
        starts_.push_back(period_);
    }

    static ControlSchedule constant(const Matrix& h, double period) {
        return {period, {{period, h}}};
    }

    static ControlSchedule zero(Eigen::Index levels, double period) {
        return constant(Matrix::Zero(levels, levels), period);
    }

    double period() const { return period_; }
    Eigen::Index levels() const { return segments_.front().hamiltonian.rows(); }
    const std::vector<Segment>& segments() const { return segments_; }
    double segment_start(std::size_t i) const { return starts_[i]; }

    // sup_t ‖H_C(t)‖
    double sup_norm() const {
        double m = 0.0;
        for (const auto& s : segments_) m = std::max(m, op_norm(s.hamiltonian));
        return m;
    }

    // ∫₀ᵀ ‖H_C(t)‖ dt, exact for piecewise-constant schedules.
    double action() const {
        double a = 0.0;
        for (const auto& s : segments_) a += s.duration * op_norm(s.hamiltonian);
        return a;
    }

    std::size_t segment_index(double t) const {
        double local = t - std::floor(t / period_) * period_;
        if (local >= period_) local -= period_;
        auto it = std::upper_bound(starts_.begin(), starts_.end() - 1, local);
        return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
    }

    // H_C(t), evaluated at t mod T.
    const Matrix& at(double t) const { return segments_[segment_index(t)].hamiltonian; }

    // Same control shape on period T': durations scale by T'/T, amplitudes by T/T'.
    ControlSchedule rescaled(double new_period) const {
        require(new_period > 0.0, ErrorKind::invalid_input, "rescaled: period must be positive");
        const double r = new_period / period_;
        std::vector<Segment> segs;
        for (const auto& s : segments_) segs.push_back({s.duration * r, s.hamiltonian / r});
        fix_sum(segs, new_period);
        return {new_period, std::move(segs)};
    }

    // Same timing, amplitudes multiplied by c.
    ControlSchedule scaled(double c) const {
        std::vector<Segment> segs;
        for (const auto& s : segments_) segs.push_back({s.duration, c * s.hamiltonian});
        return {period_, std::move(segs)};
    }

    // Constant-generator runs covering [s, t] in time order.
    std::vector<Piece> pieces(double s, double t) const {
        require(s <= t, ErrorKind::invalid_interval, "pieces: s > t");
        std::vector<Piece> out;
        const double eps = 1e-12 * period_;
        double p = std::floor(s / period_);
        double local = s - p * period_;
        if (local >= period_ - eps) {
            local = 0.0;
            p += 1.0;
        }
        std::size_t i = segment_index(local);
        if (starts_[i + 1] - local <= eps) ++i;
        if (i == segments_.size()) {
            i = 0;
            p += 1.0;
        }
        double cur = s;
        while (t - cur > eps) {
            const double seg_end = p * period_ + starts_[i + 1];
            const double end = std::min(seg_end, t);
            if (end - cur > 0.0) out.push_back({i, cur, end - cur});
            cur = end;
            if (++i == segments_.size()) {
                i = 0;
                p += 1.0;
            }
        }
        return out;
    }

private:
    static void fix_sum(std::vector<Segment>& segs, double target) {
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < segs.size(); ++i) sum += segs[i].duration;
        segs.back().duration = target - sum;
    }

    double period_;
    std::vector<Segment> segments_;
    std::vector<double> starts_;
};

// U_C(t, s): ordered product of segment exponentials exp(−iΔH).
inline Matrix control_propagator(const ControlSchedule& sched, double t, double s) {
    require(s <= t, ErrorKind::invalid_interval, "control_propagator: s > t");
    Matrix u = Matrix::Identity(sched.levels(), sched.levels());
    for (const auto& pc : sched.pieces(s, t))
        u = expm_step(sched.segments()[pc.segment].hamiltonian, pc.duration) * u;
    return u;
}

// Q̃(τ) = U_C(τ,0) Q U_C(τ,0)*
inline Matrix toggled_q(const ControlSchedule& sched, const Matrix& q, double tau) {
    const Matrix u = control_propagator(sched, tau, 0.0);
    Matrix r = u * q * u.adjoint();
    return 0.5 * (r + r.adjoint());
}

struct DecouplingReport {
    double residual_norm = 0.0;  // ‖∫₀ᵀ Q̃ dτ‖
    double action = 0.0;         // ∫₀ᵀ ‖H_C‖ dt
    double tolerance = 0.0;      // absolute: tol · T · ‖Q‖
    bool satisfied = false;
};

inline constexpr int default_quadrature_points = 32;
inline constexpr double default_decoupling_tol = 1e-8;

// ∫₀ᵀ Q̃(τ) dτ by composite Gauss–Legendre, `points` nodes per segment.
inline Matrix toggled_integral(const ControlSchedule& sched, const Matrix& q, int points) {
    require(points >= 2, ErrorKind::invalid_input, "decoupling quadrature needs ≥ 2 points");
    const GaussRule rule = gauss_legendre(points);
    Matrix acc = Matrix::Zero(q.rows(), q.cols());
    Matrix u0 = Matrix::Identity(q.rows(), q.cols());
    std::vector<double> x, w;
    for (const auto& seg : sched.segments()) {
        const Matrix q0 = u0 * q * u0.adjoint();
        map_rule(rule, 0.0, seg.duration, x, w);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const Matrix e = expm_step(seg.hamiltonian, x[k]);
            acc += w[k] * (e * q0 * e.adjoint());
        }
        u0 = expm_step(seg.hamiltonian, seg.duration) * u0;
    }
    return acc;
}

// Same integral in closed form: within a segment, in the eigenbasis of H,
// entries pick up exp(−ix(d_j − d_k)) which integrates analytically.
inline Matrix toggled_integral_exact(const ControlSchedule& sched, const Matrix& q) {
    Matrix acc = Matrix::Zero(q.rows(), q.cols());
    Matrix u0 = Matrix::Identity(q.rows(), q.cols());
    for (const auto& seg : sched.segments()) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(seg.hamiltonian);
        const Matrix& v = es.eigenvectors();
        const RealVector& d = es.eigenvalues();
        const Matrix m = v.adjoint() * (u0 * q * u0.adjoint()) * v;
        Matrix integ(m.rows(), m.cols());
        const double dt = seg.duration;
        for (Eigen::Index j = 0; j < m.rows(); ++j)
            for (Eigen::Index k = 0; k < m.cols(); ++k) {
                const double om = d(j) - d(k);
                const cplx f = std::abs(om * dt) < 1e-8
                                   ? cplx(dt, 0.0) * (1.0 - I * om * dt / 2.0)
                                   : (1.0 - std::exp(-I * om * dt)) / (I * om);
                integ(j, k) = m(j, k) * f;
            }
        acc += v * integ * v.adjoint();
        Matrix step = v * (-I * dt * d.cast<cplx>()).array().exp().matrix().asDiagonal() * v.adjoint();
        u0 = step * u0;
    }
    return acc;
}

inline DecouplingReport decoupling_residual(const ControlSchedule& sched, const Matrix& q,
                                            int points = default_quadrature_points,
                                            double tol = default_decoupling_tol) {
    require(q.rows() == sched.levels() && q.cols() == sched.levels(), ErrorKind::incompatible,
            "decoupling_residual: Q dimension does not match schedule");
    DecouplingReport r;
    r.residual_norm = op_norm(toggled_integral(sched, q, points));
    r.action = sched.action();
    r.tolerance = tol * sched.period() * op_norm(q);
    r.satisfied = r.residual_norm <= r.tolerance;
    return r;
}

// −T·Q̃(0) against −i∫₀ᵀ dt ∫₀ᵗ [H_C(s), Q̃(s)] ds. Both integrals use
// composite two-point Gauss panels (`panels` per segment), so the error
// falls off as panels⁻⁴ and refinement is observable.
struct ActionIdentityReport {
    double relative_error = 0.0;
    int panels = 0;
};

namespace detail {

// Nodes and weights of the composite two-point rule on [0, t], honouring
// segment boundaries.
inline void composite_nodes(const ControlSchedule& sched, double t, int panels,
                            std::vector<double>& x, std::vector<double>& w) {
    static const GaussRule two = gauss_legendre(2);
    x.clear();
    w.clear();
    std::vector<double> px, pw;
    for (const auto& pc : sched.pieces(0.0, t)) {
        const double seg_len = sched.segments()[pc.segment].duration;
        const int np = std::max(1, static_cast<int>(std::ceil(panels * pc.duration / seg_len - 1e-9)));
        const double h = pc.duration / np;
        for (int k = 0; k < np; ++k) {
            map_rule(two, pc.start + k * h, pc.start + (k + 1) * h, px, pw);
            x.insert(x.end(), px.begin(), px.end());
            w.insert(w.end(), pw.begin(), pw.end());
        }
    }
}

}  // namespace detail

inline ActionIdentityReport action_identity_check(const ControlSchedule& sched, const Matrix& q,
                                                  int panels = 16) {
    require(panels >= 1, ErrorKind::invalid_input, "action_identity_check: panels must be ≥ 1");
    const double period = sched.period();
    const Matrix lhs = -period * q;
    std::vector<double> xo, wo, xi, wi;
    detail::composite_nodes(sched, period, panels, xo, wo);
    Matrix outer = Matrix::Zero(q.rows(), q.cols());
    for (std::size_t k = 0; k < xo.size(); ++k) {
        detail::composite_nodes(sched, xo[k], panels, xi, wi);
        Matrix inner = Matrix::Zero(q.rows(), q.cols());
        for (std::size_t m = 0; m < xi.size(); ++m) {
            const Matrix& h = sched.at(xi[m]);
            const Matrix qt = toggled_q(sched, q, xi[m]);
            inner += wi[m] * (h * qt - qt * h);
        }
        outer += wo[k] * inner;
    }
    const Matrix rhs = -I * outer;
    const double scale = op_norm(lhs);
    return {scale > 0.0 ? op_norm(lhs - rhs) / scale : op_norm(rhs), panels};
}

// ---------------------------------------------------------------------------
// Designers

inline constexpr double default_pulse_fraction = 1e-3;

// Two finite-width π-type pulses realizing a sign inverter V (VQV* = −Q):
// (T/2, 0), (εT, H_p), (T/2 − 2εT, 0), (εT, H_p), with exp(−iεT·H_p) ∝ V.
// Residual is 2εT‖Q‖-scale for Pauli-type Q; it is reported, not hidden.
inline ControlSchedule design_bangbang(const Matrix& q, double period, const Matrix& inverter,
                                       double eps = default_pulse_fraction) {
    const auto n = q.rows();
    require(inverter.rows() == n && inverter.cols() == n, ErrorKind::incompatible,
            "design_bangbang: inverter dimension mismatch");
    require(period > 0.0, ErrorKind::invalid_input, "design_bangbang: period must be positive");
    require(eps > 0.0 && eps < 0.25, ErrorKind::invalid_input,
            "design_bangbang: pulse fraction must lie in (0, 1/4)");
    require(max_abs(inverter.adjoint() * inverter - Matrix::Identity(n, n)) <= 1e-10,
            ErrorKind::invalid_input, "design_bangbang: inverter is not unitary");
    require(max_abs(inverter * q * inverter.adjoint() + q) <= 1e-10 * std::max(1.0, max_abs(q)),
            ErrorKind::invalid_input, "design_bangbang: V Q V* ≠ −Q (invalid inverter)");
    Matrix k = unitary_generator(inverter);
    k -= (k.trace() / static_cast<double>(n)) * Matrix::Identity(n, n);  // global phase is irrelevant
    const double w = eps * period;
    const Matrix pulse = k / w;
    const Matrix zero = Matrix::Zero(n, n);
    return {period, {{period / 2, zero}, {w, pulse}, {period / 2 - 2 * w, zero}, {w, pulse}}};
}

struct OptimizerOptions {
    int restarts = 8;
    int continuation_stages = 4;   // λ, 10λ, ..., 10^{stages−1}λ
    int max_iterations = 4000;     // per Nelder–Mead run
    double feasibility_tol = 1e-6; // residual ≤ tol · T · ‖Q‖
};

struct OptimizedDesign {
    ControlSchedule schedule;
    double residual = 0.0;   // exact ‖∫Q̃‖
    double action = 0.0;
    bool feasible = false;
    int restarts_used = 0;
};

namespace detail {

// Traceless hermitian basis (generalized Gell-Mann, unnormalized).
inline std::vector<Matrix> traceless_basis(Eigen::Index n) {
    std::vector<Matrix> b;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k) {
            Matrix s = Matrix::Zero(n, n), a = Matrix::Zero(n, n);
            s(j, k) = s(k, j) = 1.0;
            a(j, k) = -I;
            a(k, j) = I;
            b.push_back(s);
            b.push_back(a);
        }
    for (Eigen::Index l = 1; l < n; ++l) {
        Matrix d = Matrix::Zero(n, n);
        const double c = std::sqrt(2.0 / (l * (l + 1.0)));
        for (Eigen::Index j = 0; j < l; ++j) d(j, j) = c;
        d(l, l) = -c * l;
        b.push_back(d);
    }
    return b;
}

struct DesignProblem {
    Matrix q;
    double period;
    int segments;
    std::vector<Matrix> basis;
    double lambda = 0.0;

    std::size_t dim() const { return basis.size() * static_cast<std::size_t>(segments); }

    ControlSchedule schedule(const double* x) const {
        std::vector<Segment> segs;
        const double dt = period / segments;
        for (int i = 0; i < segments; ++i) {
            Matrix h = Matrix::Zero(q.rows(), q.cols());
            for (std::size_t a = 0; a < basis.size(); ++a) h += x[i * basis.size() + a] * basis[a];
            segs.push_back({dt, h});
        }
        double sum = 0.0;
        for (int i = 0; i + 1 < segments; ++i) sum += segs[i].duration;
        segs.back().duration = period - sum;
        return {period, std::move(segs)};
    }

    Matrix residual(const double* x) const { return toggled_integral_exact(schedule(x), q); }

    double objective(const double* x) const {
        const ControlSchedule s = schedule(x);
        const double r = op_norm(toggled_integral_exact(s, q));
        return s.action() + lambda * r * r;
    }
};

inline double nm_objective(const gsl_vector* v, void* params) {
    const auto* p = static_cast<const DesignProblem*>(params);
    return p->objective(v->data);
}

inline void nelder_mead(const DesignProblem& prob, std::vector<double>& x, double step,
                        int max_iter) {
    const std::size_t n = x.size();
    gsl_multimin_function fn{&nm_objective, n, const_cast<DesignProblem*>(&prob)};
    gsl_vector* xv = gsl_vector_alloc(n);
    gsl_vector* ss = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(xv, i, x[i]);
    gsl_vector_set_all(ss, step);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, xv, ss);
    for (int it = 0; it < max_iter; ++it) {
        if (gsl_multimin_fminimizer_iterate(s)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-12 * std::max(1.0, step)) ==
            GSL_SUCCESS)
            break;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = gsl_vector_get(s->x, i);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(ss);
    gsl_vector_free(xv);
}

// Minimum-norm Gauss–Newton steps onto ∫Q̃ = 0 (finite-difference Jacobian).
inline void project_feasible(const DesignProblem& prob, std::vector<double>& x, int max_steps = 30) {
    const std::size_t n = x.size();
    auto flat = [&](const Matrix& r) {
        RealVector v(2 * r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            v(2 * i) = r.data()[i].real();
            v(2 * i + 1) = r.data()[i].imag();
        }
        return v;
    };
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    const double h = 1e-7 * std::max(1.0, scale);
    for (int it = 0; it < max_steps; ++it) {
        const RealVector r0 = flat(prob.residual(x.data()));
        if (r0.norm() <= 1e-14 * prob.period * op_norm(prob.q)) return;
        Eigen::MatrixXd jac(r0.size(), static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            jac.col(static_cast<Eigen::Index>(k)) =
                (flat(prob.residual(xp.data())) - flat(prob.residual(xm.data()))) / (2 * h);
        }
        const Eigen::VectorXd dx = jac.completeOrthogonalDecomposition().solve(-r0);
        double alpha = 1.0;
        for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
            std::vector<double> xn = x;
            for (std::size_t k = 0; k < n; ++k) xn[k] += alpha * dx(static_cast<Eigen::Index>(k));
            if (flat(prob.residual(xn.data())).norm() < r0.norm()) {
                x = std::move(xn);
                break;
            }
        }
    }
}

}  // namespace detail

// Minimize Σᵢ Δᵢ‖Hᵢ‖ + λ‖∫₀ᵀ Q̃ dτ‖² over K equal-length segments with
// traceless hermitian generators: Nelder–Mead under a λ-continuation, then a
// Gauss–Newton projection onto the decoupling manifold, over seeded restarts.
// The feasible design of least action wins.
inline OptimizedDesign design_optimized(const Matrix& q, double period, int segment_count,
                                        double penalty_weight, unsigned seed,
                                        const OptimizerOptions& opt = {}) {
    require(segment_count >= 2, ErrorKind::invalid_input, "design_optimized: need ≥ 2 segments");
    require(period > 0.0, ErrorKind::invalid_input, "design_optimized: period must be positive");
    require(penalty_weight >= 0.0, ErrorKind::invalid_input,
            "design_optimized: penalty weight must be nonnegative");
    require(is_hermitian(q), ErrorKind::invalid_input, "design_optimized: Q must be hermitian");
    const auto n = q.rows();
    const double qnorm = op_norm(q);
    const double tol = opt.feasibility_tol * period * qnorm;

    detail::DesignProblem prob{q, period, segment_count, detail::traceless_basis(n), penalty_weight};
    std::vector<double> zero(prob.dim(), 0.0);

    // Action is a sum of norms, so H ≡ 0 is the unconstrained minimizer.
    if (qnorm == 0.0 || penalty_weight == 0.0) {
        auto s = prob.schedule(zero.data());
        const double r = op_norm(toggled_integral_exact(s, q));
        return {s, r, 0.0, r <= tol, 0};
    }

    std::mt19937 rng(seed);
    const double amp = std::numbers::pi / period;
    std::uniform_real_distribution<double> init(-amp, amp);

    bool found = false;
    std::vector<double> best;
    double best_action = 0.0, best_res = 0.0;
    int used = 0;
    for (int r = 0; r < opt.restarts; ++r) {
        ++used;
        std::vector<double> x(prob.dim());
        for (auto& v : x) v = init(rng);
        double lam = penalty_weight;
        for (int stage = 0; stage < opt.continuation_stages; ++stage, lam *= 10.0) {
            prob.lambda = lam;
            detail::nelder_mead(prob, x, 0.25 * amp, opt.max_iterations);
        }
        detail::project_feasible(prob, x);
        const auto s = prob.schedule(x.data());
        const double res = op_norm(toggled_integral_exact(s, q));
        if (res > tol) continue;
        const double act = s.action();
        if (!found || act < best_action) {
            found = true;
            best = x;
            best_action = act;
            best_res = res;
        }
    }
    if (!found)
        fail(ErrorKind::not_converged, "design_optimized: no feasible schedule found after " +
                                           std::to_string(opt.restarts) + " restarts");
    return {prob.schedule(best.data()), best_res, best_action, true, used};
}

}  // namespace ddlab
