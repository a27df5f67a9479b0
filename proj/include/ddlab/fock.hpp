// fock.hpp: truncated multimode bosonic Fock space.
//
// Basis convention: states are occupation tuples (n_1, ..., n_J) with
// total occupation Σ n_j ≤ cutoff, ordered by total occupation first and
// lexicographically (ascending, mode 1 most significant) inside each grade.
// The vacuum is index 0, and the states with total ≤ k always form the
// leading block of the basis, which the identity checks exploit.

#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddlab/error.hpp"
#include "ddlab/linalg.hpp"
#include "ddlab/report.hpp"

namespace ddlab {

// Discretized reservoir: mode frequencies ω_j > 0 and coupling amplitudes f_j.
class ModeSet {
public:
    ModeSet(std::vector<double> frequencies, std::vector<cplx> amplitudes)
        : omega_(std::move(frequencies)), f_(std::move(amplitudes)) {
        require(!omega_.empty(), ErrorKind::invalid_input, "ModeSet: at least one mode required");
        require(omega_.size() == f_.size(), ErrorKind::invalid_input,
                "ModeSet: frequencies and amplitudes differ in length");
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            require(std::isfinite(omega_[j]) && omega_[j] > 0.0, ErrorKind::invalid_input,
                    "ModeSet: frequency " + std::to_string(j) + " must be strictly positive");
            require(j == 0 || omega_[j] >= omega_[j - 1], ErrorKind::invalid_input,
                    "ModeSet: frequencies must be ascending");
            require(std::isfinite(f_[j].real()) && std::isfinite(f_[j].imag()),
                    ErrorKind::invalid_input, "ModeSet: amplitude is not finite");
        }
    }

    static ModeSet single(double omega, cplx f) { return ModeSet({omega}, {f}); }

    std::size_t count() const { return omega_.size(); }
    std::span<const double> frequencies() const { return omega_; }
    std::span<const cplx> amplitudes() const { return f_; }

    // ‖(ω^p + 1) f‖₂
    double weighted_norm(double p) const {
        double s = 0.0;
        for (std::size_t j = 0; j < count(); ++j) {
            const double w = std::pow(omega_[j], p) + 1.0;
            s += w * w * std::norm(f_[j]);
        }
        return std::sqrt(s);
    }

    double l2_norm() const {
        double s = 0.0;
        for (const auto& a : f_) s += std::norm(a);
        return std::sqrt(s);
    }

    // Same frequencies, amplitudes ω^p f.
    ModeSet with_weight(double p) const {
        std::vector<cplx> g(count());
        for (std::size_t j = 0; j < count(); ++j) g[j] = std::pow(omega_[j], p) * f_[j];
        return ModeSet(omega_, std::move(g));
    }

    // Each mode split into `copies` identical modes carrying f/√copies:
    // ‖(ω^p+1)f‖₂ is unchanged for every p.
    ModeSet split(std::size_t copies) const {
        require(copies >= 1, ErrorKind::invalid_input, "ModeSet::split: copies must be positive");
        std::vector<double> w;
        std::vector<cplx> g;
        const double s = 1.0 / std::sqrt(static_cast<double>(copies));
        for (std::size_t j = 0; j < count(); ++j)
            for (std::size_t c = 0; c < copies; ++c) {
                w.push_back(omega_[j]);
                g.push_back(s * f_[j]);
            }
        return ModeSet(std::move(w), std::move(g));
    }

    // Unit amplitude on mode j, zero elsewhere: a(e_j) = a_j.
    ModeSet unit(std::size_t j) const {
        std::vector<cplx> g(count(), cplx{0.0, 0.0});
        g.at(j) = 1.0;
        return ModeSet(omega_, std::move(g));
    }

private:
    std::vector<double> omega_;
    std::vector<cplx> f_;
};

// M₋₁/₂ = 2‖(ω^{-1/2}+1) f‖₂
inline double m_minus_half(const ModeSet& modes) {
    return 2.0 * modes.weighted_norm(-0.5);
}

// M_n = 2 Σ_{k=1}^{n} C(n,k) ‖(ω^k+1) f‖₂
inline double m_n(const ModeSet& modes, int n) {
    double s = 0.0;
    for (int k = 1; k <= n; ++k) s += binomial(n, k) * modes.weighted_norm(k);
    return 2.0 * s;
}

inline constexpr std::size_t default_dim_ceiling = 200000;

class FockBasis {
public:
    std::size_t mode_count() const { return modes_; }
    int cutoff() const { return cutoff_; }
    std::size_t dim() const { return total_.size(); }

    std::span<const int> state(std::size_t i) const {
        return {occ_.data() + i * modes_, modes_};
    }
    int total(std::size_t i) const { return total_[i]; }

    // Number of leading states with total occupation ≤ k.
    std::size_t prefix_dim(int k) const {
        if (k < 0) return 0;
        if (k >= cutoff_) return dim();
        return grade_end_[static_cast<std::size_t>(k)];
    }

    // Index of an occupation tuple, or -1 when it lies outside the truncation.
    long long index_of(std::span<const int> n) const {
        if (n.size() != modes_) return -1;
        auto it = lookup_.find(key(n));
        return it == lookup_.end() ? -1 : static_cast<long long>(it->second);
    }

    // FNV-1a over (J, cutoff, occupations); stamps operator dumps.
    std::uint64_t hash() const { return hash_; }

    friend FockBasis build_basis_impl(std::size_t, int, std::size_t);

private:
    std::string key(std::span<const int> n) const {
        std::string k;
        k.reserve(n.size() * sizeof(int));
        for (int v : n) k.append(reinterpret_cast<const char*>(&v), sizeof(int));
        return k;
    }

    std::size_t modes_ = 0;
    int cutoff_ = 0;
    std::vector<int> occ_;
    std::vector<int> total_;
    std::vector<std::size_t> grade_end_;
    std::unordered_map<std::string, std::size_t> lookup_;
    std::uint64_t hash_ = 0;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

namespace detail {

inline void compositions(int remaining, std::size_t pos, std::vector<int>& cur,
                         std::vector<int>& out) {
    if (pos + 1 == cur.size()) {
        cur[pos] = remaining;
        out.insert(out.end(), cur.begin(), cur.end());
        return;
    }
    for (int v = 0; v <= remaining; ++v) {
        cur[pos] = v;
        compositions(remaining - v, pos + 1, cur, out);
    }
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

inline FockBasis build_basis_impl(std::size_t modes, int cutoff, std::size_t ceiling) {
    require(modes >= 1, ErrorKind::invalid_input, "build_basis: mode count must be ≥ 1");
    require(cutoff >= 1, ErrorKind::invalid_input, "build_basis: cutoff must be ≥ 1");
    const double dim = binomial(cutoff + static_cast<int>(modes), static_cast<int>(modes));
    require(dim <= static_cast<double>(ceiling), ErrorKind::resource_limit,
            "build_basis: dimension " + std::to_string(static_cast<long long>(dim)) +
                " exceeds ceiling " + std::to_string(ceiling));

    FockBasis b;
    b.modes_ = modes;
    b.cutoff_ = cutoff;
    b.occ_.reserve(static_cast<std::size_t>(dim) * modes);
    std::vector<int> cur(modes, 0);
    for (int n = 0; n <= cutoff; ++n) {
        detail::compositions(n, 0, cur, b.occ_);
        b.grade_end_.push_back(b.occ_.size() / modes);
    }
    const std::size_t d = b.occ_.size() / modes;
    b.total_.resize(d);
    b.lookup_.reserve(d);
    std::uint64_t h = 14695981039346656037ULL;
    h = detail::fnv1a(h, &modes, sizeof(modes));
    h = detail::fnv1a(h, &cutoff, sizeof(cutoff));
    for (std::size_t i = 0; i < d; ++i) {
        auto s = b.state(i);
        int t = 0;
        for (int v : s) t += v;
        b.total_[i] = t;
        b.lookup_.emplace(b.key(s), i);
        h = detail::fnv1a(h, s.data(), s.size_bytes());
    }
    b.hash_ = h;
    return b;
}

inline BasisPtr build_basis(std::size_t modes, int cutoff,
                            std::size_t ceiling = default_dim_ceiling) {
    return std::make_shared<const FockBasis>(build_basis_impl(modes, cutoff, ceiling));
}

// Sparse operator on a truncated Fock space. Immutable after construction.
class FockOperator {
public:
    FockOperator(SparseMatrix m, BasisPtr basis, bool hermitian)
        : m_(std::move(m)), basis_(std::move(basis)), hermitian_(hermitian) {
        m_.makeCompressed();
    }

    const SparseMatrix& matrix() const { return m_; }
    Matrix dense() const { return Matrix(m_); }
    const BasisPtr& basis() const { return basis_; }
    bool hermitian() const { return hermitian_; }
    std::size_t dim() const { return basis_->dim(); }

    cplx element(std::size_t row, std::size_t col) const {
        return m_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }

private:
    SparseMatrix m_;
    BasisPtr basis_;
    bool hermitian_;
};

namespace detail {

inline void check_modes(const ModeSet& modes, const FockBasis& basis) {
    require(modes.count() == basis.mode_count(), ErrorKind::incompatible,
            "mode count " + std::to_string(modes.count()) + " does not match basis mode count " +
                std::to_string(basis.mode_count()));
}

inline SparseMatrix from_triplets(std::size_t dim, const std::vector<Eigen::Triplet<cplx>>& t) {
    SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline SparseMatrix diagonal(const std::vector<double>& d) {
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] != 0.0) t.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
    return from_triplets(d.size(), t);
}

}  // namespace detail

// a(f) = Σ_j conj(f_j) a_j
inline FockOperator annihilator(const ModeSet& modes, const BasisPtr& basis) {
    detail::check_modes(modes, *basis);
    const auto f = modes.amplitudes();
    std::vector<Eigen::Triplet<cplx>> t;
    std::vector<int> lowered(basis->mode_count());
    for (std::size_t col = 0; col < basis->dim(); ++col) {
        const auto n = basis->state(col);
        for (std::size_t j = 0; j < n.size(); ++j) {
            if (n[j] == 0 || f[j] == cplx{}) continue;
            std::copy(n.begin(), n.end(), lowered.begin());
            --lowered[j];
            const auto row = basis->index_of(lowered);
            t.emplace_back(static_cast<int>(row), static_cast<int>(col),
                           std::conj(f[j]) * std::sqrt(static_cast<double>(n[j])));
        }
    }
    return {detail::from_triplets(basis->dim(), t), basis, false};
}

// a*(f) = Σ_j f_j a_j*, with transitions above the cutoff dropped.
inline FockOperator creator(const ModeSet& modes, const BasisPtr& basis) {
    detail::check_modes(modes, *basis);
    const auto f = modes.amplitudes();
    std::vector<Eigen::Triplet<cplx>> t;
    std::vector<int> raised(basis->mode_count());
    for (std::size_t col = 0; col < basis->dim(); ++col) {
        if (basis->total(col) >= basis->cutoff()) continue;
        const auto n = basis->state(col);
        for (std::size_t j = 0; j < n.size(); ++j) {
            if (f[j] == cplx{}) continue;
            std::copy(n.begin(), n.end(), raised.begin());
            ++raised[j];
            const auto row = basis->index_of(raised);
            t.emplace_back(static_cast<int>(row), static_cast<int>(col),
                           f[j] * std::sqrt(static_cast<double>(n[j] + 1)));
        }
    }
    return {detail::from_triplets(basis->dim(), t), basis, false};
}

// φ(f) = a*(f) + a(f)
inline FockOperator field_operator(const ModeSet& modes, const BasisPtr& basis) {
    SparseMatrix m = creator(modes, basis).matrix() + annihilator(modes, basis).matrix();
    return {std::move(m), basis, true};
}

// dΓ(ω^p): diagonal Σ_j n_j ω_j^p. p = 1 is the free field energy H_f.
inline FockOperator number_weighted(const ModeSet& modes, const BasisPtr& basis, double p) {
    detail::check_modes(modes, *basis);
    const auto w = modes.frequencies();
    std::vector<double> d(basis->dim());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto n = basis->state(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n.size(); ++j) s += n[j] * std::pow(w[j], p);
        d[i] = s;
    }
    return {detail::diagonal(d), basis, true};
}

// Diagonal of Θ = H_f + 1.
inline std::vector<double> theta_diagonal(const ModeSet& modes, const FockBasis& basis) {
    detail::check_modes(modes, basis);
    const auto w = modes.frequencies();
    std::vector<double> d(basis.dim());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto n = basis.state(i);
        double s = 1.0;
        for (std::size_t j = 0; j < n.size(); ++j) s += n[j] * w[j];
        d[i] = s;
    }
    return d;
}

// Θ^m, m of either sign.
inline FockOperator theta_power(const BasisPtr& basis, const ModeSet& modes, int m) {
    auto d = theta_diagonal(modes, *basis);
    for (auto& v : d) v = std::pow(v, m);
    return {detail::diagonal(d), basis, true};
}

// ---------------------------------------------------------------------------
// Executable identities and bounds

namespace detail {

inline double block_max_abs(const SparseMatrix& m, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(k);
    if (n == 0) return 0.0;
    return Matrix(m).topLeftCorner(n, n).cwiseAbs().maxCoeff();
}

// max entrywise |lhs − rhs| on the leading k×k block, relative to max(1, |lhs|).
inline double block_deviation(const SparseMatrix& lhs, const SparseMatrix& rhs, std::size_t k) {
    const double scale = std::max(1.0, block_max_abs(lhs, k));
    return block_max_abs(lhs - rhs, k) / scale;
}

}  // namespace detail

// Max violation of the CCR on the states with total occupation ≤ cutoff − 1.
inline CheckResult check_ccr(const BasisPtr& basis, const ModeSet& modes, double tol = 1e-12) {
    detail::check_modes(modes, *basis);
    require(basis->cutoff() >= 2, ErrorKind::invalid_input, "check_ccr: cutoff must be ≥ 2");
    const std::size_t k = basis->prefix_dim(basis->cutoff() - 1);
    const std::size_t modes_n = modes.count();
    std::vector<SparseMatrix> a, ad;
    for (std::size_t j = 0; j < modes_n; ++j) {
        a.push_back(annihilator(modes.unit(j), basis).matrix());
        ad.push_back(creator(modes.unit(j), basis).matrix());
    }
    SparseMatrix id(static_cast<Eigen::Index>(basis->dim()), static_cast<Eigen::Index>(basis->dim()));
    id.setIdentity();
    const SparseMatrix zero(id.rows(), id.cols());
    double worst = 0.0;
    for (std::size_t p = 0; p < modes_n; ++p)
        for (std::size_t q = 0; q < modes_n; ++q) {
            const SparseMatrix aa = a[p] * a[q] - a[q] * a[p];
            const SparseMatrix cc = ad[p] * ad[q] - ad[q] * ad[p];
            SparseMatrix ac = a[p] * ad[q] - ad[q] * a[p];
            if (p == q) ac -= id;
            worst = std::max({worst, detail::block_max_abs(aa, k), detail::block_max_abs(cc, k),
                              detail::block_max_abs(ac, k)});
        }
    return CheckResult::le("ccr", worst, tol);
}

// Θⁿ a*(f) Θ⁻ⁿ = Σ_k C(n,k) a*(ω^k f) Θ^{-k}, the alternating analogue for a(f),
// and [H_f, a*(f)] = a*(ωf), [H_f, a(f)] = −a(ωf), on states with total ≤ cutoff − n.
inline std::vector<CheckResult> check_commutator_identities(const BasisPtr& basis,
                                                            const ModeSet& modes, int n,
                                                            double tol = 1e-12) {
    detail::check_modes(modes, *basis);
    require(n >= 0 && n <= 16, ErrorKind::invalid_input,
            "check_commutator_identities: n must lie in [0, 16]");
    require(basis->cutoff() - n >= 0, ErrorKind::invalid_input,
            "check_commutator_identities: cutoff too small for n");
    const std::size_t k = basis->prefix_dim(basis->cutoff() - n);

    const SparseMatrix th_n = theta_power(basis, modes, n).matrix();
    const SparseMatrix th_mn = theta_power(basis, modes, -n).matrix();
    const SparseMatrix ad = creator(modes, basis).matrix();
    const SparseMatrix an = annihilator(modes, basis).matrix();

    SparseMatrix lhs_c = th_n * ad * th_mn;
    SparseMatrix lhs_a = th_n * an * th_mn;
    SparseMatrix rhs_c(lhs_c.rows(), lhs_c.cols()), rhs_a(lhs_a.rows(), lhs_a.cols());
    for (int j = 0; j <= n; ++j) {
        const ModeSet wk = modes.with_weight(j);
        const SparseMatrix th_mj = theta_power(basis, modes, -j).matrix();
        const double c = binomial(n, j);
        rhs_c += c * (creator(wk, basis).matrix() * th_mj);
        rhs_a += ((j % 2) ? -c : c) * (annihilator(wk, basis).matrix() * th_mj);
    }

    const SparseMatrix hf = number_weighted(modes, basis, 1.0).matrix();
    const ModeSet wf = modes.with_weight(1.0);
    const SparseMatrix comm_c = hf * ad - ad * hf;
    const SparseMatrix comm_a = hf * an - an * hf;
    const SparseMatrix neg_a_wf = -annihilator(wf, basis).matrix();

    const std::string sfx = "[n=" + std::to_string(n) + "]";
    return {
        CheckResult::le("theta_conj_creator" + sfx, detail::block_deviation(lhs_c, rhs_c, k), tol),
        CheckResult::le("theta_conj_annihilator" + sfx, detail::block_deviation(lhs_a, rhs_a, k), tol),
        CheckResult::le("hf_creator_commutator",
                        detail::block_deviation(comm_c, creator(wf, basis).matrix(), k), tol),
        CheckResult::le("hf_annihilator_commutator",
                        detail::block_deviation(comm_a, neg_a_wf, k), tol),
    };
}

// Measured norms of a(f)Θ⁻¹, a*(f)Θ⁻¹, [Θⁿ,a*(f)]Θ⁻ⁿ, [Θⁿ,a(f)]Θ⁻ⁿ against
// ½M₋₁/₂ and ½Mₙ. Compressions of the full-space operators, so the bounds are
// exact; pass requires strict inequality unless both sides vanish.
inline std::vector<CheckResult> check_field_bounds(const BasisPtr& basis, const ModeSet& modes,
                                                   int n, const NormOptions& nopt = {}) {
    detail::check_modes(modes, *basis);
    require(n >= 1, ErrorKind::invalid_input, "check_field_bounds: n must be ≥ 1");
    const SparseMatrix ad = creator(modes, basis).matrix();
    const SparseMatrix an = annihilator(modes, basis).matrix();
    const SparseMatrix th_m1 = theta_power(basis, modes, -1).matrix();
    const SparseMatrix th_n = theta_power(basis, modes, n).matrix();
    const SparseMatrix th_mn = theta_power(basis, modes, -n).matrix();

    const double half_mh = 0.5 * m_minus_half(modes);
    const double half_mn = 0.5 * m_n(modes, n);
    const std::string sfx = "[n=" + std::to_string(n) + "]";
    const SparseMatrix comm_c = (th_n * ad - ad * th_n) * th_mn;
    const SparseMatrix comm_a = (th_n * an - an * th_n) * th_mn;
    return {
        CheckResult::strict("annihilator_theta_inv", op_norm(SparseMatrix(an * th_m1), nopt), half_mh),
        CheckResult::strict("creator_theta_inv", op_norm(SparseMatrix(ad * th_m1), nopt), half_mh),
        CheckResult::strict("theta_commutator_creator" + sfx, op_norm(comm_c, nopt), half_mn),
        CheckResult::strict("theta_commutator_annihilator" + sfx, op_norm(comm_a, nopt), half_mn),
    };
}

// ---------------------------------------------------------------------------
// Sparse-triplet dump:
//   # ddlab sparse-triplet v1
//   # dim <dim> basis_hash <16 hex digits> hermitian <0|1> nnz <count>
//   <row> <col> <re> <im>            (one line per stored entry, column-major)

inline std::string dump_triplets(const FockOperator& op) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(op.basis()->hash()));
    std::string out = "# ddlab sparse-triplet v1\n";
    out += "# dim " + std::to_string(op.dim()) + " basis_hash " + hex + " hermitian " +
           (op.hermitian() ? "1" : "0") + " nnz " + std::to_string(op.matrix().nonZeros()) + "\n";
    const auto& m = op.matrix();
    for (Eigen::Index c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            out += std::to_string(it.row()) + " " + std::to_string(it.col()) + " " +
                   format_double(it.value().real()) + " " + format_double(it.value().imag()) + "\n";
    return out;
}

}  // namespace ddlab
