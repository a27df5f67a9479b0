// linalg.hpp: dense and sparse numerical helpers

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "ddlab/error.hpp"

namespace ddlab {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I{0.0, 1.0};

namespace pauli {
inline Matrix x() { Matrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline Matrix y() { Matrix m(2, 2); m << 0, -I, I, 0; return m; }
inline Matrix z() { Matrix m(2, 2); m << 1, 0, 0, -1; return m; }
}  // namespace pauli

struct NormOptions {
    std::size_t dense_limit = 2000;   // SVD up to this dimension
    double rel_tol = 1e-8;            // power iteration stopping rule
    int max_iter = 10000;
};

namespace detail {

// Largest singular value by power iteration on A*A.
template <typename Mat>
double power_norm(const Mat& a, const NormOptions& opt) {
    const Eigen::Index n = a.cols();
    if (n == 0 || a.rows() == 0) return 0.0;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = cplx(1.0 + 0.01 * static_cast<double>(i % 7), 0.001 * static_cast<double>(i % 3));
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        Vector av = a * v;
        const double next = av.norm();
        if (next == 0.0) return 0.0;
        Vector w = a.adjoint() * av;
        const double wn = w.norm();
        if (wn == 0.0) return next;
        v = w / wn;
        if (std::abs(next - sigma) <= opt.rel_tol * next) return next;
        sigma = next;
    }
    return sigma;
}

}  // namespace detail

// Operator (spectral) norm: dense SVD below the size limit, power iteration above.
inline double op_norm(const Matrix& a, const NormOptions& opt = {}) {
    if (a.size() == 0) return 0.0;
    if (static_cast<std::size_t>(std::max(a.rows(), a.cols())) <= opt.dense_limit) {
        Eigen::BDCSVD<Matrix> svd(a);
        return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    }
    return detail::power_norm(a, opt);
}

inline double op_norm(const SparseMatrix& a, const NormOptions& opt = {}) {
    if (a.size() == 0) return 0.0;
    if (static_cast<std::size_t>(std::max(a.rows(), a.cols())) <= opt.dense_limit)
        return op_norm(Matrix(a), opt);
    return detail::power_norm(a, opt);
}

inline double max_abs(const Matrix& a) {
    return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

// max |A - A*| entrywise
inline double hermitian_defect(const Matrix& a) {
    return max_abs(a - a.adjoint());
}

inline bool is_hermitian(const Matrix& a, double rel_tol = 1e-12) {
    return hermitian_defect(a) <= rel_tol * std::max(max_abs(a), 1.0);
}

// ‖U*U − 1‖
inline double unitarity_defect(const Matrix& u) {
    return op_norm(u.adjoint() * u - Matrix::Identity(u.cols(), u.cols()));
}

// System index slow, second factor fast.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

// exp(A) by scaling and squaring with a degree-13 Padé approximant.
inline Matrix expm(const Matrix& a) {
    return a.exp();
}

// exp(−i h H)
inline Matrix expm_step(const Matrix& h_mat, double h) {
    return expm(-I * h * h_mat);
}

inline Matrix matrix_power(const Matrix& base, long long n) {
    Matrix result = Matrix::Identity(base.rows(), base.cols());
    Matrix sq = base;
    while (n > 0) {
        if (n & 1) result = result * sq;
        n >>= 1;
        if (n) sq = sq * sq;
    }
    return result;
}

// Hermitian generator K with exp(−iK) = V for unitary V, principal branch.
inline Matrix unitary_generator(const Matrix& v) {
    Eigen::ComplexSchur<Matrix> schur(v);
    const Matrix& t = schur.matrixT();
    const Matrix& q = schur.matrixU();
    Matrix d = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        d(i, i) = -std::arg(t(i, i));  // exp(−i K) has phase −K
    Matrix k = q * d * q.adjoint();
    return 0.5 * (k + k.adjoint());
}

// Gauss–Legendre nodes and weights on [-1, 1] via Newton on P_n.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int n) {
    require(n >= 1, ErrorKind::invalid_input, "gauss_legendre: need at least one point");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

// Rule mapped onto [a, b].
inline void map_rule(const GaussRule& rule, double a, double b,
                     std::vector<double>& x, std::vector<double>& w) {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    x.resize(rule.nodes.size());
    w.resize(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        x[i] = mid + half * rule.nodes[i];
        w[i] = half * rule.weights[i];
    }
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

}  // namespace ddlab
