#pragma once

// Closed-loop linear feedback on a symmetric system with one designated
// dominant eigenpair. Serves as the analytically checkable model of the
// negative-feedback mechanism: the exact input-output relation
// y = (I - A K)^{-1} A x, the iterated scheme y(P) = A (I - K A)^P x0, and
// their closed-form perturbation gains along the dominant direction.

#include <cmath>
#include <cstdint>
#include <vector>

#include "flatnn/errors.hpp"
#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

/// Symmetric system A = (1/epsilon) v1 v1^T + sum_{i>=2} vi vi^T over an
/// orthonormal basis; v1 is the dominant eigenvector with eigenvalue
/// 1/epsilon, all other eigenvalues are 1.
struct LinearSystem {
    std::size_t n = 0;
    double epsilon = 0.0;
    Tensor basis;   // n x n, column i holds v_{i+1}
    Tensor matrix;  // A

    Tensor dominant_vector() const {
        Tensor v = Tensor::zeros({n});
        for (std::size_t i = 0; i < n; ++i) v(i) = basis(i, 0);
        return v;
    }
};

/// Rank-one controller K = kappa * v1 v1^T acting along the dominant direction.
struct LinearController {
    double kappa = 0.0;
    Tensor gain;  // K
};

namespace detail {

inline Tensor matvec(const Tensor& m, const Tensor& x) {
    const std::size_t r = m.shape[0], c = m.shape[1];
    Tensor out = Tensor::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += m(i, j) * x(j);
        out(i) = acc;
    }
    return out;
}

inline double norm2(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data) acc += v * v;
    return std::sqrt(acc);
}

inline double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

// LU factorization with partial pivoting, in place. Returns false on an
// exactly singular pivot.
struct Lu {
    std::vector<double> lu;
    std::vector<std::size_t> piv;
    std::size_t n = 0;
};

inline bool lu_factor(const Tensor& m, Lu& out) {
    const std::size_t n = m.shape[0];
    out.n = n;
    out.lu = m.data;
    out.piv.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.piv[i] = i;
    auto& a = out.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
        if (a[p * n + k] == 0.0) return false;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
            std::swap(out.piv[k], out.piv[p]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            a[i * n + k] /= a[k * n + k];
            const double f = a[i * n + k];
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
        }
    }
    return true;
}

inline std::vector<double> lu_solve(const Lu& f, const std::vector<double>& b) {
    const std::size_t n = f.n;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.piv[i]];
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu[i * n + j] * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu[i * n + j] * x[j];
        x[i] /= f.lu[i * n + i];
    }
    return x;
}

inline double norm1(const Tensor& m) {
    const std::size_t n = m.shape[0];
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += std::abs(m(i, j));
        worst = std::max(worst, col);
    }
    return worst;
}

// 1-norm condition estimate: ||M||_1 times ||M^{-1}||_1, the inverse norm
// obtained column by column from the LU factors (n is desk-scale small).
inline double cond1(const Tensor& m, const Lu& f) {
    const std::size_t n = f.n;
    double inv_norm = 0.0;
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        std::vector<double> col = lu_solve(f, e);
        e[j] = 0.0;
        double sum = 0.0;
        for (double v : col) sum += std::abs(v);
        inv_norm = std::max(inv_norm, sum);
    }
    return norm1(m) * inv_norm;
}

inline Tensor assemble_system_matrix(const Tensor& basis, double epsilon) {
    const std::size_t n = basis.shape[0];
    Tensor a = Tensor::zeros({n, n});
    for (std::size_t k = 0; k < n; ++k) {
        const double coef = k == 0 ? 1.0 / epsilon : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) += coef * basis(i, k) * basis(j, k);
    }
    return a;
}

inline void check_orthonormal(const Tensor& basis, double tol) {
    const std::size_t n = basis.shape[0];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < n; ++k) d += basis(k, i) * basis(k, j);
            const double want = i == j ? 1.0 : 0.0;
            if (std::abs(d - want) > tol)
                throw ValueError("basis is not orthonormal: |v" + std::to_string(i + 1) + "^T v" +
                                 std::to_string(j + 1) + " - " + std::to_string(int(want)) + "| > tol");
        }
}

}  // namespace detail

/// Builds the worked example system from a seeded random orthonormal basis
/// (Gaussian matrix then modified Gram-Schmidt with one re-orthogonalization).
inline LinearSystem build_example_system(std::size_t n, double epsilon, std::uint64_t seed) {
    if (n < 2) throw ValueError("build_example_system: n must be >= 2, got " + std::to_string(n));
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ValueError("build_example_system: epsilon must lie in (0, 1), got " + std::to_string(epsilon));

    Rng rng(derive_seed(seed, 0x11ea5));
    Tensor basis = Tensor::zeros({n, n});
    for (double& v : basis.data) v = rng.normal();

    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += basis(i, j) * basis(i, k);
                for (std::size_t i = 0; i < n; ++i) basis(i, j) -= proj * basis(i, k);
            }
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm += basis(i, j) * basis(i, j);
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < n; ++i) basis(i, j) /= nrm;
    }

    LinearSystem sys;
    sys.n = n;
    sys.epsilon = epsilon;
    sys.basis = std::move(basis);
    sys.matrix = detail::assemble_system_matrix(sys.basis, epsilon);
    return sys;
}

/// Same system with a caller-supplied orthonormal basis (column i = v_{i+1});
/// lets tests pin the canonical basis.
inline LinearSystem build_system_from_basis(const Tensor& basis, double epsilon) {
    if (basis.rank() != 2 || basis.shape[0] != basis.shape[1] || basis.shape[0] < 2)
        throw ValueError("build_system_from_basis: basis must be square with n >= 2, got " +
                         shape_str(basis.shape));
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ValueError("build_system_from_basis: epsilon must lie in (0, 1)");
    detail::check_orthonormal(basis, 1e-12);

    LinearSystem sys;
    sys.n = basis.shape[0];
    sys.epsilon = epsilon;
    sys.basis = basis.detached();
    sys.matrix = detail::assemble_system_matrix(sys.basis, epsilon);
    return sys;
}

inline LinearController make_controller(const LinearSystem& sys, double kappa) {
    LinearController c;
    c.kappa = kappa;
    c.gain = Tensor::zeros({sys.n, sys.n});
    for (std::size_t i = 0; i < sys.n; ++i)
        for (std::size_t j = 0; j < sys.n; ++j) c.gain(i, j) = kappa * sys.basis(i, 0) * sys.basis(j, 0);
    return c;
}

/// Exact closed loop: solves (I - A K) y = A x by LU with partial pivoting.
/// Rejects near-singular systems (1-norm condition estimate above 1e12).
inline Tensor closed_loop_output(const LinearSystem& sys, const LinearController& ctrl, const Tensor& x) {
    if (x.rank() != 1 || x.shape[0] != sys.n)
        throw ShapeError("closed_loop_output: x must have shape [" + std::to_string(sys.n) + "], got " +
                         shape_str(x.shape));

    Tensor ak = matmul(sys.matrix, ctrl.gain);
    Tensor m = Tensor::zeros({sys.n, sys.n});
    for (std::size_t i = 0; i < sys.n; ++i)
        for (std::size_t j = 0; j < sys.n; ++j) m(i, j) = (i == j ? 1.0 : 0.0) - ak(i, j);

    const double gain_ratio = ctrl.kappa / sys.epsilon;
    detail::Lu f;
    if (!detail::lu_factor(m, f))
        throw SingularSystemError("closed_loop_output: I - A*K is singular (kappa/epsilon = " +
                                      std::to_string(gain_ratio) + ")",
                                  gain_ratio);
    const double cond = detail::cond1(m, f);
    if (!(cond <= 1e12))
        throw SingularSystemError("closed_loop_output: I - A*K is near-singular, condition estimate " +
                                      std::to_string(cond) + " (kappa/epsilon = " +
                                      std::to_string(gain_ratio) + ")",
                                  gain_ratio);

    Tensor rhs = detail::matvec(sys.matrix, x);
    return Tensor::vec(detail::lu_solve(f, rhs.data));
}

/// Iterated feedback: P repetitions of x <- x - K (A x), then one final A x.
inline Tensor iterated_feedback(const LinearSystem& sys, const LinearController& ctrl, const Tensor& x0,
                                std::size_t passes) {
    if (x0.rank() != 1 || x0.shape[0] != sys.n)
        throw ShapeError("iterated_feedback: x0 must have shape [" + std::to_string(sys.n) + "], got " +
                         shape_str(x0.shape));
    Tensor x = x0.detached();
    for (std::size_t p = 0; p < passes; ++p) {
        Tensor y = detail::matvec(sys.matrix, x);
        Tensor correction = detail::matvec(ctrl.gain, y);
        for (std::size_t i = 0; i < sys.n; ++i) x(i) -= correction(i);
    }
    return detail::matvec(sys.matrix, x);
}

/// |1 / (1 - kappa/epsilon)|: size of the closed-loop output for the
/// dominant-direction probe x = epsilon * v1.
inline double exact_gain(double epsilon, double kappa) {
    if (kappa == epsilon)
        throw PoleError("exact_gain: pole at kappa == epsilon (kappa/epsilon = 1)");
    return std::abs(1.0 / (1.0 - kappa / epsilon));
}

/// |1 - kappa/epsilon|^P: size of the iterated-feedback output for the same probe.
inline double iterated_gain(double epsilon, double kappa, std::size_t passes) {
    if (passes == 0) return 1.0;
    return std::pow(std::abs(1.0 - kappa / epsilon), static_cast<double>(passes));
}

}  // namespace flatnn
