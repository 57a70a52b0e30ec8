#pragma once

// Dense PSD factorizations shared by the samplers and the conditioning code.
// psd_cholesky uses one deterministic left-looking algorithm everywhere so
// that chol(A (x) B) and chol(A) (x) chol(B) agree numerically, including the
// zero-pivot convention for semidefinite matrices (boundary points of a sheet
// have zero variance, so rank deficiency is the normal case here).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sheetsew {

/// Lower-triangular factor L with L L^T = A for positive semidefinite A.
/// Pivots below rel_tol * max_diag produce a zero column; pivots below
/// -rel_tol * max_diag abort (matrix not numerically PSD).
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& A, double rel_tol = 1e-12)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw std::invalid_argument("psd_cholesky: square matrix required");
    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(A(i, i)));
    const double tol = rel_tol * std::max(max_diag, 1e-300);

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    double min_pivot = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = A(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        min_pivot = std::min(min_pivot, d);
        if (d <= tol) {
            if (d < -1e3 * tol)
                throw std::runtime_error("psd_cholesky: matrix not positive semidefinite "
                                         "(smallest pivot " +
                                         std::to_string(d) + ")");
            continue;  // zero column
        }
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

/// Eigendecomposition-backed pseudo-inverse of a symmetric PSD matrix with a
/// relative eigenvalue cutoff. Supports solve and quadratic forms.
class PsdPseudoInverse {
public:
    explicit PsdPseudoInverse(const Eigen::MatrixXd& A, double rel_cutoff = 1e-10)
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("PsdPseudoInverse: eigendecomposition failed");
        vectors_ = es.eigenvectors();
        inv_values_ = es.eigenvalues();
        const double cutoff = rel_cutoff * std::max(inv_values_.cwiseAbs().maxCoeff(), 1e-300);
        for (Eigen::Index i = 0; i < inv_values_.size(); ++i)
            inv_values_(i) = inv_values_(i) > cutoff ? 1.0 / inv_values_(i) : 0.0;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const
    {
        return vectors_ * inv_values_.cwiseProduct(vectors_.transpose() * b);
    }

    /// b^T A^+ b
    double quad_form(const Eigen::VectorXd& b) const
    {
        const Eigen::VectorXd y = vectors_.transpose() * b;
        return (inv_values_.array() * y.array().square()).sum();
    }

private:
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd inv_values_;
};

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes and dyadically graded quadrature for kernels with an
// endpoint singularity (the |t-r|^{2H-1} family).
// ---------------------------------------------------------------------------

struct GaussLegendre {
    std::vector<double> nodes;    // on (-1, 1)
    std::vector<double> weights;

    explicit GaussLegendre(int n)
    {
        nodes.resize(n);
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            // Newton iteration from the Chebyshev initial guess
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    template <class F>
    double integrate(F&& f, double a, double b) const
    {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            acc += weights[i] * f(mid + half * nodes[i]);
        return acc * half;
    }
};

inline const GaussLegendre& gauss16()
{
    static const GaussLegendre g(16);
    return g;
}

/// Integrates f over (0, b] with dyadic grading toward the (possibly singular)
/// endpoint 0: pieces [b 2^{-k-1}, b 2^{-k}].
template <class F>
double integrate_graded_origin(F&& f, double b, const GaussLegendre& g = gauss16(),
                               int pieces = 60)
{
    if (b <= 0.0) return 0.0;
    double acc = 0.0;
    double hi = b;
    for (int k = 0; k < pieces; ++k) {
        const double lo = 0.5 * hi;
        acc += g.integrate(f, lo, hi);
        hi = lo;
    }
    return acc;
}

/// Integrates f over [a, infinity) with dyadically growing pieces; the
/// integrand must decay at least like a power < -1.
template <class F>
double integrate_dyadic_tail(F&& f, double a, const GaussLegendre& g = gauss16(),
                             int pieces = 60)
{
    double acc = 0.0;
    double lo = a;
    for (int k = 0; k < pieces; ++k) {
        const double hi = 2.0 * lo;
        acc += g.integrate(f, lo, hi);
        lo = hi;
    }
    return acc;
}

}  // namespace sheetsew
