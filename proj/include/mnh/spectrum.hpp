#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace mnh {

using MatX = Eigen::MatrixXcd;
using VecX = Eigen::VectorXcd;

/// Eigen-decomposition of a square complex matrix with certified residuals.
struct Spectrum {
    std::vector<cd> eigenvalues;
    MatX right_vectors;                // column per eigenvalue, unit 2-norm
    std::optional<MatX> left_vectors;  // rows of V^{-1}, conjugated into columns: l_i^H r_j = delta_ij
    std::vector<double> residuals;     // ||H v - lambda v|| / max(1, ||H||_F)
    std::vector<bool> defective;       // member of a near-coalescent pair
    double tolerance = 0.0;            // requested residual bound
    double max_residual = 0.0;         // achieved

    [[nodiscard]] std::size_t size() const { return eigenvalues.size(); }
};

/// Raised when the residual target cannot be met; carries the best-effort decomposition.
class ConvergenceError : public std::runtime_error {
   public:
    ConvergenceError(const std::string& what, Spectrum best) : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const Spectrum& best_effort() const { return best_; }

   private:
    Spectrum best_;
};

inline double default_tolerance(Eigen::Index n) { return n <= 16 ? 1e-10 : 1e-8; }

/// Overlap above which two eigenvectors count as coalesced.
inline constexpr double defective_overlap = 1.0 - 1e-6;

namespace detail {

inline bool eigen_order(cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

inline void check_square_finite(const MatX& h, const char* who) {
    if (h.rows() != h.cols() || h.rows() < 1) throw ArgumentError(std::string(who) + ": matrix must be square and non-empty");
    if (!h.allFinite()) throw ArgumentError(std::string(who) + ": matrix has non-finite entries");
}

inline double residual(const MatX& h, cd lambda, const VecX& v, double scale) {
    return (h * v - lambda * v).norm() / scale;
}

/// Sort eigenpairs, normalise vectors, compute residuals and defective flags.
/// apply(v) returns H v; h_norm is ||H||_F.
template <typename Apply>
Spectrum finalize_with(Apply&& apply, double h_norm, std::vector<cd> values, MatX vectors, bool want_left,
                       double tol) {
    const auto n = static_cast<Eigen::Index>(values.size());
    std::vector<Eigen::Index> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return eigen_order(values[a], values[b]); });

    Spectrum s;
    s.tolerance = tol;
    s.eigenvalues.resize(values.size());
    s.right_vectors.resize(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        s.eigenvalues[c] = values[order[c]];
        VecX v = vectors.col(order[c]);
        const double nv = v.norm();
        if (nv > 0.0) v /= nv;
        s.right_vectors.col(c) = v;
    }

    const double scale = std::max(1.0, h_norm);
    s.residuals.resize(values.size());
    for (Eigen::Index c = 0; c < n; ++c) {
        const VecX v = s.right_vectors.col(c);
        s.residuals[c] = (apply(v) - s.eigenvalues[c] * v).norm() / scale;
        s.max_residual = std::max(s.max_residual, s.residuals[c]);
    }

    // Coalescence only happens between close eigenvalues; the ordering keeps them near each other
    // in real part, so compare every pair within the gap window.
    s.defective.assign(values.size(), false);
    const double window = 1e-3 * scale;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            if (s.eigenvalues[b].real() - s.eigenvalues[a].real() > window) break;
            if (std::abs(s.eigenvalues[b] - s.eigenvalues[a]) > window) continue;
            const double ov = std::abs(s.right_vectors.col(a).dot(s.right_vectors.col(b)));
            if (ov > defective_overlap) s.defective[a] = s.defective[b] = true;
        }
    }

    if (want_left) {
        Eigen::PartialPivLU<MatX> lu(s.right_vectors);
        s.left_vectors = lu.inverse().adjoint();
    }
    return s;
}

inline Spectrum finalize(const MatX& h, std::vector<cd> values, MatX vectors, bool want_left, double tol) {
    return finalize_with([&](const VecX& v) -> VecX { return h * v; }, h.norm(), std::move(values),
                         std::move(vectors), want_left, tol);
}

/// A few steps of inverse iteration for pairs that miss the residual target.
inline void polish(const MatX& h, Spectrum& s) {
    const double scale = std::max(1.0, h.norm());
    const auto n = h.rows();
    s.max_residual = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        if (s.residuals[c] > s.tolerance) {
            const cd shift = s.eigenvalues[c] + cd(1e-14 * scale, 0.0);
            Eigen::PartialPivLU<MatX> lu(h - shift * MatX::Identity(n, n));
            VecX v = s.right_vectors.col(c);
            for (int it = 0; it < 3; ++it) {
                VecX w = lu.solve(v);
                const double nw = w.norm();
                if (!std::isfinite(nw) || nw == 0.0) break;
                v = w / nw;
            }
            const cd rq = v.dot(h * v);  // Rayleigh quotient, v normalised
            const double r_old = s.residuals[c];
            const double r_new = residual(h, rq, v, scale);
            if (r_new < r_old) {
                s.right_vectors.col(c) = v;
                s.eigenvalues[c] = rq;
                s.residuals[c] = r_new;
            }
        }
        s.max_residual = std::max(s.max_residual, s.residuals[c]);
    }
}

}  // namespace detail

/// Dense non-symmetric eigendecomposition (LAPACK zgeev) with residual certification.
/// Eigenvalues are sorted by real part, then imaginary part.
inline Spectrum eig(const MatX& h, bool want_left = false, std::optional<double> tol = std::nullopt) {
    detail::check_square_finite(h, "eig");
    const auto n = h.rows();
    const double target = tol.value_or(default_tolerance(n));

    MatX a = h;
    std::vector<cd> w(static_cast<std::size_t>(n));
    MatX vr(n, n);
    const lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', static_cast<lapack_int>(n),
                      reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(n),
                      reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1,
                      reinterpret_cast<lapack_complex_double*>(vr.data()), static_cast<lapack_int>(n));
    if (info < 0) throw ArgumentError("eig: zgeev rejected argument " + std::to_string(-info));

    Spectrum s = detail::finalize(h, std::move(w), std::move(vr), want_left, target);
    if (info > 0 || s.max_residual > target) {
        detail::polish(h, s);
        if (info > 0 || s.max_residual > target)
            throw ConvergenceError("eig: residual " + std::to_string(s.max_residual) + " exceeds tolerance " +
                                       std::to_string(target),
                                   std::move(s));
    }
    return s;
}

/// Eigenvalues only, no certification. Used in inner loops over small Bloch matrices.
template <typename Derived>
std::vector<cd> eigenvalues_only(const Eigen::MatrixBase<Derived>& h) {
    using M = Eigen::Matrix<cd, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
    Eigen::ComplexEigenSolver<M> solver(M(h), false);
    std::vector<cd> out(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
    std::sort(out.begin(), out.end(), detail::eigen_order);
    return out;
}

/// Smallest singular value of a square matrix.
inline double min_singular_value(const MatX& h) {
    detail::check_square_finite(h, "min_singular_value");
    if (h.rows() <= 16) {
        Eigen::JacobiSVD<MatX> svd(h);
        return svd.singularValues().minCoeff();
    }
    Eigen::BDCSVD<MatX> svd(h);
    return svd.singularValues().minCoeff();
}

namespace detail {

/// Eigenvalues of a complex symmetric tridiagonal matrix by implicit QL with complex orthogonal
/// rotations. Returns nullopt on breakdown (isotropic rotation or no convergence).
inline std::optional<std::vector<cd>> complex_symmetric_ql(std::vector<cd> d, std::vector<cd> e) {
    const int n = static_cast<int>(d.size());
    e.push_back(0.0);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd || std::abs(e[m]) < 1e-300) break;
            }
            if (m != l) {
                if (iter++ == 60) return std::nullopt;
                cd g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                cd r = std::sqrt(g * g + 1.0);
                const cd gr = (std::real(std::conj(g) * r) >= 0.0) ? g + r : g - r;
                if (std::abs(gr) == 0.0) return std::nullopt;
                g = d[m] - d[l] + e[l] / gr;
                cd s = 1.0, c = 1.0, p = 0.0;
                int i = m - 1;
                bool underflow = false;
                for (; i >= l; --i) {
                    const cd f = s * e[i];
                    const cd b = c * e[i];
                    r = std::sqrt(f * f + g * g);
                    e[i + 1] = r;
                    if (std::abs(r) <= 1e-14 * (std::abs(f) + std::abs(g))) {
                        if (std::abs(f) + std::abs(g) != 0.0) return std::nullopt;  // isotropic breakdown
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    for (const auto& x : d)
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return std::nullopt;
    return d;
}

/// LU factors of (T - sigma) for tridiagonal T (lower, diag, upper) with partial pivoting,
/// reusable across right-hand sides.
class TridiagonalLU {
   public:
    TridiagonalLU(const std::vector<cd>& lower, const std::vector<cd>& diag, const std::vector<cd>& upper, cd sigma,
                  double tiny)
        : n_(static_cast<int>(diag.size())), inv_a_(n_), u1_(n_, 0.0), u2_(n_, 0.0), m_(n_, 0.0), swap_(n_, 0) {
        auto mag = [](cd z) { return std::abs(z.real()) + std::abs(z.imag()); };  // cheap pivot measure
        std::vector<cd> a(n_), sub(n_, 0.0);  // row i: a[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2}
        for (int i = 0; i < n_; ++i) {
            a[i] = diag[i] - sigma;
            if (i + 1 < n_) {
                u1_[i] = upper[i];
                sub[i] = lower[i];
            }
        }
        for (int i = 0; i + 1 < n_; ++i) {
            if (mag(sub[i]) > mag(a[i])) {
                std::swap(a[i], sub[i]);
                std::swap(u1_[i], a[i + 1]);
                std::swap(u2_[i], u1_[i + 1]);
                swap_[i] = 1;
            }
            if (mag(a[i]) < tiny) a[i] = tiny;
            inv_a_[i] = 1.0 / a[i];
            m_[i] = sub[i] * inv_a_[i];
            a[i + 1] -= m_[i] * u1_[i];
            u1_[i + 1] -= m_[i] * u2_[i];
        }
        if (mag(a[n_ - 1]) < tiny) a[n_ - 1] = tiny;
        inv_a_[n_ - 1] = 1.0 / a[n_ - 1];
    }

    [[nodiscard]] VecX solve(VecX b) const {
        for (int i = 0; i + 1 < n_; ++i) {
            if (swap_[i]) std::swap(b[i], b[i + 1]);
            b[i + 1] -= m_[i] * b[i];
        }
        VecX x(n_);
        for (int i = n_ - 1; i >= 0; --i) {
            cd acc = b[i];
            if (i + 1 < n_) acc -= u1_[i] * x[i + 1];
            if (i + 2 < n_) acc -= u2_[i] * x[i + 2];
            x[i] = acc * inv_a_[i];
        }
        return x;
    }

   private:
    int n_;
    std::vector<cd> inv_a_, u1_, u2_, m_;
    std::vector<char> swap_;
};

/// Solve (T - sigma) x = b for tridiagonal T (lower c, diag d, upper u) with partial pivoting.
inline VecX tridiagonal_solve(const std::vector<cd>& lower, const std::vector<cd>& diag,
                              const std::vector<cd>& upper, cd sigma, VecX b, double tiny) {
    return TridiagonalLU(lower, diag, upper, sigma, tiny).solve(std::move(b));
}

}  // namespace detail

/// Eigendecomposition of a tridiagonal matrix given by its three diagonals (lower[i] = T(i+1,i),
/// upper[i] = T(i,i+1)). T = D^{-1} S D with S complex symmetric and D diagonal; eigenvalues come from
/// QL on S, eigenvectors from inverse iteration on S mapped back through D^{-1}. Working on S keeps
/// residuals at rounding level even when T is far from normal. Returns nullopt when the fast path
/// breaks down or misses the residual target, in which case callers should fall back to eig().
inline std::optional<Spectrum> eig_tridiagonal(const std::vector<cd>& lower, const std::vector<cd>& diag,
                                               const std::vector<cd>& upper,
                                               std::optional<double> tol = std::nullopt) {
    const int n = static_cast<int>(diag.size());
    if (n < 1 || static_cast<int>(lower.size()) != n - 1 || static_cast<int>(upper.size()) != n - 1)
        throw ArgumentError("eig_tridiagonal: inconsistent diagonal lengths");
    const double target = tol.value_or(default_tolerance(n));

    // d_{i+1} / d_i = r_i = sqrt(upper_i / lower_i); S(i, i+1) = S(i+1, i) = upper_i / r_i.
    std::vector<cd> e(n - 1);
    std::vector<double> log_d(n, 0.0), arg_d(n, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        if (lower[i] == cd{0.0} || upper[i] == cd{0.0}) return std::nullopt;
        const cd r = std::sqrt(upper[i] / lower[i]);
        e[i] = upper[i] / r;
        log_d[i + 1] = log_d[i] + std::log(std::abs(r));
        arg_d[i + 1] = arg_d[i] + std::arg(r);
    }
    auto values = detail::complex_symmetric_ql(diag, e);
    if (!values) return std::nullopt;

    double norm2 = 0.0, s_norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
        norm2 += std::norm(diag[i]);
        s_norm2 += std::norm(diag[i]);
        if (i + 1 < n) {
            norm2 += std::norm(lower[i]) + std::norm(upper[i]);
            s_norm2 += 2.0 * std::norm(e[i]);
        }
    }
    const double t_norm = std::sqrt(norm2);
    const double s_scale = std::max(1.0, std::sqrt(s_norm2));
    auto apply = [&](const VecX& v) -> VecX {
        VecX out(n);
        for (int i = 0; i < n; ++i) {
            cd acc = diag[i] * v[i];
            if (i > 0) acc += lower[i - 1] * v[i - 1];
            if (i + 1 < n) acc += upper[i] * v[i + 1];
            out[i] = acc;
        }
        return out;
    };
    const double eps = std::numeric_limits<double>::epsilon();

    std::vector<cd> vals = *values;
    std::sort(vals.begin(), vals.end(), detail::eigen_order);
    MatX u_vecs(n, n), vecs(n, n);
    // Deterministic start vector with no special symmetry.
    VecX start(n);
    for (int i = 0; i < n; ++i) start[i] = cd(1.0 + 0.37 * std::sin(1.7 * i + 0.3), 0.21 * std::cos(2.3 * i));
    int cluster_begin = 0;
    std::vector<double> log_mag(n);
    for (int c = 0; c < n; ++c) {
        if (c > 0 && std::abs(vals[c] - vals[c - 1]) > 1e-7 * s_scale) cluster_begin = c;
        cd sigma = vals[c] + cd(0.0, (c - cluster_begin) * 10.0 * eps * s_scale);
        VecX u = start;
        std::optional<detail::TridiagonalLU> lu;
        for (int it = 0; it < 4; ++it) {
            if (!lu) lu.emplace(e, diag, e, sigma, eps * s_scale);
            VecX w = lu->solve(u);
            // Keep members of a near-degenerate cluster independent.
            for (int q = cluster_begin; q < c; ++q) w -= u_vecs.col(q).dot(w) * u_vecs.col(q);
            const double nw = w.norm();
            if (!std::isfinite(nw) || nw == 0.0) return std::nullopt;
            u = w / nw;
            // S is complex symmetric, so u^T S u / u^T u is a Rayleigh quotient; it repairs
            // eigenvalues that the unpivoted QL delivered with reduced accuracy.
            if (it != 1 || c != cluster_begin) continue;
            const cd utu = u.transpose() * u;
            if (std::abs(utu) > 1e-6) {
                cd usu = 0.0;
                for (int i = 0; i < n; ++i) {
                    cd acc = diag[i] * u[i];
                    if (i > 0) acc += e[i - 1] * u[i - 1];
                    if (i + 1 < n) acc += e[i] * u[i + 1];
                    usu += u[i] * acc;
                }
                const cd refined = usu / utu;
                if (std::abs(refined - vals[c]) < 1e-4 * s_scale) {
                    sigma = vals[c] = refined;
                    lu.reset();
                }
            }
        }
        u_vecs.col(c) = u;
        // v_i = u_i / d_i, rescaled by the largest magnitude before exponentiating.
        double top = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            log_mag[i] = std::abs(u[i]) > 0.0 ? std::log(std::abs(u[i])) - log_d[i]
                                               : -std::numeric_limits<double>::infinity();
            top = std::max(top, log_mag[i]);
        }
        for (int i = 0; i < n; ++i)
            vecs(i, c) = std::abs(u[i]) > 0.0 ? std::polar(std::exp(log_mag[i] - top), std::arg(u[i]) - arg_d[i])
                                               : cd(0.0);
    }
    Spectrum s = detail::finalize_with(apply, t_norm, std::move(vals), std::move(vecs), false, target);
    if (s.max_residual > target) return std::nullopt;
    return s;
}

}  // namespace mnh
