#include <catch_amalgamated.hpp>

#include <cstring>

#include "mnh/model.hpp"
#include "mnh/spectrum.hpp"
#include "support.hpp"

using namespace mnh;
using testing_support::Rng;

namespace {

/// Characteristic polynomial coefficients (monic, highest first) by Faddeev-LeVerrier.
std::vector<cd> char_poly(const MatX& a) {
    const auto n = a.rows();
    std::vector<cd> c(n + 1);
    c[0] = 1.0;
    MatX m = MatX::Zero(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + c[k - 1] * MatX::Identity(n, n);
        c[k] = -(a * m).trace() / static_cast<double>(k);
    }
    return c;
}

/// Durand-Kerner simultaneous root iteration.
std::vector<cd> poly_roots(const std::vector<cd>& c) {
    const int n = static_cast<int>(c.size()) - 1;
    std::vector<cd> z(n);
    for (int i = 0; i < n; ++i) z[i] = std::pow(cd(0.4, 0.9), i);
    auto eval = [&](cd x) {
        cd acc = 0.0;
        for (const auto& ci : c) acc = acc * x + ci;
        return acc;
    };
    for (int it = 0; it < 2000; ++it) {
        double move = 0.0;
        for (int i = 0; i < n; ++i) {
            cd den = 1.0;
            for (int j = 0; j < n; ++j)
                if (j != i) den *= z[i] - z[j];
            const cd dz = eval(z[i]) / den;
            z[i] -= dz;
            move = std::max(move, std::abs(dz));
        }
        if (move < 1e-16) break;
    }
    return z;
}

MatX random_unitary(Rng& rng, int n) {
    Eigen::HouseholderQR<MatX> qr(rng.matrix(n));
    return qr.householderQ() * MatX::Identity(n, n);
}

}  // namespace

TEST_CASE("eig on small fixed matrices") {
    MatX d = MatX::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 3.0;
    const auto s = eig(d);
    REQUIRE(s.size() == 3);
    CHECK(s.eigenvalues[0] == cd(1.0));
    CHECK(s.eigenvalues[1] == cd(2.0));
    CHECK(s.eigenvalues[2] == cd(3.0));
    for (double r : s.residuals) CHECK(r == 0.0);

    MatX h(2, 2);
    h << 0.0, cd(0, 3), cd(0, -3), 0.0;
    const auto t = eig(h);
    CHECK(std::abs(t.eigenvalues[0] + 3.0) < 1e-14);
    CHECK(std::abs(t.eigenvalues[1] - 3.0) < 1e-14);

    MatX j(2, 2);
    j << 0.0, 1.0, 0.0, 0.0;
    const auto u = eig(j);
    CHECK(std::abs(u.eigenvalues[0]) < 1e-14);
    CHECK(std::abs(u.eigenvalues[1]) < 1e-14);
    CHECK(u.defective[0]);
    CHECK(u.defective[1]);
}

TEST_CASE("eig input validation") {
    CHECK_THROWS_AS(eig(MatX(2, 3)), ArgumentError);
    CHECK_THROWS_AS(eig(MatX(0, 0)), ArgumentError);
    MatX bad = MatX::Identity(2, 2);
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(eig(bad), ArgumentError);
    CHECK_THROWS_AS(min_singular_value(bad), ArgumentError);
}

TEST_CASE("Unreachable tolerance raises with a best-effort result") {
    Rng rng(1);
    const MatX a = rng.matrix(8);
    try {
        (void)eig(a, false, 1e-300);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.best_effort().size() == 8);
        CHECK(e.best_effort().max_residual < 1e-12);
    }
}

TEST_CASE("Ordering, normalisation and residual contract") {
    Rng rng(2);
    for (int n : {2, 6, 24, 96}) {
        for (int s = 0; s < 5; ++s) {
            const MatX a = rng.matrix(n);
            const auto sp = eig(a);
            for (std::size_t q = 0; q + 1 < sp.size(); ++q) {
                const cd x = sp.eigenvalues[q], y = sp.eigenvalues[q + 1];
                CHECK((x.real() < y.real() || (x.real() == y.real() && x.imag() <= y.imag())));
            }
            for (Eigen::Index c = 0; c < n; ++c) CHECK(std::abs(sp.right_vectors.col(c).norm() - 1.0) < 1e-14);
            CHECK(sp.max_residual <= default_tolerance(n));
            for (double r : sp.residuals) CHECK(r <= sp.max_residual);
        }
    }
}

TEST_CASE("Reconstruction H = V L V^-1") {
    Rng rng(4);
    const std::vector<std::pair<int, int>> plan{{2, 40}, {6, 40}, {24, 15}, {312, 5}};
    for (auto [n, count] : plan) {
        for (int s = 0; s < count; ++s) {
            const MatX a = rng.matrix(n);
            const auto sp = eig(a);
            VecX lam(n);
            for (int q = 0; q < n; ++q) lam[q] = sp.eigenvalues[q];
            const MatX rec = sp.right_vectors * lam.asDiagonal() * sp.right_vectors.inverse();
            CHECK((a - rec).norm() / a.norm() <= 1e-8);
        }
    }
}

TEST_CASE("Spectrum is invariant under unitary similarity") {
    Rng rng(5);
    for (int n : {2, 6, 24}) {
        for (int s = 0; s < 10; ++s) {
            const MatX a = rng.matrix(n);
            const MatX u = random_unitary(rng, n);
            const auto e1 = eig(a).eigenvalues;
            const auto e2 = eig(MatX(u * a * u.adjoint())).eigenvalues;
            CHECK(testing_support::multiset_gap(e1, e2) < 1e-9);
        }
    }
}

TEST_CASE("Agreement with characteristic polynomial roots") {
    Rng rng(6);
    for (int n : {1, 2, 3, 4}) {
        for (int s = 0; s < 25; ++s) {
            const MatX a = rng.matrix(n);
            const auto roots = poly_roots(char_poly(a));
            CHECK(testing_support::multiset_gap(eig(a).eigenvalues, roots) < 1e-9);
        }
    }
}

TEST_CASE("Left vectors are biorthogonal") {
    Rng rng(7);
    for (int n : {3, 6, 20}) {
        const MatX a = rng.matrix(n);
        const auto sp = eig(a, true);
        REQUIRE(sp.left_vectors);
        const MatX g = sp.left_vectors->adjoint() * sp.right_vectors;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double scale = std::sqrt(std::abs(g(i, i)) * std::abs(g(j, j)));
                CHECK(std::abs(g(i, j)) / scale < 1e-8);
            }
        // Left eigenvector property: l^H H = lambda l^H.
        for (int i = 0; i < n; ++i) {
            const VecX l = sp.left_vectors->col(i);
            CHECK((l.adjoint() * a - sp.eigenvalues[i] * l.adjoint()).norm() < 1e-8 * l.norm() * a.norm());
        }
    }
}

TEST_CASE("KModel Bloch eigenvalues from eig match the closed form") {
    Rng rng(8);
    for (int s = 0; s < 50; ++s) {
        const auto m = ModelConfig::k_model(rng.coupling(), rng.complex());
        const Vec2 k = rng.k();
        const auto sp = eig(MatX(bloch_hamiltonian(m, k).entries));
        const auto cf = *closed_form_spectrum(m, k);
        CHECK(testing_support::multiset_gap(sp.eigenvalues, std::vector<cd>(cf.begin(), cf.end())) < 1e-10);
        CHECK(sp.max_residual <= 1e-10);
    }
}

TEST_CASE("Deterministic output bytes") {
    Rng rng(9);
    const MatX a = rng.matrix(60);
    const auto s1 = eig(a, true);
    const auto s2 = eig(a, true);
    CHECK(std::memcmp(s1.eigenvalues.data(), s2.eigenvalues.data(), sizeof(cd) * s1.size()) == 0);
    CHECK(std::memcmp(s1.right_vectors.data(), s2.right_vectors.data(), sizeof(cd) * s1.right_vectors.size()) == 0);
    CHECK(std::memcmp(s1.left_vectors->data(), s2.left_vectors->data(), sizeof(cd) * s1.left_vectors->size()) == 0);
}

TEST_CASE("min_singular_value") {
    CHECK(std::abs(min_singular_value(MatX::Identity(6, 6)) - 1.0) < 1e-14);
    MatX j(2, 2);
    j << 0.0, 1.0, 0.0, 0.0;
    CHECK(min_singular_value(j) < 1e-15);
    const auto h = bloch_hamiltonian(ModelConfig::pure({1.0, 1.0, 1.0}), Vec2(4 * pi / 3, 0)).entries;
    CHECK(min_singular_value(MatX(h)) < 1e-10);
    // Against the square root of the smallest eigenvalue of H^H H.
    Rng rng(10);
    for (int n : {4, 30}) {
        const MatX a = rng.matrix(n);
        Eigen::SelfAdjointEigenSolver<MatX> es(a.adjoint() * a);
        CHECK(std::abs(min_singular_value(a) - std::sqrt(es.eigenvalues().minCoeff())) < 1e-12 * a.norm());
    }
}

TEST_CASE("Tridiagonal path agrees with the dense solver") {
    Rng rng(11);
    for (int n : {2, 5, 40, 104}) {
        for (int s = 0; s < 5; ++s) {
            std::vector<cd> lo(n - 1), di(n), up(n - 1);
            for (auto& x : lo) x = rng.polar(0.5, 2.0);
            for (auto& x : up) x = rng.polar(0.5, 2.0);
            for (auto& x : di) x = s % 2 ? rng.complex() : cd(0.0);
            MatX t = MatX::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                t(i, i) = di[i];
                if (i + 1 < n) {
                    t(i + 1, i) = lo[i];
                    t(i, i + 1) = up[i];
                }
            }
            const auto fast = eig_tridiagonal(lo, di, up);
            if (!fast) continue;  // allowed: callers fall back to eig()
            CHECK(fast->max_residual <= default_tolerance(n));
            const auto dense = testing_support::reference_eigenvalues(t);
            CHECK(testing_support::multiset_gap(fast->eigenvalues, dense) < 1e-8 * std::max(1.0, t.norm()));
            for (int c = 0; c < n; ++c)
                CHECK((t * fast->right_vectors.col(c) - fast->eigenvalues[c] * fast->right_vectors.col(c)).norm() <
                      1e-8 * std::max(1.0, t.norm()));
        }
    }
    // Zero coupling: the fast path declines.
    CHECK_FALSE(eig_tridiagonal({0.0}, {1.0, 2.0}, {1.0}));
    CHECK_THROWS_AS(eig_tridiagonal({1.0, 1.0}, {1.0, 2.0}, {1.0}), ArgumentError);
}

TEST_CASE("Hatano-Nelson chain: tridiagonal eigenvalues against the analytic spectrum") {
    // Open chain with hoppings t_R (down) and t_L (up): E_m = 2 sqrt(t_R t_L) cos(m pi / (n + 1)).
    const int n = 60;
    const double tr = 1.3, tl = 0.6;
    std::vector<cd> lo(n - 1, tr), di(n, 0.0), up(n - 1, tl);
    const auto fast = eig_tridiagonal(lo, di, up);
    REQUIRE(fast);
    std::vector<cd> exact;
    for (int m = 1; m <= n; ++m) exact.push_back(2.0 * std::sqrt(tr * tl) * std::cos(m * pi / (n + 1)));
    CHECK(testing_support::multiset_gap(fast->eigenvalues, exact) < 1e-12);
    // Every eigenvector piles up at the end favoured by the larger hopping.
    for (int c = 0; c < n; ++c) {
        const VecX v = fast->right_vectors.col(c);
        CHECK(v.tail(n / 2).squaredNorm() > v.head(n / 2).squaredNorm());
    }
}
