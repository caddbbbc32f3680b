#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <complex>
#include <random>
#include <vector>

#include "mnh/matching.hpp"
#include "mnh/model.hpp"

namespace testing_support {

using mnh::cd;

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
    cd polar(double rmin, double rmax) { return std::polar(uniform(rmin, rmax), uniform(-mnh::pi, mnh::pi)); }
    cd complex(double scale = 1.0) { return {uniform(-scale, scale), uniform(-scale, scale)}; }
    mnh::Vec2 k() { return {uniform(-2 * mnh::pi, 2 * mnh::pi), uniform(-2 * mnh::pi, 2 * mnh::pi)}; }
    mnh::Coupling3 coupling(double rmin = 0.5, double rmax = 2.0) {
        return {polar(rmin, rmax), polar(rmin, rmax), polar(rmin, rmax)};
    }
    mnh::Coupling3 real_coupling(double rmin = 0.5, double rmax = 2.0) {
        return {uniform(rmin, rmax), uniform(rmin, rmax), uniform(rmin, rmax)};
    }
    Eigen::MatrixXcd matrix(int n) {
        Eigen::MatrixXcd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = complex();
        return m;
    }
};

/// Eigenvalues from Eigen's own QR-based solver: a route independent of the LAPACK binding.
inline std::vector<cd> reference_eigenvalues(const Eigen::MatrixXcd& h) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, false);
    return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

inline double multiset_gap(const std::vector<cd>& a, const std::vector<cd>& b) {
    return mnh::multiset_distance(a, b);
}

/// Brute-force minimum of |f| over a fine grid followed by coordinate-wise shrinking search.
inline mnh::Vec2 grid_min_abs_f(const mnh::Coupling3& j, mnh::Vec2 centre, double half_width, int n = 201) {
    double best = 1e300;
    mnh::Vec2 arg = centre;
    for (int round = 0; round < 12; ++round) {
        const mnh::Vec2 c = arg;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const mnh::Vec2 k = c + half_width * mnh::Vec2(2.0 * a / (n - 1) - 1.0, 2.0 * b / (n - 1) - 1.0);
                const double v = std::abs(mnh::f_function(j, k));
                if (v < best) {
                    best = v;
                    arg = k;
                }
            }
        half_width *= 4.0 / (n - 1);
    }
    return arg;
}

}  // namespace testing_support
