#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>

namespace mnh {

using cd = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double pi = std::numbers::pi;
inline constexpr double sqrt3 = std::numbers::sqrt3;

/// Primitive translations of the triangular Bravais lattice (lattice constant 1).
inline const Vec2 M1{0.5, sqrt3 / 2.0};
inline const Vec2 M2{0.5, -sqrt3 / 2.0};

/// Period of the transverse momentum for a strip built from dimer rows:
/// one dimer row advances y by sqrt(3)/2.
inline constexpr double ky_period = 4.0 * pi / sqrt3;

/// Bond phases carried by x- and y-links: theta1 = k.M1, theta2 = -k.M2.
struct BondPhase {
    double theta1 = 0.0;
    double theta2 = 0.0;
};

inline BondPhase bond_phase_from_k(const Vec2& k) { return {k.dot(M1), -k.dot(M2)}; }

/// Inverse of bond_phase_from_k: kx = theta1 - theta2, ky = (theta1 + theta2)/sqrt(3).
inline Vec2 k_from_bond_phase(double theta1, double theta2) {
    return {theta1 - theta2, (theta1 + theta2) / sqrt3};
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

/// Reduce k into the fundamental reciprocal cell, i.e. both bond phases in (-pi, pi].
inline Vec2 reduce_to_cell(const Vec2& k) {
    auto bp = bond_phase_from_k(k);
    return k_from_bond_phase(wrap_angle(bp.theta1), wrap_angle(bp.theta2));
}

/// Distance between two momenta modulo reciprocal lattice vectors, measured in k.
inline double cell_distance(const Vec2& a, const Vec2& b) {
    auto pa = bond_phase_from_k(a);
    auto pb = bond_phase_from_k(b);
    return k_from_bond_phase(wrap_angle(pa.theta1 - pb.theta1), wrap_angle(pa.theta2 - pb.theta2)).norm();
}

}  // namespace mnh
