#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace mnh {

/// Bond couplings (J_x, J_y, J_z) on x-, y- and z-links. Complex values make the model non-Hermitian.
struct Coupling3 {
    cd jx{1.0};
    cd jy{1.0};
    cd jz{1.0};

    [[nodiscard]] bool is_hermitian() const { return jx.imag() == 0.0 && jy.imag() == 0.0 && jz.imag() == 0.0; }
    [[nodiscard]] std::array<double, 3> moduli() const { return {std::abs(jx), std::abs(jy), std::abs(jz)}; }
    [[nodiscard]] std::array<double, 3> phases() const { return {std::arg(jx), std::arg(jy), std::arg(jz)}; }
    [[nodiscard]] cd operator[](int alpha) const { return alpha == 0 ? jx : (alpha == 1 ? jy : jz); }
    friend bool operator==(const Coupling3&, const Coupling3&) = default;
};

enum class Variant { PureYL, KModel, GammaModel, MagModel };
enum class EnergyScale { raw, half };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::PureYL: return "PureYL";
        case Variant::KModel: return "KModel";
        case Variant::GammaModel: return "GammaModel";
        case Variant::MagModel: return "MagModel";
    }
    return "?";
}

inline std::optional<Variant> variant_from_string(std::string_view s) {
    if (s == "PureYL") return Variant::PureYL;
    if (s == "KModel") return Variant::KModel;
    if (s == "GammaModel") return Variant::GammaModel;
    if (s == "MagModel") return Variant::MagModel;
    return std::nullopt;
}

/// In-plane DMI vectors (x, y components after the cross product with z) for x-, y-, z-links.
using DmiVectors = std::array<Vec2, 3>;

/// delta_x = y x z, delta_y = -(sqrt3 x + y)/2 x z, delta_z = (sqrt3 x - y)/2 x z.
/// The z-link vector completes the C3 triple; zero it to drop z-link DMI.
inline DmiVectors default_dmi_vectors() {
    return {Vec2{1.0, 0.0}, Vec2{-0.5, sqrt3 / 2.0}, Vec2{-0.5, -sqrt3 / 2.0}};
}

inline DmiVectors dmi_vectors_without_z() {
    auto v = default_dmi_vectors();
    v[2] = Vec2::Zero();
    return v;
}

struct ModelConfig {
    Variant variant = Variant::PureYL;
    Coupling3 j{};
    cd k_coupling{0.0};                        // KModel
    cd gamma{0.0};                             // GammaModel
    double d = 0.0;                            // MagModel
    Vec3 b_field = Vec3::Zero();               // MagModel
    std::optional<DmiVectors> dmi_vectors{};   // MagModel; absent means default_dmi_vectors()
    EnergyScale energy_scale = EnergyScale::raw;

    static ModelConfig pure(const Coupling3& j) { return {Variant::PureYL, j}; }
    static ModelConfig k_model(const Coupling3& j, cd k) {
        ModelConfig m{Variant::KModel, j};
        m.k_coupling = k;
        return m;
    }
    static ModelConfig gamma_model(const Coupling3& j, cd g) {
        ModelConfig m{Variant::GammaModel, j};
        m.gamma = g;
        return m;
    }
    static ModelConfig mag_model(const Coupling3& j, double d, const Vec3& b) {
        ModelConfig m{Variant::MagModel, j};
        m.d = d;
        m.b_field = b;
        return m;
    }

    [[nodiscard]] DmiVectors resolved_dmi() const { return dmi_vectors.value_or(default_dmi_vectors()); }

    /// PureYL and KModel keep the three flavours decoupled.
    [[nodiscard]] bool block_diagonal() const { return variant == Variant::PureYL || variant == Variant::KModel; }

    [[nodiscard]] bool is_hermitian() const {
        return j.is_hermitian() && k_coupling.imag() == 0.0 && gamma.imag() == 0.0;
    }

    /// Throws ConfigError for non-finite values or fields that do not belong to the variant.
    void validate() const {
        auto finite = [](cd z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
        if (!finite(j.jx) || !finite(j.jy) || !finite(j.jz) || !finite(k_coupling) || !finite(gamma) ||
            !std::isfinite(d) || !b_field.allFinite())
            throw ConfigError("model: non-finite coupling");
        if (dmi_vectors) {
            for (const auto& v : *dmi_vectors)
                if (!v.allFinite()) throw ConfigError("model: non-finite dmi vector");
        }
        auto reject = [&](bool present, const char* field) {
            if (present)
                throw ConfigError(std::string("model: field '") + field + "' not valid for variant " +
                                  std::string(to_string(variant)));
        };
        const bool mag = variant == Variant::MagModel;
        reject(variant != Variant::KModel && k_coupling != cd{0.0}, "k_coupling");
        reject(variant != Variant::GammaModel && gamma != cd{0.0}, "gamma");
        reject(!mag && d != 0.0, "d");
        reject(!mag && !b_field.isZero(0.0), "b_field");
        reject(!mag && dmi_vectors.has_value(), "dmi_vectors");
    }
};

using Mat3 = Eigen::Matrix3cd;
using Mat6 = Eigen::Matrix<cd, 6, 6>;

/// Flavour-space amplitudes of c_j^(mu) c_l^(nu) (j on A, l on B) on each link type, plus onsite terms.
struct FlavourBondTable {
    std::array<Mat3, 3> t{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    Mat3 onsite = Mat3::Zero();
};

namespace detail {

inline Mat3 unit(int mu, int nu) {
    Mat3 e = Mat3::Zero();
    e(mu, nu) = 1.0;
    return e;
}

/// Antisymmetric flavour matrix v_x (E_yz - E_zy) + v_y (E_zx - E_xz) + v_z (E_xy - E_yx).
inline Mat3 cross_matrix(double vx, double vy, double vz) {
    Mat3 m = Mat3::Zero();
    m(1, 2) = vx;
    m(2, 1) = -vx;
    m(2, 0) = vy;
    m(0, 2) = -vy;
    m(0, 1) = vz;
    m(1, 0) = -vz;
    return m;
}

}  // namespace detail

inline FlavourBondTable flavour_bond_table(const ModelConfig& model) {
    FlavourBondTable tab;
    for (int a = 0; a < 3; ++a) tab.t[a] = model.j[a] * Mat3::Identity();
    switch (model.variant) {
        case Variant::PureYL: break;
        case Variant::KModel:
            for (int a = 0; a < 3; ++a) tab.t[a] += model.k_coupling * detail::unit(a, a);
            break;
        case Variant::GammaModel:
            // H_Gamma carries an overall -i relative to the J terms.
            for (int a = 0; a < 3; ++a) {
                const int mu = (a + 1) % 3, nu = (a + 2) % 3;
                tab.t[a] -= model.gamma * (detail::unit(mu, nu) + detail::unit(nu, mu));
            }
            break;
        case Variant::MagModel: {
            const auto dmi = model.resolved_dmi();
            for (int a = 0; a < 3; ++a) tab.t[a] += model.d * detail::cross_matrix(dmi[a].x(), dmi[a].y(), 0.0);
            tab.onsite = detail::cross_matrix(model.b_field.x(), model.b_field.y(), model.b_field.z());
            break;
        }
    }
    return tab;
}

/// Overall factor relating the Majorana bilinear to the matrix whose eigenvalues are reported (raw scale).
inline constexpr double convention_factor = 2.0;

/// Phase factors for x-, y-, z-links at momentum k: e^{i k.M1}, e^{-i k.M2}, 1.
inline std::array<cd, 3> link_phases(const Vec2& k) {
    return {std::polar(1.0, k.dot(M1)), std::polar(1.0, -k.dot(M2)), cd{1.0}};
}

inline cd f_function(const Coupling3& j, const Vec2& k) {
    const auto ph = link_phases(k);
    return j.jx * ph[0] + j.jy * ph[1] + j.jz;
}

/// Shifted coupling triples J^(1), J^(2), J^(3): K added to J_x, J_y, J_z respectively.
inline std::array<Coupling3, 3> effective_couplings(const Coupling3& j, cd k_coupling) {
    return {Coupling3{j.jx + k_coupling, j.jy, j.jz}, Coupling3{j.jx, j.jy + k_coupling, j.jz},
            Coupling3{j.jx, j.jy, j.jz + k_coupling}};
}

/// (A_1, A_2, A_3) = f + K (e^{i k.M1}, e^{-i k.M2}, 1).
inline std::array<cd, 3> a_functions(const Coupling3& j, cd k_coupling, const Vec2& k) {
    const auto ph = link_phases(k);
    const cd f = j.jx * ph[0] + j.jy * ph[1] + j.jz;
    return {f + k_coupling * ph[0], f + k_coupling * ph[1], f + k_coupling};
}

/// Couplings governing each decoupled flavour of a block-diagonal model.
inline std::array<Coupling3, 3> flavour_couplings(const ModelConfig& model) {
    if (model.variant == Variant::KModel) return effective_couplings(model.j, model.k_coupling);
    if (model.variant == Variant::PureYL) return {model.j, model.j, model.j};
    throw ArgumentError("flavour_couplings: variant " + std::string(to_string(model.variant)) +
                        " mixes flavours");
}

struct BlochMatrix {
    Vec2 k = Vec2::Zero();
    Mat6 entries = Mat6::Zero();  // basis (a^x, b^x, a^y, b^y, a^z, b^z)
};

inline int bloch_index(int flavour, int sublattice) { return 2 * flavour + sublattice; }

/// A->B flavour block i * sum_alpha t_alpha e^{i phi_alpha(k)} (before the convention factor).
inline Mat3 hopping_block(const FlavourBondTable& tab, const Vec2& k) {
    const auto ph = link_phases(k);
    return tab.t[0] * ph[0] + tab.t[1] * ph[1] + tab.t[2] * ph[2];
}

inline BlochMatrix bloch_hamiltonian(const FlavourBondTable& tab, const Vec2& k) {
    const cd i{0.0, 1.0};
    const Mat3 hab = convention_factor * i * hopping_block(tab, k);
    const Mat3 hba = -(convention_factor * i * hopping_block(tab, Vec2(-k))).transpose();
    const Mat3 hon = convention_factor * i * tab.onsite;
    BlochMatrix out;
    out.k = k;
    for (int mu = 0; mu < 3; ++mu)
        for (int nu = 0; nu < 3; ++nu) {
            out.entries(bloch_index(mu, 0), bloch_index(nu, 1)) = hab(mu, nu);
            out.entries(bloch_index(mu, 1), bloch_index(nu, 0)) = hba(mu, nu);
            out.entries(bloch_index(mu, 0), bloch_index(nu, 0)) = hon(mu, nu);
            out.entries(bloch_index(mu, 1), bloch_index(nu, 1)) = hon(mu, nu);
        }
    return out;
}

inline BlochMatrix bloch_hamiltonian(const ModelConfig& model, const Vec2& k) {
    model.validate();
    return bloch_hamiltonian(flavour_bond_table(model), k);
}

/// 2x2 flavour block [[0, 2i A(k)], [-2i A(-k), 0]] of a block-diagonal model.
inline Eigen::Matrix2cd flavour_block(const Coupling3& j, const Vec2& k) {
    const cd i{0.0, 1.0};
    Eigen::Matrix2cd b;
    b << 0.0, convention_factor * i * f_function(j, k), -convention_factor * i * f_function(j, Vec2(-k)), 0.0;
    return b;
}

/// Square root with nonnegative real part, ties broken towards nonnegative imaginary part.
inline cd principal_root(cd z) {
    cd r = std::sqrt(z);
    if (r.real() < 0.0 || (r.real() == 0.0 && r.imag() < 0.0)) r = -r;
    return r;
}

/// +-2 sqrt(A(k) A(-k)): eigenvalue pair of one decoupled flavour (reduces to +-2|A| when Hermitian).
inline std::array<cd, 2> flavour_pair(const Coupling3& j, const Vec2& k) {
    const cd s = convention_factor * principal_root(f_function(j, k) * f_function(j, Vec2(-k)));
    return {s, -s};
}

/// Closed-form eigenvalues where they exist: PureYL, KModel, and MagModel without DMI.
/// Order: (eps_1^+, eps_1^-, eps_2^+, eps_2^-, eps_3^+, eps_3^-).
inline std::optional<std::array<cd, 6>> closed_form_spectrum(const ModelConfig& model, const Vec2& k) {
    model.validate();
    std::array<cd, 6> out{};
    if (model.block_diagonal()) {
        const auto js = flavour_couplings(model);
        for (int eta = 0; eta < 3; ++eta) {
            const auto p = flavour_pair(js[eta], k);
            out[2 * eta] = p[0];
            out[2 * eta + 1] = p[1];
        }
        return out;
    }
    if (model.variant == Variant::MagModel && model.d == 0.0) {
        // Onsite field commutes with the flavour-diagonal hopping, so the bands are shifted by 0, +-2|B|.
        const cd s = convention_factor * principal_root(f_function(model.j, k) * f_function(model.j, Vec2(-k)));
        const double b = convention_factor * model.b_field.norm();
        out = {s, -s, b + s, b - s, -(b + s), -(b - s)};
        return out;
    }
    return std::nullopt;
}

/// True iff each modulus is at most the sum of the other two (gapless / EP-supporting regime).
inline bool triangle_test(const std::array<double, 3>& m) {
    for (double x : m)
        if (!(x >= 0.0)) throw ArgumentError("triangle_test: moduli must be nonnegative");
    return m[0] <= m[1] + m[2] && m[1] <= m[0] + m[2] && m[2] <= m[0] + m[1];
}

inline double reported_energy_factor(EnergyScale s) { return s == EnergyScale::half ? 0.5 : 1.0; }

}  // namespace mnh
